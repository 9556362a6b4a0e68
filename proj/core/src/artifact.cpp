#include "coderoute/artifact.hpp"

#include <fstream>
#include <sstream>

namespace coderoute {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(ErrorCode::IoError, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError(ErrorCode::IoError, "short write to " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(ErrorCode::SchemaError, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

Json make_artifact(std::string_view kind) {
  Json doc = Json::object();
  doc["artifact"] = std::string(kind);
  doc["format_version"] = kFormatVersion;
  return doc;
}

void check_artifact(const Json& doc, std::string_view kind, std::string_view context) {
  const int version = require<int>(doc, "format_version", context);
  if (version != kFormatVersion) {
    throw DataError(ErrorCode::VersionMismatch,
                    std::string(context) + ": format_version " + std::to_string(version) +
                        ", expected " + std::to_string(kFormatVersion));
  }
  const auto found = optional_field<std::string>(doc, "artifact", std::string(kind), context);
  if (found != kind) {
    throw DataError(ErrorCode::SchemaError, std::string(context) + ": artifact kind '" + found +
                                                "', expected '" + std::string(kind) + "'");
  }
}

Json read_artifact(const std::filesystem::path& path, std::string_view kind) {
  Json doc = read_json_file(path);
  check_artifact(doc, kind, path.string());
  return doc;
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<Json> rows;
  OffenderList bad(ErrorCode::MalformedLine);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      Json row = Json::parse(line);
      if (!row.is_object()) {
        bad.add(path.filename().string() + ":" + std::to_string(line_no));
        continue;
      }
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::parse_error&) {
      bad.add(path.filename().string() + ":" + std::to_string(line_no));
    }
  }
  bad.throw_if_any(path.string());
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const auto& row : rows) {
    text += row.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

void OffenderList::throw_if_any(std::string_view what) const {
  if (count_ == 0) return;
  std::string detail = std::string(what) + ": " + std::to_string(count_) + " offender(s)";
  if (count_ > ids_.size()) detail += ", first " + std::to_string(ids_.size()) + " shown";
  throw DataError(code_, std::move(detail), ids_);
}

}  // namespace coderoute
