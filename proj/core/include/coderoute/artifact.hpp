#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coderoute/error.hpp"

namespace coderoute {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// Reads a required member, converting nlohmann type errors into SchemaError.
template <typename T>
T require(const Json& obj, std::string_view key, std::string_view context) {
  if (!obj.is_object()) {
    throw DataError(ErrorCode::SchemaError, std::string(context) + ": expected a JSON object");
  }
  auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    throw DataError(ErrorCode::SchemaError,
                    std::string(context) + ": missing field '" + std::string(key) + "'");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(ErrorCode::SchemaError, std::string(context) + ": field '" +
                                                std::string(key) + "': " + e.what());
  }
}

template <typename T>
T optional_field(const Json& obj, std::string_view key, T fallback, std::string_view context) {
  if (!obj.is_object()) return fallback;
  auto it = obj.find(std::string(key));
  if (it == obj.end() || it->is_null()) return fallback;
  return require<T>(obj, key, context);
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);

// Artifacts are JSON objects tagged with {"artifact": kind, "format_version": N}.
Json make_artifact(std::string_view kind);
// Throws VersionMismatch for a foreign format_version, SchemaError for a wrong kind.
Json read_artifact(const std::filesystem::path& path, std::string_view kind);
void check_artifact(const Json& doc, std::string_view kind, std::string_view context);

// One JSON object per line. Blank lines are skipped. Unparseable or non-object
// lines are collected and reported together as MalformedLine.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

// Collects offending ids and throws once with up to DataError::kMaxOffenders.
class OffenderList {
 public:
  explicit OffenderList(ErrorCode code) : code_(code) {}
  void add(std::string id) {
    ++count_;
    if (ids_.size() < DataError::kMaxOffenders) ids_.push_back(std::move(id));
  }
  bool empty() const noexcept { return count_ == 0; }
  void throw_if_any(std::string_view what) const;

 private:
  ErrorCode code_;
  std::size_t count_ = 0;
  std::vector<std::string> ids_;
};

}  // namespace coderoute
