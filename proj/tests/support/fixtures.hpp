#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "coderoute/corpus.hpp"

namespace fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "coderoute") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Per-model outcome on one problem: `passing` of n_s samples pass, every
// sample spends `tokens` completion tokens.
struct Outcome {
  std::string model_id;
  int passing = 0;
  std::int64_t tokens = 100;
};

inline std::vector<coderoute::ResponseRecord> responses(const std::string& problem_id,
                                                        const std::vector<Outcome>& outcomes,
                                                        int n_s) {
  std::vector<coderoute::ResponseRecord> out;
  for (const auto& o : outcomes) {
    for (int s = 0; s < n_s; ++s) {
      out.push_back({problem_id, o.model_id, s, s < o.passing, o.tokens, 10});
    }
  }
  return out;
}

inline coderoute::Problem problem(const std::string& id, const std::string& prompt = "solve it") {
  return {id, coderoute::ProblemSource::Other, prompt, std::nullopt};
}

}  // namespace fixtures
