#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "faithlm/backend.hpp"
#include "faithlm/core.hpp"

namespace faithlm::testing {

inline std::filesystem::path source_dir() { return FAITHLM_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& rel) { return source_dir() / "fixtures" / rel; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Golden files end with one newline that is not part of the rendered text.
inline std::string golden(const std::string& name) {
  std::string s = read_file(source_dir() / "tests" / "golden" / name);
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("faithlm-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline constexpr const char* kMagnetQuestion =
    "Can the positive pole from two magnets pull each other closer?";
inline constexpr const char* kMagnetExplanation =
    "Each magnet has a positive pole and a negative pole, and similar poles push each other away.";
inline constexpr const char* kMagnetHint =
    "Each magnet has a positive pole and a negative pole, and similar poles pull each other closer.";
inline constexpr const char* kMagnetTrigger = "similar poles pull each other closer";

inline Instance magnet_instance() {
  Instance inst;
  inst.id = "magnet";
  inst.question = kMagnetQuestion;
  inst.choices = {"Yes", "No"};
  inst.original_answer = "No";
  return inst;
}

inline backend::RuleTableModel magnet_rules() {
  backend::RuleTableModel m;
  m.base_answers["magnet"] = "No";
  m.flip_rules.push_back({"magnet", kMagnetTrigger, "Yes"});
  return m;
}

}  // namespace faithlm::testing
