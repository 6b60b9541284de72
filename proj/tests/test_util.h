#ifndef REWRITEQA_TESTS_TEST_UTIL_H_
#define REWRITEQA_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"

namespace testutil {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(REWRITEQA_FIXTURES) / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "rqa") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Pipeline config over the fixture stack, written to dir/config.json.
inline std::filesystem::path write_fixture_config(const std::filesystem::path& dir,
                                                  const nlohmann::json& patch = nlohmann::json::object()) {
  nlohmann::json cfg = {
      {"seed", 7},
      {"output_dir", (dir / "out").string()},
      {"dataset", {{"input", fixture("raw_dataset.jsonl").string()}}},
      {"exploration", {{"t", 2}, {"k", 2}, {"beam_width", 2}}},
      {"training", {{"batch_size", 4}, {"total_steps", 6}, {"checkpoint_every", 3}}},
      {"backends",
       {{"scorer", {{"path", fixture("ngram_table.tsv").string()}}},
        {"qa", {{"path", fixture("qa_table.tsv").string()}}}}}};
  cfg.merge_patch(patch);
  const auto path = dir / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return path;
}

}  // namespace testutil

#endif  // REWRITEQA_TESTS_TEST_UTIL_H_
