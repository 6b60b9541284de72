#ifndef REWRITEQA_CONFIG_H_
#define REWRITEQA_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rewriteqa/agnostic_rewriter.h"
#include "rewriteqa/aware_rewriter.h"
#include "rewriteqa/dataset.h"
#include "rewriteqa/evaluation.h"
#include "rewriteqa/remote_backends.h"

namespace rewriteqa {

// Where one port's implementation comes from.
struct BackendSpec {
  std::string kind = "reference";  // "reference" | "remote"
  std::filesystem::path path;      // reference table (scorer, qa)
  double unk_logprob = -10.0;      // reference scorer
  int dimension = 256;             // embedders
  std::optional<RemoteEndpoint> remote;
  // Reference rewriter knobs.
  int max_positions = 16;
  int max_extra_tokens = 3;
  double copy_follow_init = 6.0;
  double copy_any_init = 1.0;
};

// A system to evaluate: either rewrite decisions answered by the QA backend
// or ready-made predictions (e.g. an external VQA model).
struct SystemSpec {
  std::string name;
  std::filesystem::path decisions;
  std::filesystem::path predictions;
  std::optional<ReportSection> section;
  std::optional<int> train_data;
};

struct PipelineConfig {
  std::filesystem::path dataset;  // raw annotated JSONL, input of `prepare`
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::string rewrite_split = "test";
  std::filesystem::path output_dir = "out";
  std::filesystem::path checkpoint_dir;  // defaults to output_dir/checkpoints
  std::uint64_t seed = 0;

  FilterSpec filter;
  CandidateGenConfig candidates;
  ExplorationConfig exploration;
  TrainingConfig training;

  BackendSpec scorer;
  BackendSpec qa;
  BackendSpec reward_embedder;
  BackendSpec eval_embedder;
  BackendSpec rewriter;

  std::vector<SystemSpec> systems;
  SimilarityAggregation bs_aggregation = SimilarityAggregation::kMax;
  bool include_published_rows = true;

  std::filesystem::path grades_path;  // defaults to output_dir/grades.jsonl
  std::filesystem::path images_dir;
  std::filesystem::path static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;

  nlohmann::json effective;  // the merged JSON this config was parsed from

  // Hash of the settings that determine training trajectories; total_steps
  // and checkpoint_every are excluded so a run may be extended.
  std::string training_hash() const;
  std::string hash() const;
};

// Applies REWRITEQA_<KEY>[__<SUBKEY>...] environment variables onto `raw`.
// Keys are lowercased; values are parsed as JSON when possible, otherwise
// taken as strings.
void apply_env_overrides(nlohmann::json& raw, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> rewriteqa_environment();

// Relative paths resolve against base_dir.
PipelineConfig parse_config(const nlohmann::json& raw, const std::filesystem::path& base_dir);
// Reads the file (JSON), applies environment overrides, then merges
// `overrides` (command-line flags) on top, and parses.
PipelineConfig load_config(const std::filesystem::path& path,
                           const nlohmann::json& overrides = nlohmann::json::object());

// Writes output_dir/config.json with the effective config and its hash.
void echo_config(const PipelineConfig& cfg);

std::string hex64(std::uint64_t v);

}  // namespace rewriteqa

#endif  // REWRITEQA_CONFIG_H_
