#ifndef REWRITEQA_AWARE_REWRITER_H_
#define REWRITEQA_AWARE_REWRITER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rewriteqa/agnostic_rewriter.h"
#include "rewriteqa/dataset.h"
#include "rewriteqa/ports.h"

namespace rewriteqa {

struct ExplorationConfig {
  int t = 10;          // temporary rewrites kept per entity
  int k = 3;           // generated candidates per temporary rewrite
  int beam_width = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class RewardAggregation { kMaxOverGolds, kFirstGold };
enum class Baseline { kNone, kBatchMean };

const char* to_string(RewardAggregation a);
const char* to_string(Baseline b);
RewardAggregation parse_reward_aggregation(const std::string& name);
Baseline parse_baseline(const std::string& name);

struct TrainingConfig {
  int batch_size = 16;
  int total_steps = 9600;
  double learning_rate = 0.1;
  double edit_penalty_weight = 0.1;  // lambda
  Baseline baseline = Baseline::kBatchMean;
  RewardAggregation aggregation = RewardAggregation::kMaxOverGolds;
  std::uint64_t seed = 0;
  int checkpoint_every = 100;
  int warmup_steps = 0;  // denoising pre-phase, off by default

  void validate() const;
};

// The frozen models a training step consults.
struct Backends {
  const LanguageModelScorer& scorer;
  const TextQA& qa;
  const AnswerEmbedder& embedder;
};

struct EntityExploration {
  EntityLabel entity;
  std::vector<RewriteCandidate> temporary_rewrites;  // top-t, best first
  std::vector<std::string> lot_texts;                // <= t * k
};

// Per entity: rank that entity's span substitutions with `scorer`, keep the
// top t as temporary rewrites, and expand each through rewriter.generate.
std::vector<EntityExploration> explore(const VisualQuestion& question,
                                       const LanguageModelScorer& scorer,
                                       const Seq2SeqRewriter& rewriter,
                                       const ExplorationConfig& cfg,
                                       const CandidateGenConfig& gen = {});

struct ScoredRewrite {
  std::string text;
  std::string predicted_answer;
  double reward = 0.0;
};

struct RewardedLot {
  EntityLabel entity;
  std::vector<ScoredRewrite> candidates;
  double average_reward = 0.0;
};

// Answers every lot member with `qa` and rewards it by the cosine between
// the predicted and gold answer embeddings (best gold, or the first gold).
// The lot reward is the arithmetic mean.
RewardedLot compute_lot_reward(std::span<const std::string> lot_texts,
                               std::span<const std::string> gold_answers, const TextQA& qa,
                               const AnswerEmbedder& embedder, RewardAggregation aggregation);

// Highest average reward; ties go to the better-ranked entity. Empty lots are
// skipped; throws NoCandidatesError if nothing is left.
const RewardedLot& select_lot(std::span<const RewardedLot> lots);

// Cross entropy of the candidate's smoothed unigram distribution measured
// against the input's unigram distribution. Zero-edit rewrites score lowest;
// rewrites that drop input tokens score higher.
double edit_penalty(std::string_view input_text, std::string_view candidate_text);

struct StepReport {
  double mean_reward = 0.0;
  double loss = 0.0;
  int questions_used = 0;
};

// Per-question update weights, exposed for inspection and tests.
struct QuestionUpdate {
  std::string question_id;
  std::string input_text;
  RewardedLot winner;
  std::vector<WeightedCandidate> candidates;
  double mean_edit_penalty = 0.0;
};

// Explore, reward and select for each question, then make one update call
// per question (in batch order) with weights
//   ((reward_i - b) - lambda * (penalty_i - mean penalty)) / |lot|
// where b is 0 or the batch mean of winning-lot averages. Questions with no
// rewardable lot are skipped.
StepReport train_step(std::span<const VisualQuestion> batch, TrainableRewriter& rewriter,
                      const Backends& backends, const TrainingConfig& cfg,
                      const ExplorationConfig& ecfg, const CandidateGenConfig& gen = {},
                      std::vector<QuestionUpdate>* updates = nullptr);

// Self-supervised warm-up: teaches the rewriter to map the concatenated input
// back to the plain question.
void warmup(std::span<const VisualQuestion> dataset, TrainableRewriter& rewriter, int steps);

struct TrainState {
  int step = 0;
  std::string rewriter_snapshot;
  double running_mean_reward = 0.0;
  std::string rng_state;
};

// Seeded epoch shuffler. Its whole state round-trips through a string.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();
  std::string serialize() const;
  static BatchSampler deserialize(const std::string& state);

 private:
  BatchSampler() = default;
  void reshuffle();

  std::size_t batch_size_ = 1;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct TrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::filesystem::path metrics_path;    // empty: no metrics log
  std::string config_hash;
  std::optional<TrainState> resume_from;
  // Invoked after each step; used by the CLI for progress output.
  std::function<void(int step, const StepReport&)> on_step;
};

TrainState train(std::span<const VisualQuestion> dataset, TrainableRewriter& rewriter,
                 const Backends& backends, const TrainingConfig& cfg,
                 const ExplorationConfig& ecfg, const CandidateGenConfig& gen,
                 const TrainOptions& options);

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state,
                     const std::string& config_hash);
// Reads dir/latest (or dir itself if it is a step directory). Throws
// ConfigMismatchError when expected_hash is non-empty and differs.
TrainState load_checkpoint(const std::filesystem::path& dir, const std::string& expected_hash);
std::filesystem::path latest_checkpoint(const std::filesystem::path& dir);

RewriteDecision rewrite_aware(const VisualQuestion& question, const Seq2SeqRewriter& rewriter,
                              int beam_width = 5);

}  // namespace rewriteqa

#endif  // REWRITEQA_AWARE_REWRITER_H_
