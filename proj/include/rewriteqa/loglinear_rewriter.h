#ifndef REWRITEQA_LOGLINEAR_REWRITER_H_
#define REWRITEQA_LOGLINEAR_REWRITER_H_

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rewriteqa/ports.h"

namespace rewriteqa {

struct VisualQuestion;

// Reference TrainableRewriter: a left-to-right categorical emitter over a
// closed vocabulary whose per-position logits are linear in the parameters.
//
// For output position j with previous token `prev` (BOS at j = 0) and input
// token set U, the logit of candidate token v is
//
//   bias[v] + pos[min(j, P-1)][v] + trans[prev][v] + sum_{u in U} assoc[u][v]
//     + copy_follow * [v follows prev somewhere in the input]
//     + copy_any * [v occurs in the input]
//
// and the sequence ends with the end-of-sequence token. log P(y | x) and its
// gradient are exact sums over positions of (feature - expected feature).
// The copy weights start large so an untrained model reproduces its input.
class LogLinearRewriter : public TrainableRewriter {
 public:
  struct Options {
    double learning_rate = 0.1;
    int max_positions = 16;
    int max_extra_tokens = 3;  // generation length cap beyond the input length
    double copy_follow_init = 6.0;
    double copy_any_init = 1.0;
  };

  static constexpr const char* kEndToken = "</s>";

  // Vocabulary is deduplicated and sorted; the end token is added.
  explicit LogLinearRewriter(std::vector<std::string> vocabulary);
  LogLinearRewriter(std::vector<std::string> vocabulary, Options options);

  // Every token a rewriter trained on `questions` may need to emit: question
  // and entity tokens plus the concatenation separator.
  static std::vector<std::string> vocabulary_for(std::span<const VisualQuestion> questions);

  std::vector<std::string> generate(const GenerationRequest& request) const override;
  double update(std::string_view input_text,
                const std::vector<WeightedCandidate>& candidates) override;
  std::string snapshot() const override;
  void restore(const std::string& blob) override;

  // log P(output | input). Throws VocabularyError for tokens the model cannot
  // emit and InvalidInputError for empty output.
  double log_likelihood(std::string_view input_text, std::string_view output_text) const;

  // Gradient of sum_i weight_i * log P(text_i | input) w.r.t. parameters().
  std::vector<double> objective_gradient(std::string_view input_text,
                                         const std::vector<WeightedCandidate>& candidates) const;

  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const Options& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  struct InputFeatures;

  InputFeatures featurize(std::string_view input_text) const;
  std::vector<int> encode_output(std::string_view text) const;
  void position_logits(const InputFeatures& in, int position, int prev,
                       std::vector<double>& logits) const;
  double sequence_logprob(const InputFeatures& in, const std::vector<int>& output,
                          std::vector<double>* gradient, double weight) const;
  void init_layout();

  std::size_t bias_at(int v) const;
  std::size_t pos_at(int row, int v) const;
  std::size_t trans_at(int prev, int v) const;
  std::size_t assoc_at(int u, int v) const;

  Options options_;
  std::vector<std::string> vocab_;  // index 0 is the end token
  std::map<std::string, int, std::less<>> index_;
  int bos_ = 0;  // history-only index, equals vocab size
  std::size_t pos_offset_ = 0, trans_offset_ = 0, assoc_offset_ = 0;
  std::size_t copy_follow_ = 0, copy_any_ = 0;
  std::vector<double> params_;
};

}  // namespace rewriteqa

#endif  // REWRITEQA_LOGLINEAR_REWRITER_H_
