#ifndef REWRITEQA_PORTS_H_
#define REWRITEQA_PORTS_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rewriteqa {

// Log-probability of a token sequence, natural-log units.
struct SequenceScore {
  double total_logprob = 0.0;
  int token_count = 1;
  double normalized = 0.0;  // total_logprob / token_count

  static SequenceScore make(double total, int count) {
    return SequenceScore{total, count, total / count};
  }
  bool operator==(const SequenceScore&) const = default;
};

struct GenerationRequest {
  std::string input_text;
  int k = 1;
  int beam_width = 1;
  std::uint64_t seed = 0;

  // Throws InvalidInputError unless 1 <= k <= beam_width.
  void validate() const;
};

struct WeightedCandidate {
  std::string text;
  double weight = 0.0;
};

// Model roles. score/answer/embed/generate must be safe to call concurrently;
// TrainableRewriter::update and restore mutate and need a single writer.

class LanguageModelScorer {
 public:
  virtual ~LanguageModelScorer() = default;
  // Throws InvalidInputError when text has no tokens.
  virtual SequenceScore score_sequence(std::string_view text) const = 0;
};

class TextQA {
 public:
  virtual ~TextQA() = default;
  virtual std::string answer(std::string_view question) const = 0;
};

class AnswerEmbedder {
 public:
  virtual ~AnswerEmbedder() = default;
  virtual int dimension() const = 0;
  // Unit-length vector of size dimension().
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

class Seq2SeqRewriter {
 public:
  virtual ~Seq2SeqRewriter() = default;
  // At most request.k distinct candidates, best first.
  virtual std::vector<std::string> generate(const GenerationRequest& request) const = 0;
};

class TrainableRewriter : public Seq2SeqRewriter {
 public:
  // One reward-weighted step along sum_i weight_i * grad log P(text_i | input).
  // Returns -sum_i weight_i * log P(text_i | input) evaluated before the step.
  virtual double update(std::string_view input_text,
                        const std::vector<WeightedCandidate>& candidates) = 0;
  virtual std::string snapshot() const = 0;
  virtual void restore(const std::string& blob) = 0;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rewriteqa

#endif  // REWRITEQA_PORTS_H_
