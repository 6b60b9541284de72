#ifndef REWRITEQA_REFERENCE_BACKENDS_H_
#define REWRITEQA_REFERENCE_BACKENDS_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rewriteqa/ports.h"

namespace rewriteqa {

// Table-driven bigram scorer. Each token is charged the logprob of the
// (previous, token) bigram when listed, else its unigram entry, else
// unk_logprob. The first token's history is "<s>".
//
// Table file: one entry per line, "<logprob>\t<token> [<token>]"; blank lines
// and lines starting with '#' are skipped. Logprobs must be <= 0.
class NgramTableScorer : public LanguageModelScorer {
 public:
  explicit NgramTableScorer(double unk_logprob = -10.0);

  static NgramTableScorer from_file(const std::filesystem::path& path,
                                    double unk_logprob = -10.0);
  static NgramTableScorer from_stream(std::istream& in, double unk_logprob = -10.0);

  void set_unigram(const std::string& token, double logprob);
  void set_bigram(const std::string& prev, const std::string& token, double logprob);

  SequenceScore score_sequence(std::string_view text) const override;

 private:
  double unk_logprob_;
  std::map<std::string, double, std::less<>> unigrams_;
  std::map<std::pair<std::string, std::string>, double> bigrams_;
};

// Closed-book QA stand-in: exact lookup on the normalized question text.
//
// Table file: "<question>\t<answer>" per line; '#' comments allowed.
class LookupQA : public TextQA {
 public:
  static constexpr const char* kUnknown = "unknown";

  LookupQA() = default;
  explicit LookupQA(const std::vector<std::pair<std::string, std::string>>& entries);
  static LookupQA from_file(const std::filesystem::path& path);

  void add(std::string_view question, std::string answer);
  std::string answer(std::string_view question) const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> table_;
};

// Bag-of-tokens embedder: each normalized answer token is hashed (FNV-1a)
// into one of `dimension` buckets; the count vector is L2-normalized. Text
// with no tokens maps to a fixed sentinel bucket so the output is always unit
// length.
class HashEmbedder : public AnswerEmbedder {
 public:
  explicit HashEmbedder(int dimension = 256);
  int dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;

  // Bucket a single token lands in; exposed for collision checks in tests.
  int bucket(std::string_view token) const;

 private:
  int dimension_;
};

// Returns the input unchanged as its only candidate.
class IdentityRewriter : public Seq2SeqRewriter {
 public:
  std::vector<std::string> generate(const GenerationRequest& request) const override;
};

std::uint64_t fnv1a64(std::string_view data);

}  // namespace rewriteqa

#endif  // REWRITEQA_REFERENCE_BACKENDS_H_
