#ifndef REWRITEQA_REMOTE_BACKENDS_H_
#define REWRITEQA_REMOTE_BACKENDS_H_

#include <string>

#include "json.hpp"
#include "rewriteqa/ports.h"

namespace rewriteqa {

struct RemoteEndpoint {
  std::string url;  // e.g. "http://127.0.0.1:8500" or with a path prefix
  int timeout_ms = 10000;
  int retries = 2;

  // Throws ConfigError unless url is http://host[:port][/prefix].
  void validate() const;
};

// POSTs `body` as JSON to endpoint.url + path and returns the parsed reply.
// Transport failures and non-2xx statuses are retried `retries` times; the
// final failure, or a reply that is not a JSON object, raises BackendError.
nlohmann::json post_json(const RemoteEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body);

// Port adapters speaking the JSON wire protocol. Each validates the reply
// schema and raises BackendError on anything unexpected.

class RemoteScorer : public LanguageModelScorer {
 public:
  explicit RemoteScorer(RemoteEndpoint endpoint);
  SequenceScore score_sequence(std::string_view text) const override;

 private:
  RemoteEndpoint endpoint_;
};

class RemoteQA : public TextQA {
 public:
  explicit RemoteQA(RemoteEndpoint endpoint);
  std::string answer(std::string_view question) const override;

 private:
  RemoteEndpoint endpoint_;
};

class RemoteEmbedder : public AnswerEmbedder {
 public:
  RemoteEmbedder(RemoteEndpoint endpoint, int dimension);
  int dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  RemoteEndpoint endpoint_;
  int dimension_;
};

// Gradient steps happen server side; snapshot/restore are unsupported and
// raise BackendError.
class RemoteRewriter : public TrainableRewriter {
 public:
  explicit RemoteRewriter(RemoteEndpoint endpoint);
  std::vector<std::string> generate(const GenerationRequest& request) const override;
  double update(std::string_view input_text,
                const std::vector<WeightedCandidate>& candidates) override;
  std::string snapshot() const override;
  void restore(const std::string& blob) override;

 private:
  RemoteEndpoint endpoint_;
};

}  // namespace rewriteqa

#endif  // REWRITEQA_REMOTE_BACKENDS_H_
