#include "rewriteqa/backend_factory.h"

#include "rewriteqa/errors.h"
#include "rewriteqa/loglinear_rewriter.h"
#include "rewriteqa/reference_backends.h"
#include "rewriteqa/remote_backends.h"

namespace rewriteqa {

std::unique_ptr<LanguageModelScorer> make_scorer(const BackendSpec& spec) {
  if (spec.remote) return std::make_unique<RemoteScorer>(*spec.remote);
  if (spec.path.empty()) throw ConfigError("backends.scorer.path is required for the reference scorer");
  return std::make_unique<NgramTableScorer>(NgramTableScorer::from_file(spec.path, spec.unk_logprob));
}

std::unique_ptr<TextQA> make_qa(const BackendSpec& spec) {
  if (spec.remote) return std::make_unique<RemoteQA>(*spec.remote);
  if (spec.path.empty()) throw ConfigError("backends.qa.path is required for the reference QA table");
  return std::make_unique<LookupQA>(LookupQA::from_file(spec.path));
}

std::unique_ptr<AnswerEmbedder> make_embedder(const BackendSpec& spec) {
  if (spec.remote) return std::make_unique<RemoteEmbedder>(*spec.remote, spec.dimension);
  return std::make_unique<HashEmbedder>(spec.dimension);
}

std::unique_ptr<TrainableRewriter> make_rewriter(const BackendSpec& spec,
                                                 std::vector<std::string> vocabulary,
                                                 double learning_rate) {
  if (spec.remote) return std::make_unique<RemoteRewriter>(*spec.remote);
  LogLinearRewriter::Options opts;
  opts.learning_rate = learning_rate;
  opts.max_positions = spec.max_positions;
  opts.max_extra_tokens = spec.max_extra_tokens;
  opts.copy_follow_init = spec.copy_follow_init;
  opts.copy_any_init = spec.copy_any_init;
  return std::make_unique<LogLinearRewriter>(std::move(vocabulary), opts);
}

}  // namespace rewriteqa
