#ifndef REWRITEQA_BACKEND_FACTORY_H_
#define REWRITEQA_BACKEND_FACTORY_H_

#include <memory>
#include <string>
#include <vector>

#include "rewriteqa/config.h"
#include "rewriteqa/ports.h"

namespace rewriteqa {

std::unique_ptr<LanguageModelScorer> make_scorer(const BackendSpec& spec);
std::unique_ptr<TextQA> make_qa(const BackendSpec& spec);
std::unique_ptr<AnswerEmbedder> make_embedder(const BackendSpec& spec);

// Reference rewriters need the closed vocabulary they will emit from.
std::unique_ptr<TrainableRewriter> make_rewriter(const BackendSpec& spec,
                                                 std::vector<std::string> vocabulary,
                                                 double learning_rate);

}  // namespace rewriteqa

#endif  // REWRITEQA_BACKEND_FACTORY_H_
