#ifndef REWRITEQA_AGNOSTIC_REWRITER_H_
#define REWRITEQA_AGNOSTIC_REWRITER_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rewriteqa/dataset.h"
#include "rewriteqa/ports.h"

namespace rewriteqa {

// Replace question tokens [start, start + length) with an entity.
struct SpanSub {
  int start = 0;
  int length = 1;
  EntityLabel entity;
};

// A rewrite with its provenance. Span-substitution rewrites carry `sub`;
// `score` is set once ranked. Generated (aware) and concatenated rewrites
// have neither.
struct RewriteCandidate {
  std::string text;
  std::optional<SpanSub> sub;
  std::optional<SequenceScore> score;
};

enum class RewriteMode { kAgnostic, kAware, kConcat, kPassthrough };

const char* to_string(RewriteMode mode);
RewriteMode parse_rewrite_mode(const std::string& name);

struct RewriteDecision {
  std::string question_id;
  RewriteCandidate chosen;               // == ranked.front()
  std::vector<RewriteCandidate> ranked;
  RewriteMode mode = RewriteMode::kAgnostic;
};

struct CandidateGenConfig {
  int n_max = 3;
  bool length_normalize = true;
  int min_surviving_tokens = 1;

  void validate() const;
};

// One unscored candidate per (span, entity) pair over all spans of length
// 1..min(n_max, L), minus those leaving fewer than min_surviving_tokens of
// the original tokens. Ordered by span start, then span length, then entity
// rank. Pass `only_entity` to restrict to a single entity.
std::vector<RewriteCandidate> enumerate_candidates(const VisualQuestion& question,
                                                   const CandidateGenConfig& cfg,
                                                   const EntityLabel* only_entity = nullptr);

// Scores every candidate once and sorts best first: by normalized score when
// cfg.length_normalize, else by total logprob. Ties go to the shorter span,
// then the earlier start, then the better entity rank.
std::vector<RewriteCandidate> rank_candidates(std::vector<RewriteCandidate> cands,
                                              const LanguageModelScorer& scorer,
                                              const CandidateGenConfig& cfg);

// Strict weak order used by rank_candidates; candidates must be scored.
bool ranks_before(const RewriteCandidate& a, const RewriteCandidate& b,
                  const CandidateGenConfig& cfg);

RewriteDecision rewrite_agnostic(const VisualQuestion& question,
                                 const LanguageModelScorer& scorer,
                                 const CandidateGenConfig& cfg);

// "<question tokens> . <entity 1> . <entity 2> ..." in rank order.
std::string build_concat_input(const VisualQuestion& question);

RewriteDecision rewrite_concat(const VisualQuestion& question);
RewriteDecision rewrite_passthrough(const VisualQuestion& question);

void to_json(nlohmann::json& j, const RewriteCandidate& c);
void from_json(const nlohmann::json& j, RewriteCandidate& c);
void to_json(nlohmann::json& j, const RewriteDecision& d);
void from_json(const nlohmann::json& j, RewriteDecision& d);

void write_decisions(const std::filesystem::path& path,
                     const std::vector<RewriteDecision>& decisions);
std::vector<RewriteDecision> read_decisions(const std::filesystem::path& path);

}  // namespace rewriteqa

#endif  // REWRITEQA_AGNOSTIC_REWRITER_H_
