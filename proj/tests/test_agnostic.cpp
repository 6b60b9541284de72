#include <algorithm>
#include <random>
#include <tuple>

#include "doctest.h"
#include "rewriteqa/agnostic_rewriter.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/reference_backends.h"
#include "test_util.h"

using namespace rewriteqa;

namespace {

VisualQuestion giraffe() {
  VisualQuestion q;
  q.question_id = "g";
  q.question = "How tall is this animal on average?";
  q.gold_answers = {"15 feet"};
  q.entities = {{"giraffe", EntitySource::kObject, 1},
                {"stone", EntitySource::kObject, 2},
                {"tree", EntitySource::kScene, 3},
                {"park", EntitySource::kScene, 4}};
  return q;
}

// Counts, per the definition, without the library's loop structure.
std::size_t expected_count(std::size_t L, std::size_t E, int n_max) {
  std::size_t c = 0;
  for (int n = 1; n <= n_max; ++n) {
    if (static_cast<std::size_t>(n) < L) c += (L - n + 1) * E;  // n == L leaves nothing
  }
  return c;
}

}  // namespace

TEST_CASE("seven tokens and four entities give 72 candidates") {
  const auto cands = enumerate_candidates(giraffe(), CandidateGenConfig{});
  CHECK(cands.size() == 72);
  CHECK(cands.size() == expected_count(7, 4, 3));
  CHECK(cands.front().text == "giraffe tall is this animal on average");
  CHECK(cands.front().sub->entity.rank == 1);
}

TEST_CASE("min_surviving_tokens removes whole-question spans") {
  VisualQuestion q = giraffe();
  q.question = "what is it";
  const auto cands = enumerate_candidates(q, CandidateGenConfig{});
  CHECK(cands.size() == expected_count(3, 4, 3));
  for (const auto& c : cands) CHECK(c.sub->length < 3);
  CandidateGenConfig loose;
  loose.min_surviving_tokens = 0;
  CHECK(enumerate_candidates(q, loose).size() == (3 + 2 + 1) * 4);
}

TEST_CASE("only_entity restricts the entity set") {
  const auto q = giraffe();
  const auto cands = enumerate_candidates(q, CandidateGenConfig{}, &q.entities[2]);
  CHECK(cands.size() == 18);
  for (const auto& c : cands) CHECK(c.sub->entity.text == "tree");
}

TEST_CASE("enumeration preconditions") {
  VisualQuestion q = giraffe();
  q.entities.clear();
  CHECK_THROWS_AS(enumerate_candidates(q, CandidateGenConfig{}), PreconditionError);
  q = giraffe();
  q.question = "?";
  CHECK_THROWS_AS(enumerate_candidates(q, CandidateGenConfig{}), PreconditionError);
  CandidateGenConfig bad;
  bad.n_max = 0;
  CHECK_THROWS_AS(enumerate_candidates(giraffe(), bad), ConfigError);
}

TEST_CASE("fixture scorer picks the gold giraffe rewrite") {
  const auto scorer = NgramTableScorer::from_file(testutil::fixture("ngram_table.tsv"));
  const auto d = rewrite_agnostic(giraffe(), scorer, CandidateGenConfig{});
  CHECK(d.chosen.text == "how tall is giraffe on average");
  CHECK(d.chosen.sub->start == 3);
  CHECK(d.chosen.sub->length == 2);
  CHECK(d.ranked.size() == 72);
  for (std::size_t i = 1; i < d.ranked.size(); ++i) {
    CHECK(d.ranked[i - 1].score->normalized >= d.ranked[i].score->normalized);
  }
}

TEST_CASE("ties: shorter span, then earlier start, then better entity") {
  NgramTableScorer flat(-1.0);  // every candidate of equal length ties
  VisualQuestion q = giraffe();
  q.question = "a b c d";
  q.entities = {{"x", EntitySource::kObject, 1}, {"y", EntitySource::kObject, 2}};
  CandidateGenConfig cfg;
  cfg.length_normalize = true;  // all normalized scores are -1
  const auto ranked = rank_candidates(enumerate_candidates(q, cfg), flat, cfg);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    const auto& a = *ranked[i - 1].sub;
    const auto& b = *ranked[i].sub;
    CHECK(std::make_tuple(a.length, a.start, a.entity.rank) <
          std::make_tuple(b.length, b.start, b.entity.rank));
  }
  CHECK(ranked.front().text == "x b c d");
}

TEST_CASE("total-logprob ranking prefers shorter outputs") {
  NgramTableScorer flat(-1.0);
  VisualQuestion q = giraffe();
  q.question = "a b c";
  q.entities = {{"x", EntitySource::kObject, 1}};
  CandidateGenConfig cfg;
  cfg.length_normalize = false;
  const auto ranked = rank_candidates(enumerate_candidates(q, cfg), flat, cfg);
  CHECK(ranked.front().text == "x c");
}

namespace {
class FailingScorer : public LanguageModelScorer {
 public:
  SequenceScore score_sequence(std::string_view) const override { throw Error("down"); }
};
}  // namespace

TEST_CASE("scorer failures surface as BackendError") {
  FailingScorer s;
  CHECK_THROWS_AS(rewrite_agnostic(giraffe(), s, CandidateGenConfig{}), BackendError);
}

TEST_CASE("concat and passthrough") {
  const auto q = giraffe();
  CHECK(build_concat_input(q) == "how tall is this animal on average . giraffe . stone . tree . park");
  CHECK(rewrite_concat(q).chosen.text == build_concat_input(q));
  CHECK(rewrite_concat(q).mode == RewriteMode::kConcat);
  CHECK(rewrite_passthrough(q).chosen.text == q.question);
}

TEST_CASE("decisions round trip through JSONL") {
  const auto scorer = NgramTableScorer::from_file(testutil::fixture("ngram_table.tsv"));
  const auto q = giraffe();
  std::vector<RewriteDecision> ds = {rewrite_agnostic(q, scorer, CandidateGenConfig{}),
                                     rewrite_concat(q)};
  testutil::TempDir dir;
  write_decisions(dir / "d.jsonl", ds);
  const auto back = read_decisions(dir / "d.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].chosen.text == ds[0].chosen.text);
  CHECK(back[0].chosen.sub->entity.text == "giraffe");
  CHECK(back[0].chosen.score->total_logprob == ds[0].chosen.score->total_logprob);
  CHECK(back[0].ranked.size() == ds[0].ranked.size());
  CHECK(back[1].mode == RewriteMode::kConcat);
  CHECK_FALSE(back[1].chosen.sub.has_value());
}

TEST_CASE("rewrite mode names") {
  for (auto m : {RewriteMode::kAgnostic, RewriteMode::kAware, RewriteMode::kConcat,
                 RewriteMode::kPassthrough}) {
    CHECK(parse_rewrite_mode(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_rewrite_mode("magic"), ConfigError);
}
