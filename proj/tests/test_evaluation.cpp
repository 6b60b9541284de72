#include <cmath>
#include <fstream>

#include "doctest.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/evaluation.h"
#include "rewriteqa/reference_backends.h"
#include "test_util.h"

using namespace rewriteqa;

namespace {

AnswerPrediction pred(const std::string& qid, const std::string& ans, const std::string& sys = "s") {
  return AnswerPrediction{qid, sys, std::nullopt, ans};
}

GradeRecord grade(const std::string& q, const std::string& s, const std::string& g, Verdict v,
                  std::int64_t ts) {
  return GradeRecord{q, s, g, v, ts};
}

}  // namespace

TEST_CASE("exact match against the zebra golds") {
  const GoldMap golds = {{"z", {"grass", "plants", "leaves"}}};
  CHECK(exact_match({pred("z", "leaves")}, golds) == 1.0);
  CHECK(exact_match({pred("z", "hay")}, golds) == 0.0);
  CHECK(exact_match({pred("z", "The Leaves.")}, golds) == 1.0);
  CHECK(exact_match({pred("z", "leaves"), pred("z", "hay")}, golds) == 0.5);
  CHECK_THROWS_AS(exact_match({}, golds), InvalidInputError);
  CHECK_THROWS_AS(exact_match({pred("missing", "x")}, golds), LookupError);
}

TEST_CASE("bert similarity bounds and aggregation") {
  HashEmbedder e;
  const GoldMap golds = {{"z", {"grass", "plants", "leaves"}}, {"k", {"Benjamin Franklin"}}};
  CHECK(bert_similarity({pred("z", "leaves")}, golds, e) == doctest::Approx(1.0).epsilon(1e-9));
  const double mean = bert_similarity({pred("z", "leaves")}, golds, e, SimilarityAggregation::kMean);
  CHECK(mean < 1.0);
  CHECK(mean >= 0.0);
  const double partial = bert_similarity({pred("k", "franklin")}, golds, e);
  CHECK(partial > 0.0);
  CHECK(partial < 1.0);
  CHECK(partial == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("human eval keeps each grader's latest verdict") {
  std::vector<GradeRecord> log = {
      grade("q1", "s", "a", Verdict::kIncorrect, 1), grade("q1", "s", "a", Verdict::kCorrect, 2),
      grade("q1", "s", "b", Verdict::kIncorrect, 1), grade("q2", "s", "a", Verdict::kCorrect, 5),
      grade("q2", "t", "a", Verdict::kIncorrect, 5)};
  // q1: a correct, b incorrect -> 0.5; q2: 1.0
  CHECK(*human_eval_score(log, "s") == doctest::Approx(0.75));
  CHECK(*human_eval_score(log, "t") == 0.0);
  CHECK_FALSE(human_eval_score(log, "u").has_value());
  // Equal timestamps: the later log entry wins.
  log.push_back(grade("q2", "t", "a", Verdict::kCorrect, 5));
  CHECK(*human_eval_score(log, "t") == 1.0);
}

TEST_CASE("answer_dataset falls back to unknown on QA failure") {
  class Flaky : public TextQA {
   public:
    std::string answer(std::string_view q) const override {
      if (q == "bad") throw BackendError("timeout");
      return "15 feet";
    }
  } qa;
  RewriteDecision good, bad;
  good.question_id = "g";
  good.chosen.text = "how tall is giraffe on average";
  bad.question_id = "b";
  bad.chosen.text = "bad";
  const auto out = answer_dataset({good, bad}, qa, "agnostic");
  REQUIRE(out.size() == 2);
  CHECK(out[0].predicted_answer == "15 feet");
  CHECK(*out[0].rewrite_text == "how tall is giraffe on average");
  CHECK(out[1].predicted_answer == "unknown");
  CHECK(out[1].system == "agnostic");
}

TEST_CASE("report ordering and rendering") {
  std::vector<ReportRow> rows = {
      {"concat", ReportSection::kBaselines, std::nullopt, 0.3, 0.7, std::nullopt, false},
      {"agnostic", ReportSection::kOurMethods, std::nullopt, 0.2, 0.6, 0.5, false},
      {"aware", ReportSection::kOurMethods, 10, 0.4, 0.6, std::nullopt, false}};
  for (auto& r : published_reference_rows()) rows.push_back(r);
  const auto report = build_report(rows);
  CHECK(report.rows.front().section == ReportSection::kVqaModels);
  CHECK(report.rows.front().system == "MUTAN");  // highest EM among VQA models
  std::vector<std::string> ours;
  for (const auto& r : report.rows)
    if (r.section == ReportSection::kOurMethods) ours.push_back(r.system);
  CHECK(ours == std::vector<std::string>{"aware", "Model Agnostic", "Model Aware", "agnostic"});
  const auto text = report.render_text();
  CHECK(text.find("Model Aware *") != std::string::npos);
  CHECK(text.find("[Our Methods]") != std::string::npos);
  CHECK(report.to_json()["rows"].size() == rows.size());
}

TEST_CASE("published comparison rows") {
  const auto rows = published_reference_rows();
  REQUIRE(rows.size() == 9);
  const auto find = [&](const std::string& name) {
    for (const auto& r : rows)
      if (r.system == name) return r;
    FAIL("missing row " << name);
    return rows.front();
  };
  CHECK(find("Model Agnostic").em == 0.31);
  CHECK(find("Model Agnostic").bs == 0.70);
  CHECK(*find("Model Agnostic").he == 0.67);
  CHECK(*find("Model Aware").train_data == 1010);
  CHECK(*find("Concatenated Input").he == 0.54);
  CHECK(find("QOnly").em == 0.16);
  for (const auto& r : rows) CHECK(r.published);
}

TEST_CASE("prediction and grade files") {
  testutil::TempDir dir;
  write_predictions(dir / "p.jsonl", {pred("a", "x"), {"b", "s", "rw", "y"}});
  const auto back = read_predictions(dir / "p.jsonl");
  REQUIRE(back.size() == 2);
  CHECK_FALSE(back[0].rewrite_text.has_value());
  CHECK(*back[1].rewrite_text == "rw");
  std::ofstream(dir / "g.jsonl") << R"({"question_id":"a","system":"s","grader_id":"g","verdict":"maybe"})"
                                 << "\n";
  CHECK_THROWS_AS(read_grades(dir / "g.jsonl"), SchemaError);
  std::ofstream(dir / "h.jsonl") << "{\n";
  CHECK_THROWS_AS(read_grades(dir / "h.jsonl"), ParseError);
}
