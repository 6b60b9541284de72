#ifndef REWRITEQA_EVALUATION_H_
#define REWRITEQA_EVALUATION_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rewriteqa/agnostic_rewriter.h"
#include "rewriteqa/ports.h"

namespace rewriteqa {

struct AnswerPrediction {
  std::string question_id;
  std::string system;
  std::optional<std::string> rewrite_text;
  std::string predicted_answer;
};

using GoldMap = std::map<std::string, std::vector<std::string>, std::less<>>;

enum class Verdict { kCorrect, kIncorrect };

struct GradeRecord {
  std::string question_id;
  std::string system;
  std::string grader_id;
  Verdict verdict = Verdict::kIncorrect;
  std::int64_t timestamp = 0;  // ms since epoch
};

const char* to_string(Verdict v);
Verdict parse_verdict(const std::string& name);

// QA failures do not abort the run: the prediction gets the "unknown"
// sentinel and a warning goes to std::clog.
std::vector<AnswerPrediction> answer_dataset(const std::vector<RewriteDecision>& decisions,
                                             const TextQA& qa, const std::string& system);

// 1 if the normalized prediction equals any normalized gold, else 0.
double exact_match_score(const std::string& predicted, const std::vector<std::string>& golds);

// Mean per-question exact match. Throws InvalidInputError on empty input and
// LookupError when a question has no gold entry.
double exact_match(const std::vector<AnswerPrediction>& preds, const GoldMap& golds);

enum class SimilarityAggregation { kMax, kMean };

// Per question: max (or mean) cosine between prediction and golds, negative
// values clamped to 0. Returns the mean over questions.
double bert_similarity(const std::vector<AnswerPrediction>& preds, const GoldMap& golds,
                       const AnswerEmbedder& embedder,
                       SimilarityAggregation aggregation = SimilarityAggregation::kMax);

// Latest verdict per (question, grader) by timestamp, later records winning
// ties; per-question fraction of graders saying correct; mean over graded
// questions. Empty when the system has no grades.
std::optional<double> human_eval_score(const std::vector<GradeRecord>& grades,
                                       const std::string& system);

enum class ReportSection { kVqaModels, kBaselines, kOurMethods };
const char* to_string(ReportSection s);
ReportSection parse_report_section(const std::string& name);
// agnostic/aware -> our methods, concat/passthrough/fine-tuned -> baselines,
// anything else -> VQA models.
ReportSection default_section(const std::string& system);

struct ReportRow {
  std::string system;
  ReportSection section = ReportSection::kOurMethods;
  std::optional<int> train_data;
  double em = 0.0;
  double bs = 0.0;
  std::optional<double> he;
  bool published = false;  // static comparison row, not computed here
};

struct EvaluationReport {
  std::vector<ReportRow> rows;

  nlohmann::json to_json() const;
  std::string render_text() const;
};

// Sorts rows by section, then EM descending, then name.
EvaluationReport build_report(std::vector<ReportRow> rows);

// Published results of the original nine systems on the 363-question test
// split, kept for side-by-side comparison.
std::vector<ReportRow> published_reference_rows();

void to_json(nlohmann::json& j, const AnswerPrediction& p);
void from_json(const nlohmann::json& j, AnswerPrediction& p);
void to_json(nlohmann::json& j, const GradeRecord& g);
void from_json(const nlohmann::json& j, GradeRecord& g);

void write_predictions(const std::filesystem::path& path,
                       const std::vector<AnswerPrediction>& preds);
std::vector<AnswerPrediction> read_predictions(const std::filesystem::path& path);
std::vector<GradeRecord> read_grades(const std::filesystem::path& path);

}  // namespace rewriteqa

#endif  // REWRITEQA_EVALUATION_H_
