#include "rewriteqa/evaluation.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <tuple>

#include "rewriteqa/errors.h"
#include "rewriteqa/reference_backends.h"
#include "rewriteqa/text.h"

namespace rewriteqa {

using nlohmann::json;

const char* to_string(Verdict v) { return v == Verdict::kCorrect ? "correct" : "incorrect"; }

Verdict parse_verdict(const std::string& name) {
  if (name == "correct") return Verdict::kCorrect;
  if (name == "incorrect") return Verdict::kIncorrect;
  throw SchemaError("verdict must be 'correct' or 'incorrect', got '" + name + "'");
}

std::vector<AnswerPrediction> answer_dataset(const std::vector<RewriteDecision>& decisions,
                                             const TextQA& qa, const std::string& system) {
  std::vector<AnswerPrediction> out;
  out.reserve(decisions.size());
  for (const auto& d : decisions) {
    if (trim(d.chosen.text).empty()) {
      throw PreconditionError(d.question_id + ": decision has an empty rewrite");
    }
    AnswerPrediction p{d.question_id, system, d.chosen.text, LookupQA::kUnknown};
    try {
      std::string a = trim(qa.answer(d.chosen.text));
      if (!a.empty()) p.predicted_answer = std::move(a);
    } catch (const std::exception& e) {
      std::clog << "warning: " << system << "/" << d.question_id << ": QA failed (" << e.what()
                << "); answering \"unknown\"\n";
    }
    out.push_back(std::move(p));
  }
  return out;
}

double exact_match_score(const std::string& predicted, const std::vector<std::string>& golds) {
  const std::string p = normalize_answer(predicted);
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return 1.0;
  }
  return 0.0;
}

namespace {

const std::vector<std::string>& golds_for(const GoldMap& golds, const std::string& qid) {
  auto it = golds.find(qid);
  if (it == golds.end()) throw LookupError("no gold answers for question '" + qid + "'");
  return it->second;
}

}  // namespace

double exact_match(const std::vector<AnswerPrediction>& preds, const GoldMap& golds) {
  if (preds.empty()) throw InvalidInputError("exact_match over zero predictions");
  double sum = 0.0;
  for (const auto& p : preds) sum += exact_match_score(p.predicted_answer, golds_for(golds, p.question_id));
  return sum / static_cast<double>(preds.size());
}

double bert_similarity(const std::vector<AnswerPrediction>& preds, const GoldMap& golds,
                       const AnswerEmbedder& embedder, SimilarityAggregation aggregation) {
  if (preds.empty()) throw InvalidInputError("bert_similarity over zero predictions");
  double sum = 0.0;
  for (const auto& p : preds) {
    const auto& gs = golds_for(golds, p.question_id);
    if (gs.empty()) throw LookupError("question '" + p.question_id + "' has no gold answers");
    const auto pv = embedder.embed(p.predicted_answer);
    double best = 0.0, total = 0.0;
    for (const auto& g : gs) {
      const double c = std::max(0.0, cosine(embedder.embed(g), pv));
      best = std::max(best, c);
      total += c;
    }
    sum += aggregation == SimilarityAggregation::kMax ? best : total / static_cast<double>(gs.size());
  }
  return sum / static_cast<double>(preds.size());
}

std::optional<double> human_eval_score(const std::vector<GradeRecord>& grades,
                                       const std::string& system) {
  // (question, grader) -> (timestamp, log position, verdict)
  std::map<std::pair<std::string, std::string>, std::tuple<std::int64_t, std::size_t, Verdict>> latest;
  for (std::size_t i = 0; i < grades.size(); ++i) {
    const auto& g = grades[i];
    if (g.system != system) continue;
    auto key = std::make_pair(g.question_id, g.grader_id);
    auto value = std::make_tuple(g.timestamp, i, g.verdict);
    auto it = latest.find(key);
    if (it == latest.end()) {
      latest.emplace(key, value);
    } else if (std::tie(g.timestamp, i) >= std::tie(std::get<0>(it->second), std::get<1>(it->second))) {
      it->second = value;
    }
  }
  if (latest.empty()) return std::nullopt;

  std::map<std::string, std::pair<int, int>> per_question;  // correct, graders
  for (const auto& [key, value] : latest) {
    auto& [correct, graders] = per_question[key.first];
    ++graders;
    if (std::get<2>(value) == Verdict::kCorrect) ++correct;
  }
  double sum = 0.0;
  for (const auto& [_, cg] : per_question) sum += static_cast<double>(cg.first) / cg.second;
  return sum / static_cast<double>(per_question.size());
}

// --- report ---------------------------------------------------------------------

const char* to_string(ReportSection s) {
  switch (s) {
    case ReportSection::kVqaModels: return "VQA Models";
    case ReportSection::kBaselines: return "Baselines";
    case ReportSection::kOurMethods: return "Our Methods";
  }
  return "?";
}

ReportSection parse_report_section(const std::string& name) {
  if (name == "vqa" || name == "VQA Models") return ReportSection::kVqaModels;
  if (name == "baselines" || name == "Baselines") return ReportSection::kBaselines;
  if (name == "ours" || name == "Our Methods") return ReportSection::kOurMethods;
  throw ConfigError("unknown report section '" + name + "'");
}

ReportSection default_section(const std::string& system) {
  if (system == "agnostic" || system == "aware") return ReportSection::kOurMethods;
  if (system == "concat" || system == "passthrough" || system == "finetuned") {
    return ReportSection::kBaselines;
  }
  return ReportSection::kVqaModels;
}

EvaluationReport build_report(std::vector<ReportRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    if (a.section != b.section) return a.section < b.section;
    if (a.em != b.em) return a.em > b.em;
    return a.system < b.system;
  });
  return EvaluationReport{std::move(rows)};
}

std::vector<ReportRow> published_reference_rows() {
  using S = ReportSection;
  return {
      {"MUTAN+AN", S::kVqaModels, 9009, 0.28, 0.70, 0.45, true},
      {"BAN", S::kVqaModels, 9009, 0.29, 0.70, 0.47, true},
      {"BAN+AN", S::kVqaModels, 9009, 0.29, 0.70, 0.43, true},
      {"MUTAN", S::kVqaModels, 9009, 0.30, 0.69, 0.43, true},
      {"QOnly", S::kVqaModels, 9009, 0.16, 0.62, 0.24, true},
      {"Concatenated Input", S::kBaselines, std::nullopt, 0.32, 0.71, 0.54, true},
      {"Fine-Tuned T5", S::kBaselines, 9009, 0.30, 0.71, 0.48, true},
      {"Model Agnostic", S::kOurMethods, std::nullopt, 0.31, 0.70, 0.67, true},
      {"Model Aware", S::kOurMethods, 1010, 0.29, 0.69, 0.67, true},
  };
}

json EvaluationReport::to_json() const {
  json out = json::array();
  for (const auto& r : rows) {
    json row{{"system", r.system},
             {"section", rewriteqa::to_string(r.section)},
             {"train_data", r.train_data ? json(*r.train_data) : json(nullptr)},
             {"em", r.em},
             {"bs", r.bs},
             {"he", r.he ? json(*r.he) : json(nullptr)},
             {"published", r.published}};
    out.push_back(std::move(row));
  }
  return json{{"rows", out}};
}

std::string EvaluationReport::render_text() const {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.system.size() + (r.published ? 2 : 0));
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto fixed = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::string out = pad("System", width) + " | Train | EM   | BS   | HE\n";
  out += std::string(width, '-') + "-+-------+------+------+-----\n";
  std::optional<ReportSection> current;
  for (const auto& r : rows) {
    if (current != r.section) {
      out += "[" + std::string(rewriteqa::to_string(r.section)) + "]\n";
      current = r.section;
    }
    out += pad(r.system + (r.published ? " *" : ""), width) + " | ";
    out += pad(r.train_data ? std::to_string(*r.train_data) : "-", 5) + " | ";
    out += fixed(r.em) + " | " + fixed(r.bs) + " | " + (r.he ? fixed(*r.he) : "-") + "\n";
  }
  if (std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.published; })) {
    out += "* published figures, not computed by this run\n";
  }
  return out;
}

// --- files ----------------------------------------------------------------------

void to_json(json& j, const AnswerPrediction& p) {
  j = json{{"question_id", p.question_id},
           {"system", p.system},
           {"rewrite_text", p.rewrite_text ? json(*p.rewrite_text) : json(nullptr)},
           {"predicted_answer", p.predicted_answer}};
}

void from_json(const json& j, AnswerPrediction& p) {
  try {
    p.question_id = j.at("question_id").get<std::string>();
    p.system = j.at("system").get<std::string>();
    p.predicted_answer = j.at("predicted_answer").get<std::string>();
    p.rewrite_text.reset();
    if (j.contains("rewrite_text") && !j["rewrite_text"].is_null()) {
      p.rewrite_text = j["rewrite_text"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad prediction: ") + e.what());
  }
  if (trim(p.predicted_answer).empty()) throw SchemaError("predicted_answer is empty");
}

void to_json(json& j, const GradeRecord& g) {
  j = json{{"question_id", g.question_id},
           {"system", g.system},
           {"grader_id", g.grader_id},
           {"verdict", to_string(g.verdict)},
           {"timestamp", g.timestamp}};
}

void from_json(const json& j, GradeRecord& g) {
  try {
    g.question_id = j.at("question_id").get<std::string>();
    g.system = j.at("system").get<std::string>();
    g.grader_id = j.at("grader_id").get<std::string>();
    g.verdict = parse_verdict(j.at("verdict").get<std::string>());
    g.timestamp = j.value("timestamp", std::int64_t{0});
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad grade record: ") + e.what());
  }
}

namespace {

template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(std::string("cannot open ") + what + " file: " + path.string());
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(std::string("malformed ") + what + " JSON", line_no);
    try {
      out.push_back(j.get<T>());
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void write_predictions(const std::filesystem::path& path,
                       const std::vector<AnswerPrediction>& preds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : preds) out << json(p).dump() << '\n';
}

std::vector<AnswerPrediction> read_predictions(const std::filesystem::path& path) {
  return read_jsonl<AnswerPrediction>(path, "predictions");
}

std::vector<GradeRecord> read_grades(const std::filesystem::path& path) {
  return read_jsonl<GradeRecord>(path, "grades");
}

}  // namespace rewriteqa
