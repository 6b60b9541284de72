#include "rewriteqa/commands.h"

#include <fstream>
#include <iostream>
#include <set>

#include "rewriteqa/backend_factory.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/loglinear_rewriter.h"

namespace rewriteqa {
namespace {

std::vector<VisualQuestion> read_split(const PipelineConfig& cfg, const std::string& split) {
  const auto& path = split == "train" ? cfg.train_path : cfg.test_path;
  if (!std::filesystem::exists(path)) {
    throw ConfigError(split + " split not found at " + path.string() + " (run `prepare` first)");
  }
  return read_questions(path);
}

std::vector<std::string> rewriter_vocabulary(const PipelineConfig& cfg) {
  std::vector<VisualQuestion> all = read_split(cfg, "train");
  if (std::filesystem::exists(cfg.test_path)) {
    auto test = read_questions(cfg.test_path);
    all.insert(all.end(), test.begin(), test.end());
  }
  return LogLinearRewriter::vocabulary_for(all);
}

}  // namespace

std::filesystem::path decisions_path(const PipelineConfig& cfg, RewriteMode mode) {
  return cfg.output_dir / ("decisions_" + std::string(to_string(mode)) + ".jsonl");
}

std::filesystem::path predictions_path(const PipelineConfig& cfg, const std::string& system) {
  return cfg.output_dir / ("predictions_" + system + ".jsonl");
}

GoldMap load_golds(const PipelineConfig& cfg) {
  GoldMap golds;
  for (const auto& q : read_split(cfg, cfg.rewrite_split)) golds[q.question_id] = q.gold_answers;
  return golds;
}

void cmd_prepare(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.dataset.empty()) throw ConfigError("dataset.input is not set");
  const auto records = load_dataset(cfg.dataset, cfg.filter);
  std::vector<VisualQuestion> train, test;
  for (const auto& q : records) (q.split == Split::kTrain ? train : test).push_back(q);
  echo_config(cfg);
  std::filesystem::create_directories(cfg.train_path.parent_path());
  std::filesystem::create_directories(cfg.test_path.parent_path());
  write_questions(cfg.train_path, train);
  write_questions(cfg.test_path, test);
  out << "train=" << train.size() << " test=" << test.size() << "\n";
}

std::filesystem::path cmd_rewrite(const PipelineConfig& cfg, RewriteMode mode, std::ostream& out) {
  const auto questions = read_split(cfg, cfg.rewrite_split);
  std::vector<RewriteDecision> decisions;
  decisions.reserve(questions.size());

  std::unique_ptr<LanguageModelScorer> scorer;
  std::unique_ptr<TrainableRewriter> rewriter;
  if (mode == RewriteMode::kAgnostic) scorer = make_scorer(cfg.scorer);
  if (mode == RewriteMode::kAware) {
    if (cfg.rewriter.remote) {
      rewriter = make_rewriter(cfg.rewriter, {}, cfg.training.learning_rate);
    } else {
      const auto latest = cfg.checkpoint_dir / "latest";
      if (!std::filesystem::exists(latest) && !std::filesystem::exists(cfg.checkpoint_dir / "state.json")) {
        throw ConfigError("aware rewriting needs a trained checkpoint; none found at " +
                          cfg.checkpoint_dir.string() + " (run `train` first)");
      }
      const TrainState state = load_checkpoint(cfg.checkpoint_dir, "");
      rewriter = make_rewriter(cfg.rewriter, {}, cfg.training.learning_rate);
      rewriter->restore(state.rewriter_snapshot);
    }
  }

  for (const auto& q : questions) {
    if (q.entities.empty() && mode != RewriteMode::kConcat && mode != RewriteMode::kPassthrough) {
      std::clog << "warning: " << q.question_id << " has no entities; passing the question through\n";
      decisions.push_back(rewrite_passthrough(q));
      decisions.back().mode = mode;
      continue;
    }
    switch (mode) {
      case RewriteMode::kAgnostic:
        decisions.push_back(rewrite_agnostic(q, *scorer, cfg.candidates));
        break;
      case RewriteMode::kAware:
        decisions.push_back(rewrite_aware(q, *rewriter, cfg.exploration.beam_width));
        break;
      case RewriteMode::kConcat:
        decisions.push_back(rewrite_concat(q));
        break;
      case RewriteMode::kPassthrough:
        decisions.push_back(rewrite_passthrough(q));
        break;
    }
  }
  echo_config(cfg);
  const auto path = decisions_path(cfg, mode);
  write_decisions(path, decisions);
  out << "mode=" << to_string(mode) << " decisions=" << decisions.size() << " -> " << path.string()
      << "\n";
  return path;
}

TrainState cmd_train(const PipelineConfig& cfg, bool resume, std::ostream& out) {
  const auto dataset = read_split(cfg, "train");
  auto scorer = make_scorer(cfg.scorer);
  auto qa = make_qa(cfg.qa);
  auto embedder = make_embedder(cfg.reward_embedder);
  auto rewriter = make_rewriter(cfg.rewriter, rewriter_vocabulary(cfg), cfg.training.learning_rate);

  TrainOptions options;
  options.checkpoint_dir = cfg.checkpoint_dir;
  options.metrics_path = cfg.output_dir / "metrics.jsonl";
  options.config_hash = cfg.training_hash();
  if (resume) options.resume_from = load_checkpoint(cfg.checkpoint_dir, options.config_hash);

  echo_config(cfg);
  const TrainState state =
      train(dataset, *rewriter, Backends{*scorer, *qa, *embedder}, cfg.training, cfg.exploration,
            cfg.candidates, options);
  out << "steps=" << state.step << " running_mean_reward=" << state.running_mean_reward
      << " checkpoint=" << latest_checkpoint(cfg.checkpoint_dir).string() << "\n";
  return state;
}

EvaluationReport cmd_eval(const PipelineConfig& cfg, std::ostream& out) {
  std::vector<SystemSpec> systems = cfg.systems;
  if (systems.empty()) {
    for (auto mode : {RewriteMode::kAgnostic, RewriteMode::kAware, RewriteMode::kConcat,
                      RewriteMode::kPassthrough}) {
      const auto path = decisions_path(cfg, mode);
      if (std::filesystem::exists(path)) systems.push_back(SystemSpec{to_string(mode), path, {}, {}, {}});
    }
    if (systems.empty()) {
      throw ConfigError("no decisions files in " + cfg.output_dir.string() + " (run `rewrite` first)");
    }
  }
  std::set<std::string> names;
  for (const auto& s : systems) {
    if (!names.insert(s.name).second) throw ConfigError("duplicate system name '" + s.name + "'");
  }

  const GoldMap golds = load_golds(cfg);
  auto embedder = make_embedder(cfg.eval_embedder);
  std::unique_ptr<TextQA> qa;
  std::vector<GradeRecord> grades;
  if (std::filesystem::exists(cfg.grades_path)) grades = read_grades(cfg.grades_path);

  std::vector<ReportRow> rows;
  for (const auto& s : systems) {
    std::vector<AnswerPrediction> preds;
    if (!s.decisions.empty()) {
      if (!std::filesystem::exists(s.decisions)) {
        throw ConfigError("decisions file for '" + s.name + "' not found: " + s.decisions.string());
      }
      if (!qa) qa = make_qa(cfg.qa);
      preds = answer_dataset(read_decisions(s.decisions), *qa, s.name);
    } else {
      preds = read_predictions(s.predictions);
      for (auto& p : preds) p.system = s.name;
    }
    std::filesystem::create_directories(cfg.output_dir);
    write_predictions(predictions_path(cfg, s.name), preds);

    ReportRow row;
    row.system = s.name;
    row.section = s.section.value_or(default_section(s.name));
    row.train_data = s.train_data;
    row.em = exact_match(preds, golds);
    row.bs = bert_similarity(preds, golds, *embedder, cfg.bs_aggregation);
    row.he = human_eval_score(grades, s.name);
    rows.push_back(std::move(row));
  }
  if (cfg.include_published_rows) {
    for (auto& r : published_reference_rows()) rows.push_back(std::move(r));
  }

  EvaluationReport report = build_report(std::move(rows));
  echo_config(cfg);
  {
    std::ofstream json_out(cfg.output_dir / "report.json", std::ios::binary | std::ios::trunc);
    json_out << report.to_json().dump(2) << '\n';
    std::ofstream text_out(cfg.output_dir / "report.txt", std::ios::binary | std::ios::trunc);
    text_out << report.render_text();
  }
  out << report.render_text();
  return report;
}

}  // namespace rewriteqa
