#include "rewriteqa/aware_rewriter.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rewriteqa/errors.h"
#include "rewriteqa/text.h"

namespace rewriteqa {

using nlohmann::json;

void ExplorationConfig::validate() const {
  if (t < 1) throw ConfigError("exploration.t must be >= 1");
  if (k < 1) throw ConfigError("exploration.k must be >= 1");
  if (beam_width < k) throw ConfigError("exploration.k must not exceed exploration.beam_width");
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  if (total_steps < 0) throw ConfigError("training.total_steps must be >= 0");
  if (!(learning_rate > 0)) throw ConfigError("training.learning_rate must be > 0");
  if (edit_penalty_weight < 0) throw ConfigError("training.edit_penalty_weight must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("training.checkpoint_every must be >= 1");
  if (warmup_steps < 0) throw ConfigError("training.warmup_steps must be >= 0");
}

const char* to_string(RewardAggregation a) {
  return a == RewardAggregation::kMaxOverGolds ? "max_over_golds" : "first_gold";
}
const char* to_string(Baseline b) { return b == Baseline::kNone ? "none" : "batch_mean"; }

RewardAggregation parse_reward_aggregation(const std::string& name) {
  if (name == "max_over_golds") return RewardAggregation::kMaxOverGolds;
  if (name == "first_gold") return RewardAggregation::kFirstGold;
  throw ConfigError("unknown reward aggregation '" + name + "'");
}

Baseline parse_baseline(const std::string& name) {
  if (name == "none") return Baseline::kNone;
  if (name == "batch_mean") return Baseline::kBatchMean;
  throw ConfigError("unknown baseline '" + name + "'");
}

// --- exploration ------------------------------------------------------------

std::vector<EntityExploration> explore(const VisualQuestion& question,
                                       const LanguageModelScorer& scorer,
                                       const Seq2SeqRewriter& rewriter,
                                       const ExplorationConfig& cfg,
                                       const CandidateGenConfig& gen) {
  cfg.validate();
  if (question.entities.empty()) {
    throw PreconditionError(question.question_id + ": question has no entities");
  }
  std::vector<EntityExploration> out;
  for (const auto& entity : question.entities) {
    EntityExploration ex;
    ex.entity = entity;
    auto cands = enumerate_candidates(question, gen, &entity);
    if (!cands.empty()) {
      cands = rank_candidates(std::move(cands), scorer, gen);
      if (cands.size() > static_cast<std::size_t>(cfg.t)) cands.resize(static_cast<std::size_t>(cfg.t));
      ex.temporary_rewrites = std::move(cands);
    }
    for (const auto& tmp : ex.temporary_rewrites) {
      GenerationRequest req{tmp.text, cfg.k, cfg.beam_width, cfg.seed};
      auto generated = rewriter.generate(req);
      if (generated.size() > static_cast<std::size_t>(cfg.k)) generated.resize(static_cast<std::size_t>(cfg.k));
      for (auto& g : generated) ex.lot_texts.push_back(std::move(g));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// --- reward -----------------------------------------------------------------

RewardedLot compute_lot_reward(std::span<const std::string> lot_texts,
                               std::span<const std::string> gold_answers, const TextQA& qa,
                               const AnswerEmbedder& embedder, RewardAggregation aggregation) {
  if (lot_texts.empty()) throw PreconditionError("cannot reward an empty lot");
  if (gold_answers.empty()) throw PreconditionError("reward needs at least one gold answer");

  auto checked_embed = [&](std::string_view text) {
    auto v = embedder.embed(text);
    if (v.size() != static_cast<std::size_t>(embedder.dimension())) {
      throw ConfigError("embedder returned dimension " + std::to_string(v.size()) +
                        ", configured " + std::to_string(embedder.dimension()));
    }
    return v;
  };
  std::vector<std::vector<double>> gold_vecs;
  const std::size_t n_golds = aggregation == RewardAggregation::kFirstGold ? 1 : gold_answers.size();
  for (std::size_t g = 0; g < n_golds; ++g) gold_vecs.push_back(checked_embed(gold_answers[g]));

  RewardedLot lot;
  double sum = 0.0;
  for (const auto& text : lot_texts) {
    ScoredRewrite s;
    s.text = text;
    try {
      s.predicted_answer = qa.answer(text);
    } catch (const Error& e) {
      throw BackendError("QA failed on '" + text + "': " + e.what());
    }
    const auto pred = checked_embed(s.predicted_answer);
    double best = -1.0;
    for (const auto& gv : gold_vecs) best = std::max(best, cosine(gv, pred));
    s.reward = best;
    sum += best;
    lot.candidates.push_back(std::move(s));
  }
  lot.average_reward = sum / static_cast<double>(lot.candidates.size());
  return lot;
}

const RewardedLot& select_lot(std::span<const RewardedLot> lots) {
  const RewardedLot* best = nullptr;
  for (const auto& lot : lots) {
    if (lot.candidates.empty()) continue;
    if (!best || lot.average_reward > best->average_reward ||
        (lot.average_reward == best->average_reward && lot.entity.rank < best->entity.rank)) {
      best = &lot;
    }
  }
  if (!best) throw NoCandidatesError("every candidate lot is empty");
  return *best;
}

double edit_penalty(std::string_view input_text, std::string_view candidate_text) {
  constexpr double kSmoothing = 0.5;
  const Tokens input = tokenize(input_text);
  const Tokens cand = tokenize(candidate_text);
  if (input.empty()) return 0.0;
  std::map<std::string, double> in_counts, cand_counts;
  for (const auto& t : input) in_counts[t] += 1;
  for (const auto& t : cand) cand_counts[t] += 1;
  std::set<std::string> support;
  for (const auto& [t, _] : in_counts) support.insert(t);
  for (const auto& [t, _] : cand_counts) support.insert(t);
  const double denom = static_cast<double>(cand.size()) + kSmoothing * static_cast<double>(support.size());
  double h = 0.0;
  for (const auto& [t, c] : in_counts) {
    const double q = c / static_cast<double>(input.size());
    const auto it = cand_counts.find(t);
    const double p = ((it == cand_counts.end() ? 0.0 : it->second) + kSmoothing) / denom;
    h -= q * std::log(p);
  }
  return h;
}

// --- optimization -----------------------------------------------------------

StepReport train_step(std::span<const VisualQuestion> batch, TrainableRewriter& rewriter,
                      const Backends& backends, const TrainingConfig& cfg,
                      const ExplorationConfig& ecfg, const CandidateGenConfig& gen,
                      std::vector<QuestionUpdate>* updates) {
  if (batch.empty()) throw PreconditionError("train_step needs a non-empty batch");

  std::vector<QuestionUpdate> plan;
  for (const auto& q : batch) {
    if (q.entities.empty()) continue;
    try {
      std::vector<RewardedLot> lots;
      for (auto& ex : explore(q, backends.scorer, rewriter, ecfg, gen)) {
        RewardedLot lot;
        if (!ex.lot_texts.empty()) {
          lot = compute_lot_reward(ex.lot_texts, q.gold_answers, backends.qa, backends.embedder,
                                   cfg.aggregation);
        }
        lot.entity = ex.entity;
        lots.push_back(std::move(lot));
      }
      QuestionUpdate u;
      u.question_id = q.question_id;
      u.input_text = build_concat_input(q);
      u.winner = select_lot(lots);
      plan.push_back(std::move(u));
    } catch (const NoCandidatesError&) {
      continue;
    } catch (const BackendError& e) {
      throw BackendError(q.question_id + ": " + e.what());
    }
  }

  StepReport report;
  if (plan.empty()) return report;

  double baseline = 0.0;
  for (const auto& u : plan) report.mean_reward += u.winner.average_reward;
  report.mean_reward /= static_cast<double>(plan.size());
  if (cfg.baseline == Baseline::kBatchMean) baseline = report.mean_reward;

  const double lambda = cfg.edit_penalty_weight;
  for (auto& u : plan) {
    const auto& members = u.winner.candidates;
    const double n = static_cast<double>(members.size());
    std::vector<double> penalties;
    for (const auto& m : members) penalties.push_back(edit_penalty(u.input_text, m.text));
    u.mean_edit_penalty = std::accumulate(penalties.begin(), penalties.end(), 0.0) / n;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const double centered_penalty = lambda == 0.0 ? 0.0 : lambda * (penalties[i] - u.mean_edit_penalty);
      u.candidates.push_back({members[i].text, ((members[i].reward - baseline) - centered_penalty) / n});
    }
    double loss;
    try {
      loss = rewriter.update(u.input_text, u.candidates);
    } catch (const BackendError& e) {
      throw BackendError(u.question_id + ": " + e.what());
    }
    report.loss += loss + lambda * u.mean_edit_penalty;
  }
  report.loss /= static_cast<double>(plan.size());
  report.questions_used = static_cast<int>(plan.size());
  if (updates) *updates = std::move(plan);
  return report;
}

void warmup(std::span<const VisualQuestion> dataset, TrainableRewriter& rewriter, int steps) {
  if (dataset.empty()) return;
  for (int s = 0; s < steps; ++s) {
    const auto& q = dataset[static_cast<std::size_t>(s) % dataset.size()];
    rewriter.update(build_concat_input(q), {{join_tokens(tokenize(q.question)), 1.0}});
  }
}

// --- batching -----------------------------------------------------------------

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(std::max<std::size_t>(1, std::min(batch_size, dataset_size))), rng_(seed) {
  if (dataset_size == 0) throw PreconditionError("cannot sample batches from an empty dataset");
  order_.resize(dataset_size);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchSampler::reshuffle() {
  // Fisher-Yates with a modulo draw: unlike std::shuffle the permutation does
  // not depend on the standard library implementation.
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng_() % i]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  if (cursor_ + batch_size_ > order_.size()) reshuffle();
  std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
  cursor_ += batch_size_;
  return out;
}

std::string BatchSampler::serialize() const {
  std::ostringstream engine;
  engine << rng_;
  return json{{"engine", engine.str()}, {"order", order_}, {"cursor", cursor_},
              {"batch_size", batch_size_}}
      .dump();
}

BatchSampler BatchSampler::deserialize(const std::string& state) {
  BatchSampler s;
  try {
    json j = json::parse(state);
    std::istringstream engine(j.at("engine").get<std::string>());
    engine >> s.rng_;
    if (!engine) throw ParseError("bad RNG engine state");
    s.order_ = j.at("order").get<std::vector<std::size_t>>();
    s.cursor_ = j.at("cursor").get<std::size_t>();
    s.batch_size_ = j.at("batch_size").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad sampler state: ") + e.what());
  }
  return s;
}

// --- training loop ------------------------------------------------------------

namespace {

std::string step_dir_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06d", step);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops metrics lines past `last_step` so a resumed run appends cleanly.
void truncate_metrics(const std::filesystem::path& path, int last_step) {
  if (!std::filesystem::exists(path)) return;
  std::ifstream in(path);
  std::string kept, line;
  while (std::getline(in, line)) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step")) continue;
    if (j["step"].get<int>() <= last_step) kept += line + "\n";
  }
  in.close();
  write_file(path, kept);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state,
                     const std::string& config_hash) {
  const auto step_dir = dir / step_dir_name(state.step);
  std::filesystem::create_directories(step_dir);
  write_file(step_dir / "rewriter.bin", state.rewriter_snapshot);
  json meta{{"step", state.step},
            {"running_mean_reward", state.running_mean_reward},
            {"config_hash", config_hash},
            {"rng_state", state.rng_state}};
  write_file(step_dir / "state.json", meta.dump(2) + "\n");
  write_file(dir / "latest", step_dir_name(state.step) + "\n");
}

std::filesystem::path latest_checkpoint(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "state.json")) return dir;
  const auto pointer = dir / "latest";
  if (!std::filesystem::exists(pointer)) {
    throw ConfigError("no checkpoint found in " + dir.string());
  }
  return dir / trim(read_file(pointer));
}

TrainState load_checkpoint(const std::filesystem::path& dir, const std::string& expected_hash) {
  const auto step_dir = latest_checkpoint(dir);
  json meta = json::parse(read_file(step_dir / "state.json"), nullptr, false);
  if (meta.is_discarded()) throw ParseError("bad checkpoint state in " + step_dir.string());
  const std::string hash = meta.value("config_hash", "");
  if (!expected_hash.empty() && hash != expected_hash) {
    throw ConfigMismatchError("checkpoint " + step_dir.string() + " was written with config " +
                              hash + ", current config is " + expected_hash);
  }
  TrainState s;
  s.step = meta.at("step").get<int>();
  s.running_mean_reward = meta.at("running_mean_reward").get<double>();
  s.rng_state = meta.at("rng_state").get<std::string>();
  s.rewriter_snapshot = read_file(step_dir / "rewriter.bin");
  return s;
}

TrainState train(std::span<const VisualQuestion> dataset, TrainableRewriter& rewriter,
                 const Backends& backends, const TrainingConfig& cfg,
                 const ExplorationConfig& ecfg, const CandidateGenConfig& gen,
                 const TrainOptions& options) {
  cfg.validate();
  ecfg.validate();
  if (dataset.empty()) throw PreconditionError("training needs a non-empty dataset");

  TrainState state;
  BatchSampler sampler(dataset.size(), static_cast<std::size_t>(cfg.batch_size), cfg.seed);
  if (options.resume_from) {
    state = *options.resume_from;
    if (state.step > cfg.total_steps) {
      throw ConfigError("checkpoint step " + std::to_string(state.step) + " exceeds total_steps");
    }
    rewriter.restore(state.rewriter_snapshot);
    sampler = BatchSampler::deserialize(state.rng_state);
    if (!options.metrics_path.empty()) truncate_metrics(options.metrics_path, state.step);
  } else {
    warmup(dataset, rewriter, cfg.warmup_steps);
    if (!options.metrics_path.empty()) write_file(options.metrics_path, "");
  }

  std::ofstream metrics;
  if (!options.metrics_path.empty()) {
    metrics.open(options.metrics_path, std::ios::binary | std::ios::app);
    if (!metrics) throw Error("cannot open metrics log " + options.metrics_path.string());
  }

  while (state.step < cfg.total_steps) {
    std::vector<VisualQuestion> batch;
    for (std::size_t i : sampler.next()) batch.push_back(dataset[i]);
    ExplorationConfig step_ecfg = ecfg;
    step_ecfg.seed = ecfg.seed + static_cast<std::uint64_t>(state.step);
    const StepReport r = train_step(batch, rewriter, backends, cfg, step_ecfg, gen);
    ++state.step;
    state.running_mean_reward +=
        (r.mean_reward - state.running_mean_reward) / static_cast<double>(state.step);

    if (metrics.is_open()) {
      json line{{"step", state.step},
                {"mean_reward", r.mean_reward},
                {"loss", r.loss},
                {"lr", cfg.learning_rate},
                {"seed", cfg.seed}};
      metrics << line.dump() << '\n';
      metrics.flush();
    }
    if (options.on_step) options.on_step(state.step, r);
    if (!options.checkpoint_dir.empty() && state.step % cfg.checkpoint_every == 0) {
      state.rewriter_snapshot = rewriter.snapshot();
      state.rng_state = sampler.serialize();
      save_checkpoint(options.checkpoint_dir, state, options.config_hash);
    }
  }

  state.rewriter_snapshot = rewriter.snapshot();
  state.rng_state = sampler.serialize();
  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(options.checkpoint_dir, state, options.config_hash);
  }
  return state;
}

// --- inference ----------------------------------------------------------------

RewriteDecision rewrite_aware(const VisualQuestion& question, const Seq2SeqRewriter& rewriter,
                              int beam_width) {
  GenerationRequest req{build_concat_input(question), 1, beam_width, 0};
  std::vector<std::string> beams;
  try {
    beams = rewriter.generate(req);
  } catch (const BackendError& e) {
    throw BackendError(question.question_id + ": " + e.what());
  }
  if (beams.empty()) throw BackendError(question.question_id + ": rewriter produced no output");
  RewriteDecision d;
  d.question_id = question.question_id;
  d.mode = RewriteMode::kAware;
  d.chosen.text = beams.front();
  d.ranked = {d.chosen};
  return d;
}

}  // namespace rewriteqa
