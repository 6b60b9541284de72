#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rewriteqa/aware_rewriter.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/loglinear_rewriter.h"
#include "rewriteqa/reference_backends.h"
#include "test_util.h"

using namespace rewriteqa;

namespace {

// One-hot embedder over a fixed answer list, so cosines are exactly 0 or 1.
class OneHotEmbedder : public AnswerEmbedder {
 public:
  explicit OneHotEmbedder(std::vector<std::string> answers) : answers_(std::move(answers)) {}
  int dimension() const override { return static_cast<int>(answers_.size()) + 1; }
  std::vector<double> embed(std::string_view text) const override {
    std::vector<double> v(answers_.size() + 1, 0.0);
    auto it = std::find(answers_.begin(), answers_.end(), text);
    v[static_cast<std::size_t>(it - answers_.begin())] = 1.0;
    return v;
  }

 private:
  std::vector<std::string> answers_;
};

struct FixtureStack {
  NgramTableScorer scorer = NgramTableScorer::from_file(testutil::fixture("ngram_table.tsv"));
  LookupQA qa = LookupQA::from_file(testutil::fixture("qa_table.tsv"));
  HashEmbedder embedder{256};
  std::vector<VisualQuestion> train = read_questions(testutil::fixture("train_questions.jsonl"));
  Backends backends() const { return Backends{scorer, qa, embedder}; }
  LogLinearRewriter rewriter() const {
    return LogLinearRewriter(LogLinearRewriter::vocabulary_for(train));
  }
};

RewardedLot lot(int rank, double avg) {
  RewardedLot l;
  l.entity = {"e" + std::to_string(rank), EntitySource::kObject, rank};
  l.candidates = {{"x", "y", avg}};
  l.average_reward = avg;
  return l;
}

}  // namespace

TEST_CASE("lot rewards are cosines averaged arithmetically") {
  LookupQA qa;
  qa.add("right", "leaves");
  qa.add("wrong", "meat");
  OneHotEmbedder emb({"leaves", "meat", "grass"});
  const std::vector<std::string> lot_texts = {"right", "wrong"};
  const std::vector<std::string> golds = {"grass", "leaves"};
  const auto r = compute_lot_reward(lot_texts, golds, qa, emb, RewardAggregation::kMaxOverGolds);
  REQUIRE(r.candidates.size() == 2);
  CHECK(r.candidates[0].predicted_answer == "leaves");
  CHECK(r.candidates[0].reward == 1.0);
  CHECK(r.candidates[1].reward == 0.0);
  CHECK(r.average_reward == 0.5);

  const auto first = compute_lot_reward(lot_texts, golds, qa, emb, RewardAggregation::kFirstGold);
  CHECK(first.candidates[0].reward == 0.0);  // only "grass" counts

  CHECK_THROWS_AS(compute_lot_reward({}, golds, qa, emb, RewardAggregation::kMaxOverGolds),
                  PreconditionError);
}

TEST_CASE("degenerate rewrite is rewarded below the correct one") {
  FixtureStack s;
  const std::vector<std::string> golds = {"15 feet"};
  const std::vector<std::string> good = {"how tall is giraffe on average"};
  const std::vector<std::string> bad = {"how stone this animal on average"};
  const auto g = compute_lot_reward(good, golds, s.qa, s.embedder, RewardAggregation::kMaxOverGolds);
  const auto b = compute_lot_reward(bad, golds, s.qa, s.embedder, RewardAggregation::kMaxOverGolds);
  CHECK(g.average_reward == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(b.average_reward < g.average_reward);
}

TEST_CASE("select_lot: argmax, rank tie-break, empty lots skipped") {
  std::vector<RewardedLot> lots = {lot(2, 0.5), lot(1, 0.5), lot(3, 0.2)};
  CHECK(select_lot(lots).entity.rank == 1);
  lots[2].average_reward = 0.9;
  CHECK(select_lot(lots).entity.rank == 3);
  lots[2].candidates.clear();
  CHECK(select_lot(lots).entity.rank == 1);
  std::vector<RewardedLot> empty = {RewardedLot{}};
  CHECK_THROWS_AS(select_lot(empty), NoCandidatesError);
}

TEST_CASE("edit penalty is smallest for zero-edit rewrites") {
  const std::string in = "what do these animals eat . zebras . tree";
  const double same = edit_penalty(in, in);
  CHECK(same < edit_penalty(in, "what do zebras eat"));
  CHECK(same < edit_penalty(in, "eat"));
  CHECK(same < edit_penalty(in, "giraffe giraffe giraffe"));
  CHECK(edit_penalty("", "x") == 0.0);
}

TEST_CASE("edit penalty matches a hand computation") {
  // input {a:1/2, b:1/2}; candidate "a c": support {a,b,c}, denom 2 + 1.5.
  const double pa = 1.5 / 3.5, pb = 0.5 / 3.5;
  CHECK(edit_penalty("a b", "a c") == doctest::Approx(-0.5 * std::log(pa) - 0.5 * std::log(pb)));
}

TEST_CASE("train_step weights follow the centered reward formula") {
  FixtureStack s;
  auto rw = s.rewriter();
  TrainingConfig cfg;
  cfg.edit_penalty_weight = 0.3;
  ExplorationConfig ecfg{2, 2, 2, 0};
  std::vector<QuestionUpdate> ups;
  const std::vector<VisualQuestion> batch(s.train.begin(), s.train.begin() + 3);
  const auto report = train_step(batch, rw, s.backends(), cfg, ecfg, {}, &ups);
  REQUIRE(report.questions_used == 3);
  REQUIRE(ups.size() == 3);
  double mean = 0;
  for (const auto& u : ups) mean += u.winner.average_reward;
  mean /= 3;
  CHECK(report.mean_reward == doctest::Approx(mean));
  for (const auto& u : ups) {
    const double n = static_cast<double>(u.winner.candidates.size());
    REQUIRE(u.candidates.size() == u.winner.candidates.size());
    double pen_mean = 0;
    for (const auto& c : u.winner.candidates) pen_mean += edit_penalty(u.input_text, c.text);
    pen_mean /= n;
    CHECK(u.mean_edit_penalty == doctest::Approx(pen_mean));
    for (std::size_t i = 0; i < u.candidates.size(); ++i) {
      const double pen = edit_penalty(u.input_text, u.winner.candidates[i].text);
      const double expect = ((u.winner.candidates[i].reward - mean) - 0.3 * (pen - pen_mean)) / n;
      CHECK(u.candidates[i].weight == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("batch-mean weights sum to zero over equal-size lots") {
  FixtureStack s;
  auto rw = s.rewriter();
  std::vector<QuestionUpdate> ups;
  const std::vector<VisualQuestion> batch(s.train.begin(), s.train.begin() + 4);
  train_step(batch, rw, s.backends(), TrainingConfig{}, ExplorationConfig{2, 2, 2, 0}, {}, &ups);
  std::set<std::size_t> sizes;
  double sum = 0;
  for (const auto& u : ups) {
    sizes.insert(u.candidates.size());
    for (const auto& c : u.candidates) sum += c.weight;
  }
  REQUIRE(sizes.size() == 1);
  CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("zero training steps leave the rewriter at initialization") {
  FixtureStack s;
  auto rw = s.rewriter();
  const std::string init = rw.snapshot();
  TrainingConfig cfg;
  cfg.total_steps = 0;
  const auto st = train(s.train, rw, s.backends(), cfg, ExplorationConfig{2, 2, 2, 0}, {}, TrainOptions{});
  CHECK(st.step == 0);
  CHECK(rw.snapshot() == init);
}

TEST_CASE("equal rewards with zero lambda leave the rewriter unchanged") {
  FixtureStack s;
  auto rw = s.rewriter();
  const std::vector<double> before(rw.parameters().begin(), rw.parameters().end());
  // Every answer embeds identically, so all rewards equal the baseline.
  class Constant : public AnswerEmbedder {
   public:
    int dimension() const override { return 2; }
    std::vector<double> embed(std::string_view) const override { return {1.0, 0.0}; }
  } constant;
  TrainingConfig cfg;
  cfg.edit_penalty_weight = 0.0;
  const std::vector<VisualQuestion> batch(s.train.begin(), s.train.begin() + 4);
  train_step(batch, rw, Backends{s.scorer, s.qa, constant}, cfg, ExplorationConfig{2, 2, 2, 0});
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(rw.parameters()[i] == before[i]);
}

TEST_CASE("loss includes the lambda-weighted edit penalty") {
  FixtureStack s;
  const std::vector<VisualQuestion> batch(s.train.begin(), s.train.begin() + 2);
  TrainingConfig c0, c1;
  c0.edit_penalty_weight = 0.0;
  c1.edit_penalty_weight = 1.0;
  auto r0 = s.rewriter();
  auto r1 = s.rewriter();
  std::vector<QuestionUpdate> u1;
  const auto a = train_step(batch, r0, s.backends(), c0, ExplorationConfig{2, 2, 2, 0});
  const auto b = train_step(batch, r1, s.backends(), c1, ExplorationConfig{2, 2, 2, 0}, {}, &u1);
  double mean_pen = 0;
  for (const auto& u : u1) mean_pen += u.mean_edit_penalty;
  mean_pen /= static_cast<double>(u1.size());
  CHECK(mean_pen > 0);
  // Centered penalties move weights but not the batch-mean reward term.
  CHECK(b.mean_reward == a.mean_reward);
  CHECK(b.loss > a.loss);
}

TEST_CASE("questions without entities are skipped") {
  FixtureStack s;
  auto rw = s.rewriter();
  std::vector<VisualQuestion> batch = {s.train[0], s.train[1]};
  batch[1].entities.clear();
  const auto r = train_step(batch, rw, s.backends(), TrainingConfig{}, ExplorationConfig{2, 2, 2, 0});
  CHECK(r.questions_used == 1);
}

TEST_CASE("batch sampler covers each epoch and restores its state") {
  BatchSampler a(10, 4, 42);
  std::multiset<std::size_t> seen;
  for (int i = 0; i < 2; ++i)
    for (auto x : a.next()) seen.insert(x);
  CHECK(seen.size() == 8);
  CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 8);
  BatchSampler b = BatchSampler::deserialize(a.serialize());
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  BatchSampler c(10, 4, 42), d(10, 4, 43);
  bool differ = false;
  for (int i = 0; i < 5; ++i) differ |= c.next() != d.next();
  CHECK(differ);
  CHECK_THROWS_AS(BatchSampler::deserialize("{}"), ParseError);
}

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainState run(const FixtureStack& s, const std::filesystem::path& dir, int steps,
               std::optional<TrainState> resume = std::nullopt, const std::string& hash = "h1") {
  auto rw = s.rewriter();
  TrainingConfig cfg;
  cfg.batch_size = 3;
  cfg.total_steps = steps;
  cfg.checkpoint_every = 4;
  cfg.seed = 9;
  TrainOptions opts;
  opts.checkpoint_dir = dir / "ckpt";
  opts.metrics_path = dir / "metrics.jsonl";
  opts.config_hash = hash;
  opts.resume_from = std::move(resume);
  return train(s.train, rw, s.backends(), cfg, ExplorationConfig{2, 2, 2, 9}, {}, opts);
}

}  // namespace

TEST_CASE("training is reproducible and resumes bit-exactly") {
  FixtureStack s;
  testutil::TempDir a, b, c;
  const auto full = run(s, a.path(), 10);
  run(s, b.path(), 10);
  CHECK(slurp(a / "metrics.jsonl") == slurp(b / "metrics.jsonl"));

  run(s, c.path(), 6);  // checkpoints at 4 and the final step 6
  std::filesystem::remove_all(c / "ckpt/step_000006");
  std::ofstream(c / "ckpt/latest") << "step_000004\n";
  const auto from = load_checkpoint(c / "ckpt", "h1");
  CHECK(from.step == 4);
  const auto resumed = run(s, c.path(), 10, from);
  CHECK(resumed.rewriter_snapshot == full.rewriter_snapshot);
  CHECK(slurp(c / "metrics.jsonl") == slurp(a / "metrics.jsonl"));
  CHECK(latest_checkpoint(a / "ckpt").filename() == "step_000010");

  CHECK_THROWS_AS(load_checkpoint(a / "ckpt", "other"), ConfigMismatchError);
  CHECK_THROWS_AS(load_checkpoint(a / "nowhere", ""), ConfigError);
}

TEST_CASE("rewrite_aware emits the first beam of the concatenated input") {
  FixtureStack s;
  const auto rw = s.rewriter();
  const auto d = rewrite_aware(s.train[1], rw);
  CHECK(d.mode == RewriteMode::kAware);
  CHECK(d.chosen.text == rw.generate({build_concat_input(s.train[1]), 1, 5, 0}).front());
  CHECK(rewrite_aware(s.train[1], IdentityRewriter{}).chosen.text == build_concat_input(s.train[1]));
}

TEST_CASE("config validation") {
  ExplorationConfig e{1, 3, 2, 0};
  CHECK_THROWS_AS(e.validate(), ConfigError);
  TrainingConfig t;
  t.batch_size = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  CHECK(parse_baseline("none") == Baseline::kNone);
  CHECK_THROWS_AS(parse_reward_aggregation("median"), ConfigError);
}
