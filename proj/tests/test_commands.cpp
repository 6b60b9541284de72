#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rewriteqa/commands.h"
#include "rewriteqa/errors.h"
#include "test_util.h"

using namespace rewriteqa;

TEST_CASE("prepare, rewrite, train and eval on the fixture corpus") {
  testutil::TempDir dir;
  const auto cfg = load_config(testutil::write_fixture_config(dir.path()));
  std::ostringstream out;

  cmd_prepare(cfg, out);
  CHECK(out.str() == "train=10 test=3\n");
  CHECK(read_questions(cfg.test_path).size() == 3);

  CHECK_THROWS_AS(cmd_rewrite(cfg, RewriteMode::kAware, out), ConfigError);

  const auto agnostic = read_decisions(cmd_rewrite(cfg, RewriteMode::kAgnostic, out));
  REQUIRE(agnostic.size() == 3);
  CHECK(agnostic[0].chosen.text == "how tall is giraffe on average");
  CHECK(agnostic[1].chosen.text == "what do zebras eat");
  CHECK(agnostic[2].chosen.text ==
        "what famous founding father was known for his association with kite");
  cmd_rewrite(cfg, RewriteMode::kConcat, out);

  const auto state = cmd_train(cfg, false, out);
  CHECK(state.step == 6);
  CHECK(std::filesystem::exists(cfg.output_dir / "metrics.jsonl"));
  CHECK(latest_checkpoint(cfg.checkpoint_dir).filename() == "step_000006");
  CHECK(std::filesystem::exists(cfg.output_dir / "config.json"));

  // A different training config must not resume from this checkpoint.
  const auto other = load_config(testutil::write_fixture_config(
      dir.path(), {{"training", {{"learning_rate", 0.5}, {"total_steps", 8}}}}));
  CHECK_THROWS_AS(cmd_train(other, true, out), ConfigMismatchError);
  const auto longer = load_config(
      testutil::write_fixture_config(dir.path(), {{"training", {{"total_steps", 8}}}}));
  CHECK(cmd_train(longer, true, out).step == 8);

  const auto aware = read_decisions(cmd_rewrite(cfg, RewriteMode::kAware, out));
  CHECK(aware.size() == 3);

  std::ostringstream report_text;
  const auto report = cmd_eval(cfg, report_text);
  const auto row = [&](const std::string& name) {
    for (const auto& r : report.rows)
      if (r.system == name && !r.published) return r;
    FAIL("no row " << name);
    return report.rows.front();
  };
  CHECK(row("agnostic").em == 1.0);
  CHECK(row("agnostic").bs == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(row("concat").em == 0.0);  // the lookup QA only knows rewritten questions
  CHECK(row("aware").section == ReportSection::kOurMethods);
  CHECK(std::filesystem::exists(cfg.output_dir / "report.json"));
  CHECK(std::filesystem::exists(cfg.output_dir / "predictions_agnostic.jsonl"));
  CHECK(report_text.str().find("Model Agnostic *") != std::string::npos);
}

TEST_CASE("commands report missing inputs") {
  testutil::TempDir dir;
  const auto cfg = load_config(testutil::write_fixture_config(dir.path()));
  std::ostringstream out;
  CHECK_THROWS_AS(cmd_rewrite(cfg, RewriteMode::kAgnostic, out), ConfigError);
  CHECK_THROWS_AS(cmd_train(cfg, false, out), ConfigError);
  cmd_prepare(cfg, out);
  CHECK_THROWS_AS(cmd_eval(cfg, out), ConfigError);
  const auto no_data = load_config(testutil::write_fixture_config(dir.path(), {{"dataset", {{"input", ""}}}}));
  CHECK_THROWS_AS(cmd_prepare(no_data, out), ConfigError);
}
