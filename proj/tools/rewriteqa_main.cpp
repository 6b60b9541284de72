// rewriteqa: prepare / rewrite / train / eval / serve.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rewriteqa/commands.h"
#include "rewriteqa/config.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/grading_service.h"

using nlohmann::json;
using namespace rewriteqa;

int main(int argc, char** argv) {
  CLI::App app{"Question rewriting for knowledge-based visual question answering"};
  app.require_subcommand(1);

  std::string config_path = "config.json";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  app.add_option("-c,--config", config_path, "JSON config file")->capture_default_str();
  app.add_option("--seed", seed, "Global seed (overrides the config)");
  app.add_option("-o,--output-dir", output_dir, "Output directory (overrides the config)");

  auto* prepare = app.add_subcommand("prepare", "Filter the raw dataset into train/test splits");

  auto* rewrite = app.add_subcommand("rewrite", "Rewrite the questions of the configured split");
  std::string mode_name = "agnostic";
  rewrite->add_option("--mode", mode_name, "Rewriting mode")
      ->check(CLI::IsMember({"agnostic", "aware", "concat", "passthrough"}))
      ->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train the model-aware rewriter");
  std::optional<int> steps;
  bool resume = false;
  train_cmd->add_option("--steps", steps, "Total optimisation steps");
  train_cmd->add_flag("--resume", resume, "Continue from the latest checkpoint");

  auto* eval = app.add_subcommand("eval", "Answer, score and report every system");

  auto* serve = app.add_subcommand("serve", "Serve the human-grading API");
  std::optional<int> port;
  std::optional<std::string> host;
  serve->add_option("--port", port, "Port to listen on (0 picks a free one)");
  serve->add_option("--host", host, "Address to bind");

  CLI11_PARSE(app, argc, argv);

  try {
    json overrides = json::object();
    if (seed) overrides["seed"] = *seed;
    if (output_dir) overrides["output_dir"] = *output_dir;
    if (steps) overrides["training"]["total_steps"] = *steps;
    if (port) overrides["serve"]["port"] = *port;
    if (host) overrides["serve"]["host"] = *host;
    const PipelineConfig cfg = load_config(config_path, overrides);

    if (*prepare) {
      cmd_prepare(cfg, std::cout);
    } else if (*rewrite) {
      cmd_rewrite(cfg, parse_rewrite_mode(mode_name), std::cout);
    } else if (*train_cmd) {
      cmd_train(cfg, resume, std::cout);
    } else if (*eval) {
      cmd_eval(cfg, std::cout);
    } else if (*serve) {
      auto service = make_grading_service(cfg);
      std::cout << "grading service on http://" << cfg.host << ":" << cfg.port << std::endl;
      service->run(cfg.host, cfg.port);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
