#include "rewriteqa/config.h"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rewriteqa/errors.h"
#include "rewriteqa/reference_backends.h"

extern char** environ;

namespace rewriteqa {
namespace {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

const json& section(const json& j, const char* key) {
  static const json kEmpty = json::object();
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return kEmpty;
  if (!it->is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
  return *it;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

BackendSpec parse_backend(const json& j, const std::filesystem::path& base, const char* name) {
  BackendSpec b;
  b.kind = get_or<std::string>(j, "type", "reference");
  b.path = resolve(base, get_or<std::string>(j, "path", ""));
  b.unk_logprob = get_or<double>(j, "unk_logprob", b.unk_logprob);
  b.dimension = get_or<int>(j, "dim", b.dimension);
  b.max_positions = get_or<int>(j, "max_positions", b.max_positions);
  b.max_extra_tokens = get_or<int>(j, "max_extra_tokens", b.max_extra_tokens);
  b.copy_follow_init = get_or<double>(j, "copy_follow_init", b.copy_follow_init);
  b.copy_any_init = get_or<double>(j, "copy_any_init", b.copy_any_init);
  if (b.kind == "remote") {
    RemoteEndpoint e;
    e.url = get_or<std::string>(j, "url", "");
    e.timeout_ms = get_or<int>(j, "timeout_ms", e.timeout_ms);
    e.retries = get_or<int>(j, "retries", e.retries);
    try {
      e.validate();
    } catch (const ConfigError& err) {
      throw ConfigError(std::string("backends.") + name + ": " + err.what());
    }
    b.remote = e;
  } else if (b.kind != "reference") {
    throw ConfigError(std::string("backends.") + name + ".type must be 'reference' or 'remote'");
  }
  return b;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::map<std::string, std::string> rewriteqa_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    if (kv.rfind("REWRITEQA_", 0) != 0) continue;
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

void apply_env_overrides(json& raw, const std::map<std::string, std::string>& env) {
  static const std::string kPrefix = "REWRITEQA_";
  for (const auto& [name, value] : env) {
    if (name.rfind(kPrefix, 0) != 0 || name.size() == kPrefix.size()) continue;
    std::string path = lower(name.substr(kPrefix.size()));
    json* node = &raw;
    std::size_t pos = 0;
    while (true) {
      auto sep = path.find("__", pos);
      std::string key = path.substr(pos, sep == std::string::npos ? std::string::npos : sep - pos);
      if (!node->is_object()) *node = json::object();
      if (sep == std::string::npos) {
        json parsed = json::parse(value, nullptr, false);
        (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
        break;
      }
      node = &(*node)[key];
      pos = sep + 2;
    }
  }
}

PipelineConfig parse_config(const json& raw, const std::filesystem::path& base) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  c.effective = raw;
  c.seed = get_or<std::uint64_t>(raw, "seed", 0);

  const json& data = section(raw, "dataset");
  c.dataset = resolve(base, get_or<std::string>(data, "input", ""));
  c.output_dir = resolve(base, get_or<std::string>(raw, "output_dir", "out"));
  c.train_path = resolve(base, get_or<std::string>(data, "train", ""));
  c.test_path = resolve(base, get_or<std::string>(data, "test", ""));
  if (c.train_path.empty()) c.train_path = c.output_dir / "train.jsonl";
  if (c.test_path.empty()) c.test_path = c.output_dir / "test.jsonl";
  c.rewrite_split = get_or<std::string>(data, "rewrite_split", "test");
  if (c.rewrite_split != "train" && c.rewrite_split != "test") {
    throw ConfigError("dataset.rewrite_split must be 'train' or 'test'");
  }

  const json& filter = section(raw, "filter");
  c.filter.keep_question_type = get_or<std::string>(filter, "keep_question_type", c.filter.keep_question_type);
  c.filter.spatial_keywords = get_or<std::vector<std::string>>(filter, "spatial_keywords", c.filter.spatial_keywords);
  c.filter.top_e = get_or<int>(filter, "top_e", c.filter.top_e);
  c.filter.validate();

  const json& cand = section(raw, "candidates");
  c.candidates.n_max = get_or<int>(cand, "n_max", c.candidates.n_max);
  c.candidates.length_normalize = get_or<bool>(cand, "length_normalize", c.candidates.length_normalize);
  c.candidates.min_surviving_tokens = get_or<int>(cand, "min_surviving_tokens", c.candidates.min_surviving_tokens);
  c.candidates.validate();

  const json& ex = section(raw, "exploration");
  c.exploration.t = get_or<int>(ex, "t", c.exploration.t);
  c.exploration.k = get_or<int>(ex, "k", c.exploration.k);
  c.exploration.beam_width = get_or<int>(ex, "beam_width", c.exploration.beam_width);
  c.exploration.seed = get_or<std::uint64_t>(ex, "seed", c.seed);
  c.exploration.validate();

  const json& tr = section(raw, "training");
  c.training.batch_size = get_or<int>(tr, "batch_size", c.training.batch_size);
  c.training.total_steps = get_or<int>(tr, "total_steps", c.training.total_steps);
  c.training.learning_rate = get_or<double>(tr, "learning_rate", c.training.learning_rate);
  c.training.edit_penalty_weight = get_or<double>(tr, "edit_penalty_weight", c.training.edit_penalty_weight);
  c.training.baseline = parse_baseline(get_or<std::string>(tr, "baseline", to_string(c.training.baseline)));
  c.training.aggregation = parse_reward_aggregation(
      get_or<std::string>(tr, "reward_aggregation", to_string(c.training.aggregation)));
  c.training.seed = get_or<std::uint64_t>(tr, "seed", c.seed);
  c.training.checkpoint_every = get_or<int>(tr, "checkpoint_every", c.training.checkpoint_every);
  c.training.warmup_steps = get_or<int>(tr, "warmup_steps", c.training.warmup_steps);
  c.training.validate();
  c.checkpoint_dir = resolve(base, get_or<std::string>(tr, "checkpoint_dir", ""));
  if (c.checkpoint_dir.empty()) c.checkpoint_dir = c.output_dir / "checkpoints";

  const json& be = section(raw, "backends");
  c.scorer = parse_backend(section(be, "scorer"), base, "scorer");
  c.qa = parse_backend(section(be, "qa"), base, "qa");
  c.reward_embedder = parse_backend(section(be, "reward_embedder"), base, "reward_embedder");
  c.eval_embedder = parse_backend(section(be, "eval_embedder"), base, "eval_embedder");
  c.rewriter = parse_backend(section(be, "rewriter"), base, "rewriter");

  const json& ev = section(raw, "eval");
  const std::string bs = get_or<std::string>(ev, "bs_aggregation", "max");
  if (bs == "max") {
    c.bs_aggregation = SimilarityAggregation::kMax;
  } else if (bs == "mean") {
    c.bs_aggregation = SimilarityAggregation::kMean;
  } else {
    throw ConfigError("eval.bs_aggregation must be 'max' or 'mean'");
  }
  c.include_published_rows = get_or<bool>(ev, "include_published_rows", true);
  if (auto it = ev.find("systems"); it != ev.end()) {
    if (!it->is_array()) throw ConfigError("eval.systems must be an array");
    for (const auto& s : *it) {
      SystemSpec sys;
      sys.name = get_or<std::string>(s, "name", "");
      if (sys.name.empty()) throw ConfigError("eval.systems entries need a name");
      sys.decisions = resolve(base, get_or<std::string>(s, "decisions", ""));
      sys.predictions = resolve(base, get_or<std::string>(s, "predictions", ""));
      if (sys.decisions.empty() == sys.predictions.empty()) {
        throw ConfigError("system '" + sys.name + "' needs exactly one of decisions/predictions");
      }
      if (s.contains("section")) sys.section = parse_report_section(s["section"].get<std::string>());
      if (s.contains("train_data") && !s["train_data"].is_null()) sys.train_data = s["train_data"].get<int>();
      c.systems.push_back(std::move(sys));
    }
  }
  c.grades_path = resolve(base, get_or<std::string>(ev, "grades", ""));
  if (c.grades_path.empty()) c.grades_path = c.output_dir / "grades.jsonl";

  const json& sv = section(raw, "serve");
  c.images_dir = resolve(base, get_or<std::string>(sv, "images_dir", ""));
  c.static_dir = resolve(base, get_or<std::string>(sv, "static_dir", ""));
  c.host = get_or<std::string>(sv, "host", c.host);
  c.port = get_or<int>(sv, "port", c.port);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const json& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json raw = json::parse(ss.str(), nullptr, false, /*ignore_comments=*/true);
  if (raw.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  apply_env_overrides(raw, rewriteqa_environment());
  if (!overrides.is_null()) raw.merge_patch(overrides);
  return parse_config(raw, path.parent_path());
}

std::string PipelineConfig::training_hash() const {
  json j = effective;
  j.erase("output_dir");
  j.erase("eval");
  j.erase("serve");
  if (j.contains("training") && j["training"].is_object()) {
    j["training"].erase("total_steps");
    j["training"].erase("checkpoint_every");
    j["training"].erase("checkpoint_dir");
  }
  return hex64(fnv1a64(j.dump()));
}

std::string PipelineConfig::hash() const { return hex64(fnv1a64(effective.dump())); }

void echo_config(const PipelineConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir / "config.json", std::ios::binary | std::ios::trunc);
  out << json{{"hash", cfg.hash()}, {"config", cfg.effective}}.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (cfg.output_dir / "config.json").string());
}

}  // namespace rewriteqa
