#include "rewriteqa/grading_service.h"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

#include "httplib.h"
#include "rewriteqa/backend_factory.h"
#include "rewriteqa/commands.h"
#include "rewriteqa/config.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/text.h"

namespace rewriteqa {

using nlohmann::json;

const std::string& grading_guidelines() {
  static const std::string kText =
      "Grading guidelines\n"
      "\n"
      "Each example shows an image, a question about it, the gold answers collected from "
      "annotators, and one answer (with the rewritten question, when there is one) per "
      "system. Mark every system's output either correct or incorrect; there is no partial "
      "credit.\n"
      "\n"
      "- Several answers can be right for one question. An answer that is missing from the "
      "gold list may still be correct; use your own judgment.\n"
      "- You may search the web for the question if you are unsure.\n"
      "- Numeric answers (calorie counts, years of invention and similar) count as correct "
      "when they fall close to the gold value, e.g. 19th century for 1890.\n"
      "\n"
      "Keyboard: c = correct, x = incorrect, n = next example, p = previous example.\n";
  return kText;
}

// --- data ---------------------------------------------------------------------

GradingData GradingData::build(const std::vector<VisualQuestion>& questions,
                               const std::vector<AnswerPrediction>& predictions) {
  GradingData d;
  std::map<std::string, std::set<std::string>> by_system;
  for (const auto& p : predictions) {
    by_system[p.system].insert(p.question_id);
    d.predictions[{p.question_id, p.system}] = p;
  }
  for (const auto& [system, _] : by_system) d.systems.push_back(system);
  for (const auto& q : questions) {
    const bool shared = !by_system.empty() &&
                        std::all_of(by_system.begin(), by_system.end(), [&](const auto& kv) {
                          return kv.second.count(q.question_id) > 0;
                        });
    if (shared) d.examples.push_back(q);
  }
  return d;
}

// --- grade log ------------------------------------------------------------------

GradeLog::GradeLog(std::filesystem::path path) : path_(std::move(path)) {
  std::vector<GradeRecord> existing;
  if (std::filesystem::exists(path_)) existing = read_grades(path_);
  for (const auto& g : existing) last_timestamp_ = std::max(last_timestamp_, g.timestamp);
  if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error("cannot open grade log " + path_.string());
  std::atomic_store(&records_, std::shared_ptr<const std::vector<GradeRecord>>(
                                   std::make_shared<std::vector<GradeRecord>>(std::move(existing))));
}

GradeRecord GradeLog::append(GradeRecord record) {
  std::lock_guard<std::mutex> lock(write_mu_);
  const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  // Strictly increasing so timestamp order equals log order.
  record.timestamp = std::max<std::int64_t>(now, last_timestamp_ + 1);
  last_timestamp_ = record.timestamp;
  out_ << json(record).dump() << '\n';
  out_.flush();
  if (!out_) throw Error("failed to persist grade to " + path_.string());
  auto next = std::make_shared<std::vector<GradeRecord>>(*std::atomic_load(&records_));
  next->push_back(record);
  std::atomic_store(&records_, std::shared_ptr<const std::vector<GradeRecord>>(std::move(next)));
  return record;
}

std::shared_ptr<const std::vector<GradeRecord>> GradeLog::snapshot() const {
  return std::atomic_load(&records_);
}

// --- service --------------------------------------------------------------------

namespace {

void reply_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Latest verdict per (question, system) for one grader.
std::map<std::pair<std::string, std::string>, GradeRecord> latest_for_grader(
    const std::vector<GradeRecord>& grades, const std::string& grader_id) {
  std::map<std::pair<std::string, std::string>, GradeRecord> out;
  for (const auto& g : grades) {
    if (g.grader_id != grader_id) continue;
    auto key = std::make_pair(g.question_id, g.system);
    auto it = out.find(key);
    if (it == out.end() || g.timestamp >= it->second.timestamp) out[key] = g;
  }
  return out;
}

std::string placeholder_svg(const std::string& image_id) {
  std::string safe;
  for (char c : image_id) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.') safe += c;
  }
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"240\">"
         "<rect width=\"100%\" height=\"100%\" fill=\"#ddd\"/>"
         "<text x=\"50%\" y=\"50%\" text-anchor=\"middle\" font-family=\"sans-serif\">"
         "image " + safe + " unavailable</text></svg>";
}

}  // namespace

GradingService::GradingService(GradingData data, Options options)
    : data_(std::move(data)), options_(std::move(options)), log_(options_.grades_path) {
  for (std::size_t i = 0; i < data_.examples.size(); ++i) {
    example_index_[data_.examples[i].question_id] = i;
    if (!options_.golds.count(data_.examples[i].question_id)) {
      options_.golds[data_.examples[i].question_id] = data_.examples[i].gold_answers;
    }
  }
  server_ = std::make_unique<httplib::Server>();
  // httplib also sets SO_REUSEPORT by default, which would let a second
  // server silently share the port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  install_routes();
}

GradingService::~GradingService() { stop(); }

json GradingService::example_json(const VisualQuestion& q, const std::string& grader_id,
                                  const std::vector<GradeRecord>& grades) const {
  const auto latest = grader_id.empty() ? decltype(latest_for_grader(grades, grader_id)){}
                                        : latest_for_grader(grades, grader_id);
  json systems = json::array();
  for (const auto& s : data_.systems) {
    const auto& p = data_.predictions.at({q.question_id, s});
    json item{{"system", s},
              {"rewrite_text", p.rewrite_text ? json(*p.rewrite_text) : json(nullptr)},
              {"predicted_answer", p.predicted_answer},
              {"current_verdict", nullptr}};
    if (auto it = latest.find({q.question_id, s}); it != latest.end()) {
      item["current_verdict"] = to_string(it->second.verdict);
    }
    systems.push_back(std::move(item));
  }
  return json{{"question_id", q.question_id},
              {"image_id", q.image_id},
              {"image_url", "/api/images/" + q.image_id},
              {"question", q.question},
              {"gold_answers", q.gold_answers},
              {"systems", systems}};
}

json GradingService::examples_json(const std::string& grader_id) const {
  const auto grades = log_.snapshot();
  json items = json::array();
  for (const auto& q : data_.examples) items.push_back(example_json(q, grader_id, *grades));
  return json{{"systems", data_.systems}, {"examples", items}};
}

json GradingService::progress_json(const std::string& grader_id) const {
  const auto grades = log_.snapshot();
  const auto latest = latest_for_grader(*grades, grader_id);
  std::map<std::string, std::size_t> per_example;
  for (const auto& [key, _] : latest) {
    if (example_index_.count(key.first)) ++per_example[key.first];
  }
  std::size_t complete = 0, verdicts = 0;
  for (const auto& [_, n] : per_example) {
    verdicts += n;
    if (n == data_.systems.size()) ++complete;
  }
  const std::size_t total = data_.examples.size();
  return json{{"grader_id", grader_id},
              {"graded", complete},
              {"total", total},
              {"label", std::to_string(complete) + "/" + std::to_string(total)},
              {"verdicts", verdicts},
              {"total_verdicts", total * data_.systems.size()}};
}

json GradingService::report_json() const {
  const auto grades = log_.snapshot();
  json rows = json::array();
  for (const auto& s : data_.systems) {
    std::vector<AnswerPrediction> preds;
    for (const auto& q : data_.examples) preds.push_back(data_.predictions.at({q.question_id, s}));
    json row{{"system", s}, {"em", nullptr}, {"bs", nullptr}, {"he", nullptr}};
    if (!preds.empty()) {
      row["em"] = exact_match(preds, options_.golds);
      if (options_.embedder) row["bs"] = bert_similarity(preds, options_.golds, *options_.embedder);
    }
    if (auto he = human_eval_score(*grades, s)) row["he"] = *he;
    rows.push_back(std::move(row));
  }
  return json{{"rows", rows}};
}

void GradingService::install_routes() {
  auto& svr = *server_;

  svr.Get("/api/examples", [this](const httplib::Request& req, httplib::Response& res) {
    reply_json(res, examples_json(req.get_param_value("grader_id")));
  });

  svr.Get(R"(/api/examples/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto it = example_index_.find(id);
    if (it == example_index_.end()) {
      reply_json(res, {{"error", "unknown question_id '" + id + "'"}}, 404);
      return;
    }
    const auto grades = log_.snapshot();
    reply_json(res, example_json(data_.examples[it->second], req.get_param_value("grader_id"), *grades));
  });

  svr.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const bool safe = id.find("..") == std::string::npos && id.find('/') == std::string::npos;
    if (safe && !options_.images_dir.empty()) {
      static const std::vector<std::pair<std::string, std::string>> kTypes = {
          {"", "application/octet-stream"}, {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"},
          {".png", "image/png"},             {".gif", "image/gif"},  {".webp", "image/webp"}};
      for (const auto& [ext, mime] : kTypes) {
        const auto path = options_.images_dir / (id + ext);
        if (std::filesystem::is_regular_file(path)) {
          std::ifstream in(path, std::ios::binary);
          std::ostringstream ss;
          ss << in.rdbuf();
          res.set_content(ss.str(), mime);
          return;
        }
      }
    }
    res.set_header("X-Placeholder", "1");
    res.set_content(placeholder_svg(id), "image/svg+xml");
  });

  svr.Post("/api/grades", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      reply_json(res, {{"error", "body must be a JSON object"}}, 400);
      return;
    }
    json problems = json::object();
    auto text_field = [&](const char* key) -> std::string {
      auto it = body.find(key);
      if (it == body.end()) {
        problems[key] = "missing";
      } else if (!it->is_string() || it->get<std::string>().empty()) {
        problems[key] = "must be a non-empty string";
      } else {
        return it->get<std::string>();
      }
      return {};
    };
    GradeRecord g;
    g.question_id = text_field("question_id");
    g.system = text_field("system");
    g.grader_id = text_field("grader_id");
    const std::string verdict = text_field("verdict");
    if (!g.question_id.empty() && !example_index_.count(g.question_id)) {
      problems["question_id"] = "unknown question_id";
    }
    if (!g.system.empty() &&
        std::find(data_.systems.begin(), data_.systems.end(), g.system) == data_.systems.end()) {
      problems["system"] = "unknown system";
    }
    if (!verdict.empty()) {
      if (verdict == "correct" || verdict == "incorrect") {
        g.verdict = parse_verdict(verdict);
      } else {
        problems["verdict"] = "must be 'correct' or 'incorrect'";
      }
    }
    if (!problems.empty()) {
      reply_json(res, {{"error", "invalid grade"}, {"fields", problems}}, 400);
      return;
    }
    try {
      reply_json(res, json(log_.append(std::move(g))), 201);
    } catch (const Error& e) {
      reply_json(res, {{"error", e.what()}}, 500);
    }
  });

  svr.Get("/api/grades", [this](const httplib::Request& req, httplib::Response& res) {
    const auto grader = req.get_param_value("grader_id");
    const auto question = req.get_param_value("question_id");
    const auto grades = log_.snapshot();
    // Current (latest) verdict per (question, system, grader).
    std::map<std::tuple<std::string, std::string, std::string>, GradeRecord> latest;
    for (const auto& g : *grades) {
      if (!grader.empty() && g.grader_id != grader) continue;
      if (!question.empty() && g.question_id != question) continue;
      latest[{g.question_id, g.system, g.grader_id}] = g;
    }
    json out = json::array();
    for (const auto& [_, g] : latest) out.push_back(g);
    reply_json(res, {{"grades", out}});
  });

  svr.Get("/api/progress", [this](const httplib::Request& req, httplib::Response& res) {
    const auto grader = req.get_param_value("grader_id");
    if (grader.empty()) {
      reply_json(res, {{"error", "grader_id query parameter is required"}}, 400);
      return;
    }
    reply_json(res, progress_json(grader));
  });

  svr.Get("/api/report", [this](const httplib::Request&, httplib::Response& res) {
    reply_json(res, report_json());
  });

  svr.Get("/api/guidelines", [](const httplib::Request&, httplib::Response& res) {
    reply_json(res, {{"text", grading_guidelines()}});
  });

  if (!options_.static_dir.empty() && std::filesystem::is_directory(options_.static_dir)) {
    svr.set_mount_point("/", options_.static_dir.string());
  }
}

int GradingService::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  return bound;
}

int GradingService::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void GradingService::run(const std::string& host, int port) {
  bind(host, port);
  server_->listen_after_bind();
}

void GradingService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::unique_ptr<GradingService> make_grading_service(const PipelineConfig& cfg) {
  std::vector<std::string> systems;
  for (const auto& s : cfg.systems) systems.push_back(s.name);
  if (systems.empty()) {
    for (const auto& entry : std::filesystem::directory_iterator(cfg.output_dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("predictions_", 0) == 0 && entry.path().extension() == ".jsonl") {
        systems.push_back(name.substr(12, name.size() - 12 - 6));
      }
    }
  }
  std::sort(systems.begin(), systems.end());
  std::vector<AnswerPrediction> preds;
  for (const auto& s : systems) {
    const auto path = predictions_path(cfg, s);
    if (!std::filesystem::exists(path)) {
      throw ConfigError("no predictions for system '" + s + "' at " + path.string() + " (run `eval` first)");
    }
    for (auto& p : read_predictions(path)) {
      p.system = s;
      preds.push_back(std::move(p));
    }
  }
  if (preds.empty()) throw ConfigError("grading needs predictions for at least one system");

  const auto questions = read_questions(cfg.test_path);
  GradingService::Options options;
  options.grades_path = cfg.grades_path;
  options.images_dir = cfg.images_dir;
  options.static_dir = cfg.static_dir;
  options.embedder = make_embedder(cfg.eval_embedder);
  return std::make_unique<GradingService>(GradingData::build(questions, preds), std::move(options));
}

}  // namespace rewriteqa
