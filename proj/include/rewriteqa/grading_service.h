#ifndef REWRITEQA_GRADING_SERVICE_H_
#define REWRITEQA_GRADING_SERVICE_H_

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rewriteqa/dataset.h"
#include "rewriteqa/evaluation.h"

namespace httplib {
class Server;
}

namespace rewriteqa {

struct PipelineConfig;

// Grading instructions served at /api/guidelines.
const std::string& grading_guidelines();

// Everything the grading UI displays. Examples are restricted to questions
// every loaded system has a prediction for.
struct GradingData {
  std::vector<VisualQuestion> examples;
  std::vector<std::string> systems;  // sorted
  // (question_id, system) -> prediction
  std::map<std::pair<std::string, std::string>, AnswerPrediction> predictions;

  static GradingData build(const std::vector<VisualQuestion>& questions,
                           const std::vector<AnswerPrediction>& predictions);
};

// Append-only grade log. One writer at a time; readers take an immutable
// snapshot without blocking writers.
class GradeLog {
 public:
  // Replays existing records from `path` (created if missing).
  explicit GradeLog(std::filesystem::path path);

  // Stamps, persists and publishes the record; returns the stored copy.
  GradeRecord append(GradeRecord record);
  std::shared_ptr<const std::vector<GradeRecord>> snapshot() const;

 private:
  std::filesystem::path path_;
  std::mutex write_mu_;
  std::ofstream out_;
  std::int64_t last_timestamp_ = 0;
  std::shared_ptr<const std::vector<GradeRecord>> records_;
};

// HTTP JSON API over GradingData and a GradeLog:
//   GET  /api/examples[?grader_id=]       GET /api/examples/{id}[?grader_id=]
//   GET  /api/images/{image_id}           POST /api/grades
//   GET  /api/grades[?grader_id=&question_id=]
//   GET  /api/progress?grader_id=         GET /api/report
//   GET  /api/guidelines
class GradingService {
 public:
  struct Options {
    std::filesystem::path grades_path;
    std::filesystem::path images_dir;
    std::filesystem::path static_dir;
    GoldMap golds;  // defaults to the examples' gold answers
    std::shared_ptr<const AnswerEmbedder> embedder;  // for EM/BS in /api/report
  };

  GradingService(GradingData data, Options options);
  ~GradingService();
  GradingService(const GradingService&) = delete;
  GradingService& operator=(const GradingService&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Throws Error when the port cannot be bound. Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks serving on the calling thread.
  void run(const std::string& host, int port);
  void stop();

  nlohmann::json examples_json(const std::string& grader_id) const;
  nlohmann::json report_json() const;
  nlohmann::json progress_json(const std::string& grader_id) const;

 private:
  void install_routes();
  nlohmann::json example_json(const VisualQuestion& q, const std::string& grader_id,
                              const std::vector<GradeRecord>& grades) const;
  int bind(const std::string& host, int port);

  GradingData data_;
  Options options_;
  GradeLog log_;
  std::map<std::string, std::size_t> example_index_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

// Builds a service from the config: test split, predictions_<system>.jsonl
// for the configured (or discovered) systems, grades log, images dir.
std::unique_ptr<GradingService> make_grading_service(const PipelineConfig& cfg);

}  // namespace rewriteqa

#endif  // REWRITEQA_GRADING_SERVICE_H_
