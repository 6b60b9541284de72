#ifndef REWRITEQA_DATASET_H_
#define REWRITEQA_DATASET_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace rewriteqa {

enum class EntitySource { kObject, kScene };
enum class Split { kTrain, kTest };

struct EntityLabel {
  std::string text;
  EntitySource source = EntitySource::kObject;
  int rank = 1;  // 1 = most confident

  bool operator==(const EntityLabel&) const = default;
};

struct VisualQuestion {
  std::string question_id;
  std::string image_id;
  std::string question;
  std::vector<std::string> gold_answers;
  std::vector<EntityLabel> entities;  // ascending rank
  std::string question_type;
  Split split = Split::kTrain;
};

struct FilterSpec {
  std::string keep_question_type = "knowledge";
  std::vector<std::string> spatial_keywords = {
      "left", "right", "behind", "front", "closest", "nearest", "top", "bottom"};
  int top_e = 4;

  // Throws ConfigError on top_e < 1 or non-lowercase keywords.
  void validate() const;
};

const char* to_string(EntitySource s);
const char* to_string(Split s);

void to_json(nlohmann::json& j, const EntityLabel& e);
void from_json(const nlohmann::json& j, EntityLabel& e);
void to_json(nlohmann::json& j, const VisualQuestion& q);
// Validates the record schema; throws SchemaError.
void from_json(const nlohmann::json& j, VisualQuestion& q);

// Reads the JSONL dataset, keeps records of the configured question type
// whose question has no spatial keyword as a whole token, and truncates each
// record's entities to the top_e best ranks. Input order is preserved.
std::vector<VisualQuestion> load_dataset(const std::filesystem::path& path,
                                         const FilterSpec& spec);
std::vector<VisualQuestion> load_dataset(std::istream& in, const FilterSpec& spec);

// Reads records without filtering (used for already prepared split files).
std::vector<VisualQuestion> read_questions(const std::filesystem::path& path);

void write_questions(const std::filesystem::path& path,
                     const std::vector<VisualQuestion>& questions);

}  // namespace rewriteqa

#endif  // REWRITEQA_DATASET_H_
