#include "rewriteqa/dataset.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "rewriteqa/errors.h"
#include "rewriteqa/text.h"

namespace rewriteqa {
namespace {

using nlohmann::json;

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(std::string("missing required field '") + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw SchemaError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

bool has_spatial_keyword(const VisualQuestion& q, const FilterSpec& spec) {
  for (const auto& token : tokenize(q.question)) {
    if (std::find(spec.spatial_keywords.begin(), spec.spatial_keywords.end(), token) !=
        spec.spatial_keywords.end()) {
      return true;
    }
  }
  return false;
}

std::vector<VisualQuestion> read_records(std::istream& in, const FilterSpec* spec) {
  std::vector<VisualQuestion> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
    }
    VisualQuestion q;
    try {
      from_json(j, q);
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (spec) {
      if (q.question_type != spec->keep_question_type) continue;
      if (has_spatial_keyword(q, *spec)) continue;
      if (q.entities.size() > static_cast<std::size_t>(spec->top_e)) {
        q.entities.resize(static_cast<std::size_t>(spec->top_e));
      }
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace

void FilterSpec::validate() const {
  if (top_e < 1) throw ConfigError("filter.top_e must be >= 1");
  for (const auto& k : spatial_keywords) {
    if (std::any_of(k.begin(), k.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
      throw ConfigError("spatial keyword must be lowercase: " + k);
    }
  }
}

const char* to_string(EntitySource s) { return s == EntitySource::kObject ? "object" : "scene"; }
const char* to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

void to_json(json& j, const EntityLabel& e) {
  j = json{{"text", e.text}, {"source", to_string(e.source)}, {"rank", e.rank}};
}

void from_json(const json& j, EntityLabel& e) {
  if (!j.is_object()) throw SchemaError("entity must be an object");
  e.text = trim(require_string(j, "text"));
  if (e.text.empty()) throw SchemaError("entity text is empty");
  const std::string source = require_string(j, "source");
  if (source == "object") {
    e.source = EntitySource::kObject;
  } else if (source == "scene") {
    e.source = EntitySource::kScene;
  } else {
    throw SchemaError("entity source must be 'object' or 'scene', got '" + source + "'");
  }
  const json& rank = require(j, "rank");
  if (!rank.is_number_integer() || rank.get<long long>() < 1) {
    throw SchemaError("entity rank must be a positive integer");
  }
  e.rank = rank.get<int>();
}

void to_json(json& j, const VisualQuestion& q) {
  j = json{{"question_id", q.question_id},
           {"image_id", q.image_id},
           {"question", q.question},
           {"gold_answers", q.gold_answers},
           {"entities", q.entities},
           {"question_type", q.question_type},
           {"split", to_string(q.split)}};
}

void from_json(const json& j, VisualQuestion& q) {
  if (!j.is_object()) throw SchemaError("record must be a JSON object");
  q.question_id = require_string(j, "question_id");
  q.image_id = require_string(j, "image_id");
  q.question = require_string(j, "question");
  if (trim(q.question).empty()) throw SchemaError("question is empty");
  q.question_type = require_string(j, "question_type");

  const json& golds = require(j, "gold_answers");
  if (!golds.is_array() || golds.empty()) {
    throw SchemaError("gold_answers must be a non-empty array");
  }
  q.gold_answers.clear();
  for (const auto& g : golds) {
    if (!g.is_string()) throw SchemaError("gold_answers entries must be strings");
    q.gold_answers.push_back(g.get<std::string>());
  }

  const json& ents = require(j, "entities");
  if (!ents.is_array()) throw SchemaError("entities must be an array");
  std::vector<EntityLabel> entities;
  for (const auto& e : ents) entities.push_back(e.get<EntityLabel>());
  std::stable_sort(entities.begin(), entities.end(),
                   [](const EntityLabel& a, const EntityLabel& b) { return a.rank < b.rank; });
  for (std::size_t i = 1; i < entities.size(); ++i) {
    if (entities[i].rank == entities[i - 1].rank) {
      throw SchemaError("duplicate entity rank " + std::to_string(entities[i].rank));
    }
  }
  // Keep the best-ranked occurrence of each normalized label.
  std::set<std::string> seen;
  q.entities.clear();
  for (auto& e : entities) {
    if (seen.insert(join_tokens(tokenize(e.text))).second) q.entities.push_back(std::move(e));
  }

  const std::string split = require_string(j, "split");
  if (split == "train") {
    q.split = Split::kTrain;
  } else if (split == "test") {
    q.split = Split::kTest;
  } else {
    throw SchemaError("split must be 'train' or 'test', got '" + split + "'");
  }
}

std::vector<VisualQuestion> load_dataset(std::istream& in, const FilterSpec& spec) {
  spec.validate();
  return read_records(in, &spec);
}

std::vector<VisualQuestion> load_dataset(const std::filesystem::path& path,
                                         const FilterSpec& spec) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path.string());
  return load_dataset(in, spec);
}

std::vector<VisualQuestion> read_questions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path.string());
  return read_records(in, nullptr);
}

void write_questions(const std::filesystem::path& path,
                     const std::vector<VisualQuestion>& questions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& q : questions) out << json(q).dump() << '\n';
}

}  // namespace rewriteqa
