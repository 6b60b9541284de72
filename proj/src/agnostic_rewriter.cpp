#include "rewriteqa/agnostic_rewriter.h"

#include <algorithm>
#include <fstream>

#include "rewriteqa/errors.h"
#include "rewriteqa/text.h"

namespace rewriteqa {

using nlohmann::json;

const char* to_string(RewriteMode mode) {
  switch (mode) {
    case RewriteMode::kAgnostic: return "agnostic";
    case RewriteMode::kAware: return "aware";
    case RewriteMode::kConcat: return "concat";
    case RewriteMode::kPassthrough: return "passthrough";
  }
  return "?";
}

RewriteMode parse_rewrite_mode(const std::string& name) {
  if (name == "agnostic") return RewriteMode::kAgnostic;
  if (name == "aware") return RewriteMode::kAware;
  if (name == "concat") return RewriteMode::kConcat;
  if (name == "passthrough") return RewriteMode::kPassthrough;
  throw ConfigError("unknown rewrite mode '" + name + "'");
}

void CandidateGenConfig::validate() const {
  if (n_max < 1) throw ConfigError("candidates.n_max must be >= 1");
  if (min_surviving_tokens < 0) throw ConfigError("candidates.min_surviving_tokens must be >= 0");
}

std::vector<RewriteCandidate> enumerate_candidates(const VisualQuestion& question,
                                                   const CandidateGenConfig& cfg,
                                                   const EntityLabel* only_entity) {
  cfg.validate();
  const Tokens tokens = tokenize(question.question);
  if (tokens.empty()) throw PreconditionError(question.question_id + ": question has no tokens");
  if (question.entities.empty()) {
    throw PreconditionError(question.question_id + ": question has no entities");
  }
  std::vector<std::pair<const EntityLabel*, Tokens>> entities;
  for (const auto& e : question.entities) {
    if (only_entity && !(e == *only_entity)) continue;
    entities.emplace_back(&e, tokenize(e.text));
  }

  const int n = static_cast<int>(tokens.size());
  std::vector<RewriteCandidate> out;
  for (int start = 0; start < n; ++start) {
    for (int len = 1; len <= cfg.n_max && start + len <= n; ++len) {
      if (n - len < cfg.min_surviving_tokens) continue;
      for (const auto& [entity, entity_tokens] : entities) {
        Tokens words(tokens.begin(), tokens.begin() + start);
        words.insert(words.end(), entity_tokens.begin(), entity_tokens.end());
        words.insert(words.end(), tokens.begin() + start + len, tokens.end());
        out.push_back(RewriteCandidate{join_tokens(words), SpanSub{start, len, *entity}, {}});
      }
    }
  }
  return out;
}

bool ranks_before(const RewriteCandidate& a, const RewriteCandidate& b,
                  const CandidateGenConfig& cfg) {
  const double ka = cfg.length_normalize ? a.score->normalized : a.score->total_logprob;
  const double kb = cfg.length_normalize ? b.score->normalized : b.score->total_logprob;
  if (ka != kb) return ka > kb;
  if (a.sub && b.sub) {
    if (a.sub->length != b.sub->length) return a.sub->length < b.sub->length;
    if (a.sub->start != b.sub->start) return a.sub->start < b.sub->start;
    if (a.sub->entity.rank != b.sub->entity.rank) return a.sub->entity.rank < b.sub->entity.rank;
  }
  return false;
}

std::vector<RewriteCandidate> rank_candidates(std::vector<RewriteCandidate> cands,
                                              const LanguageModelScorer& scorer,
                                              const CandidateGenConfig& cfg) {
  if (cands.empty()) throw PreconditionError("rank_candidates needs at least one candidate");
  for (auto& c : cands) {
    try {
      c.score = scorer.score_sequence(c.text);
    } catch (const std::exception& e) {
      throw BackendError("scoring '" + c.text + "' failed: " + e.what());
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [&](const RewriteCandidate& a, const RewriteCandidate& b) {
                     return ranks_before(a, b, cfg);
                   });
  return cands;
}

RewriteDecision rewrite_agnostic(const VisualQuestion& question,
                                 const LanguageModelScorer& scorer,
                                 const CandidateGenConfig& cfg) {
  RewriteDecision d;
  d.question_id = question.question_id;
  d.mode = RewriteMode::kAgnostic;
  d.ranked = rank_candidates(enumerate_candidates(question, cfg), scorer, cfg);
  d.chosen = d.ranked.front();
  return d;
}

std::string build_concat_input(const VisualQuestion& question) {
  std::string out = join_tokens(tokenize(question.question));
  for (const auto& e : question.entities) {
    out += " . ";
    out += join_tokens(tokenize(e.text));
  }
  return out;
}

namespace {

RewriteDecision single_text_decision(const VisualQuestion& q, std::string text, RewriteMode mode) {
  RewriteDecision d;
  d.question_id = q.question_id;
  d.mode = mode;
  d.chosen.text = std::move(text);
  d.ranked = {d.chosen};
  return d;
}

}  // namespace

RewriteDecision rewrite_concat(const VisualQuestion& question) {
  return single_text_decision(question, build_concat_input(question), RewriteMode::kConcat);
}

RewriteDecision rewrite_passthrough(const VisualQuestion& question) {
  return single_text_decision(question, question.question, RewriteMode::kPassthrough);
}

// --- JSON -----------------------------------------------------------------

void to_json(json& j, const RewriteCandidate& c) {
  j = json{{"text", c.text}};
  if (c.sub) {
    j["span"] = {{"start", c.sub->start}, {"length", c.sub->length}};
    j["entity"] = c.sub->entity;
  } else {
    j["span"] = nullptr;
    j["entity"] = nullptr;
  }
  if (c.score) {
    j["score_total"] = c.score->total_logprob;
    j["score_normalized"] = c.score->normalized;
    j["token_count"] = c.score->token_count;
  } else {
    j["score_total"] = nullptr;
    j["score_normalized"] = nullptr;
  }
}

void from_json(const json& j, RewriteCandidate& c) {
  try {
    c.text = j.at("text").get<std::string>();
    c.sub.reset();
    c.score.reset();
    if (j.contains("span") && !j["span"].is_null()) {
      SpanSub s;
      s.start = j["span"].at("start").get<int>();
      s.length = j["span"].at("length").get<int>();
      s.entity = j.at("entity").get<EntityLabel>();
      c.sub = s;
    }
    if (j.contains("score_total") && !j["score_total"].is_null()) {
      const double total = j["score_total"].get<double>();
      const int count = j.value("token_count", 0);
      SequenceScore s{total, count, j.at("score_normalized").get<double>()};
      c.score = s;
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad rewrite candidate: ") + e.what());
  }
}

void to_json(json& j, const RewriteDecision& d) {
  json chosen = d.chosen;
  j = json{{"question_id", d.question_id},
           {"mode", to_string(d.mode)},
           {"chosen_text", d.chosen.text},
           {"span", chosen["span"]},
           {"entity", chosen["entity"]},
           {"score_total", chosen["score_total"]},
           {"score_normalized", chosen["score_normalized"]},
           {"ranked", d.ranked}};
}

void from_json(const json& j, RewriteDecision& d) {
  try {
    d.question_id = j.at("question_id").get<std::string>();
    d.mode = parse_rewrite_mode(j.at("mode").get<std::string>());
    d.ranked = j.at("ranked").get<std::vector<RewriteCandidate>>();
    if (d.ranked.empty()) {
      RewriteCandidate c;
      c.text = j.at("chosen_text").get<std::string>();
      d.ranked.push_back(c);
    }
    d.chosen = d.ranked.front();
    if (d.chosen.text != j.at("chosen_text").get<std::string>()) {
      throw SchemaError("chosen_text differs from the first ranked candidate");
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad rewrite decision: ") + e.what());
  }
}

void write_decisions(const std::filesystem::path& path,
                     const std::vector<RewriteDecision>& decisions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& d : decisions) out << json(d).dump() << '\n';
}

std::vector<RewriteDecision> read_decisions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open decisions file: " + path.string());
  std::vector<RewriteDecision> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("malformed JSON", line_no);
    out.push_back(j.get<RewriteDecision>());
  }
  return out;
}

}  // namespace rewriteqa
