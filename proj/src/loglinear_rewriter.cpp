#include "rewriteqa/loglinear_rewriter.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <set>

#include "json.hpp"
#include "rewriteqa/dataset.h"
#include "rewriteqa/errors.h"
#include "rewriteqa/text.h"

namespace rewriteqa {

struct LogLinearRewriter::InputFeatures {
  std::vector<int> tokens;      // in-vocabulary input tokens, in order
  std::vector<int> unique;      // distinct members of `tokens`, ascending
  std::vector<double> assoc;    // sum over `unique` of assoc rows, size V
  std::vector<char> in_input;   // size V
  std::map<int, std::vector<int>> followers;  // prev -> tokens that follow it
};

namespace {

constexpr const char* kSnapshotFormat = "loglinear-rewriter-v1";

double log_sum_exp(const std::vector<double>& xs) {
  double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

LogLinearRewriter::LogLinearRewriter(std::vector<std::string> vocabulary)
    : LogLinearRewriter(std::move(vocabulary), Options{}) {}

LogLinearRewriter::LogLinearRewriter(std::vector<std::string> vocabulary, Options options)
    : options_(options) {
  if (options_.max_positions < 1) throw ConfigError("max_positions must be >= 1");
  if (options_.learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
  std::set<std::string> uniq(vocabulary.begin(), vocabulary.end());
  uniq.erase(kEndToken);
  uniq.erase("");
  vocab_.push_back(kEndToken);
  vocab_.insert(vocab_.end(), uniq.begin(), uniq.end());
  init_layout();
  params_[copy_follow_] = options_.copy_follow_init;
  params_[copy_any_] = options_.copy_any_init;
}

void LogLinearRewriter::init_layout() {
  index_.clear();
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = static_cast<int>(i);
  const std::size_t v = vocab_.size();
  bos_ = static_cast<int>(v);
  pos_offset_ = v;
  trans_offset_ = pos_offset_ + static_cast<std::size_t>(options_.max_positions) * v;
  assoc_offset_ = trans_offset_ + (v + 1) * v;
  copy_follow_ = assoc_offset_ + v * v;
  copy_any_ = copy_follow_ + 1;
  params_.assign(copy_any_ + 1, 0.0);
}

std::size_t LogLinearRewriter::bias_at(int v) const { return static_cast<std::size_t>(v); }
std::size_t LogLinearRewriter::pos_at(int row, int v) const {
  return pos_offset_ + static_cast<std::size_t>(row) * vocab_.size() + static_cast<std::size_t>(v);
}
std::size_t LogLinearRewriter::trans_at(int prev, int v) const {
  return trans_offset_ + static_cast<std::size_t>(prev) * vocab_.size() +
         static_cast<std::size_t>(v);
}
std::size_t LogLinearRewriter::assoc_at(int u, int v) const {
  return assoc_offset_ + static_cast<std::size_t>(u) * vocab_.size() + static_cast<std::size_t>(v);
}

std::vector<std::string> LogLinearRewriter::vocabulary_for(
    std::span<const VisualQuestion> questions) {
  std::set<std::string> vocab{"."};
  for (const auto& q : questions) {
    for (auto& t : tokenize(q.question)) vocab.insert(std::move(t));
    for (const auto& e : q.entities) {
      for (auto& t : tokenize(e.text)) vocab.insert(std::move(t));
    }
  }
  return {vocab.begin(), vocab.end()};
}

LogLinearRewriter::InputFeatures LogLinearRewriter::featurize(std::string_view input_text) const {
  InputFeatures f;
  for (const auto& t : tokenize(input_text)) {
    auto it = index_.find(t);
    // Tokens the model cannot emit carry no features.
    if (it != index_.end() && it->second != 0) f.tokens.push_back(it->second);
  }
  const std::size_t v = vocab_.size();
  f.in_input.assign(v, 0);
  f.assoc.assign(v, 0.0);
  std::set<int> uniq(f.tokens.begin(), f.tokens.end());
  f.unique.assign(uniq.begin(), uniq.end());
  for (int u : f.unique) {
    f.in_input[static_cast<std::size_t>(u)] = 1;
    for (std::size_t w = 0; w < v; ++w) f.assoc[w] += params_[assoc_at(u, static_cast<int>(w))];
  }
  int prev = bos_;
  for (int t : f.tokens) {
    f.followers[prev].push_back(t);
    prev = t;
  }
  f.followers[prev].push_back(0);
  for (auto& [_, next] : f.followers) {
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
  }
  return f;
}

std::vector<int> LogLinearRewriter::encode_output(std::string_view text) const {
  // Plain whitespace split so every generated sequence (including ones that
  // end in the "." separator) encodes back to itself.
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  Tokens tokens = split_whitespace(lowered);
  if (tokens.empty()) throw InvalidInputError("rewriter output must have at least one token");
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  for (const auto& t : tokens) {
    auto it = index_.find(t);
    if (it == index_.end() || it->second == 0) throw VocabularyError(t);
    ids.push_back(it->second);
  }
  ids.push_back(0);
  return ids;
}

void LogLinearRewriter::position_logits(const InputFeatures& in, int position, int prev,
                                        std::vector<double>& logits) const {
  const std::size_t v = vocab_.size();
  const int row = std::min(position, options_.max_positions - 1);
  logits.resize(v);
  const double ca = params_[copy_any_];
  for (std::size_t w = 0; w < v; ++w) {
    const int wi = static_cast<int>(w);
    logits[w] = params_[bias_at(wi)] + params_[pos_at(row, wi)] + params_[trans_at(prev, wi)] +
                in.assoc[w] + (in.in_input[w] ? ca : 0.0);
  }
  if (auto it = in.followers.find(prev); it != in.followers.end()) {
    for (int w : it->second) logits[static_cast<std::size_t>(w)] += params_[copy_follow_];
  }
}

double LogLinearRewriter::sequence_logprob(const InputFeatures& in, const std::vector<int>& output,
                                           std::vector<double>* gradient, double weight) const {
  const std::size_t v = vocab_.size();
  std::vector<double> logits;
  double total = 0.0;
  int prev = bos_;
  for (std::size_t j = 0; j < output.size(); ++j) {
    const int target = output[j];
    position_logits(in, static_cast<int>(j), prev, logits);
    const double lse = log_sum_exp(logits);
    total += logits[static_cast<std::size_t>(target)] - lse;

    if (gradient && weight != 0.0) {
      auto& g = *gradient;
      const int row = std::min(static_cast<int>(j), options_.max_positions - 1);
      const auto follow_it = in.followers.find(prev);
      const std::vector<int>* follow =
          follow_it == in.followers.end() ? nullptr : &follow_it->second;
      double expected_follow = 0.0, expected_any = 0.0;
      for (std::size_t w = 0; w < v; ++w) {
        const int wi = static_cast<int>(w);
        // d log p(target) / d logit(w) = [w == target] - p(w)
        const double d = weight * ((wi == target ? 1.0 : 0.0) - std::exp(logits[w] - lse));
        g[bias_at(wi)] += d;
        g[pos_at(row, wi)] += d;
        g[trans_at(prev, wi)] += d;
        for (int u : in.unique) g[assoc_at(u, wi)] += d;
        if (in.in_input[w]) expected_any += d;
      }
      if (follow) {
        for (int w : *follow) {
          expected_follow += weight * ((w == target ? 1.0 : 0.0) -
                                       std::exp(logits[static_cast<std::size_t>(w)] - lse));
        }
      }
      g[copy_follow_] += expected_follow;
      g[copy_any_] += expected_any;
    }
    prev = target;
  }
  return total;
}

double LogLinearRewriter::log_likelihood(std::string_view input_text,
                                         std::string_view output_text) const {
  return sequence_logprob(featurize(input_text), encode_output(output_text), nullptr, 0.0);
}

std::vector<double> LogLinearRewriter::objective_gradient(
    std::string_view input_text, const std::vector<WeightedCandidate>& candidates) const {
  InputFeatures in = featurize(input_text);
  std::vector<double> grad(params_.size(), 0.0);
  for (const auto& c : candidates) sequence_logprob(in, encode_output(c.text), &grad, c.weight);
  return grad;
}

double LogLinearRewriter::update(std::string_view input_text,
                                 const std::vector<WeightedCandidate>& candidates) {
  if (candidates.empty()) throw InvalidInputError("update needs at least one candidate");
  InputFeatures in = featurize(input_text);
  std::vector<std::vector<int>> encoded;
  encoded.reserve(candidates.size());
  for (const auto& c : candidates) encoded.push_back(encode_output(c.text));

  std::vector<double> grad(params_.size(), 0.0);
  double objective = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    objective -= candidates[i].weight * sequence_logprob(in, encoded[i], &grad, candidates[i].weight);
  }
  for (std::size_t p = 0; p < params_.size(); ++p) params_[p] += options_.learning_rate * grad[p];
  return objective;
}

std::vector<std::string> LogLinearRewriter::generate(const GenerationRequest& request) const {
  request.validate();
  // Beam search is exact and ignores request.seed.
  const InputFeatures in = featurize(request.input_text);
  const int max_len = static_cast<int>(in.tokens.size()) + options_.max_extra_tokens;
  const std::size_t width = static_cast<std::size_t>(request.beam_width);

  struct Hyp {
    std::vector<int> tokens;
    double score;
  };
  auto better = [](const Hyp& a, const Hyp& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };

  std::vector<Hyp> active{{{}, 0.0}};
  std::vector<Hyp> finished;
  std::vector<double> logits;
  for (int step = 0; step <= max_len && !active.empty() && finished.size() < width; ++step) {
    std::vector<Hyp> expanded;
    for (const auto& h : active) {
      const int prev = h.tokens.empty() ? bos_ : h.tokens.back();
      position_logits(in, step, prev, logits);
      const double lse = log_sum_exp(logits);
      for (std::size_t w = 0; w < logits.size(); ++w) {
        if (w == 0 && h.tokens.empty()) continue;  // no empty rewrites
        if (w != 0 && step == max_len) continue;   // forced stop
        Hyp next{h.tokens, h.score + logits[w] - lse};
        next.tokens.push_back(static_cast<int>(w));
        expanded.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(width, expanded.size());
    std::partial_sort(expanded.begin(), expanded.begin() + static_cast<std::ptrdiff_t>(keep),
                      expanded.end(), better);
    expanded.resize(keep);
    active.clear();
    for (auto& h : expanded) {
      if (h.tokens.back() == 0) {
        h.tokens.pop_back();
        finished.push_back(std::move(h));
      } else {
        active.push_back(std::move(h));
      }
    }
  }
  std::sort(finished.begin(), finished.end(), better);

  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& h : finished) {
    if (out.size() >= static_cast<std::size_t>(request.k)) break;
    std::vector<std::string> words;
    for (int t : h.tokens) words.push_back(vocab_[static_cast<std::size_t>(t)]);
    std::string text = join_tokens(words);
    if (seen.insert(text).second) out.push_back(std::move(text));
  }
  return out;
}

// Blob layout: one JSON header line, then the raw parameter bytes.
std::string LogLinearRewriter::snapshot() const {
  nlohmann::json header{{"format", kSnapshotFormat},
                        {"vocabulary", vocab_},
                        {"learning_rate", options_.learning_rate},
                        {"max_positions", options_.max_positions},
                        {"max_extra_tokens", options_.max_extra_tokens},
                        {"copy_follow_init", options_.copy_follow_init},
                        {"copy_any_init", options_.copy_any_init},
                        {"parameter_count", params_.size()}};
  std::string blob = header.dump();
  blob += '\n';
  const std::size_t bytes = params_.size() * sizeof(double);
  const std::size_t offset = blob.size();
  blob.resize(offset + bytes);
  std::memcpy(blob.data() + offset, params_.data(), bytes);
  return blob;
}

void LogLinearRewriter::restore(const std::string& blob) {
  const auto nl = blob.find('\n');
  if (nl == std::string::npos) throw ParseError("rewriter snapshot has no header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(0, nl));
    if (header.at("format") != kSnapshotFormat) throw ParseError("unknown snapshot format");
    Options opts;
    opts.learning_rate = header.at("learning_rate").get<double>();
    opts.max_positions = header.at("max_positions").get<int>();
    opts.max_extra_tokens = header.at("max_extra_tokens").get<int>();
    opts.copy_follow_init = header.at("copy_follow_init").get<double>();
    opts.copy_any_init = header.at("copy_any_init").get<double>();
    auto vocab = header.at("vocabulary").get<std::vector<std::string>>();
    const auto count = header.at("parameter_count").get<std::size_t>();
    if (blob.size() - nl - 1 != count * sizeof(double)) {
      throw ParseError("rewriter snapshot payload has the wrong size");
    }
    if (vocab.empty() || vocab[0] != kEndToken) throw ParseError("snapshot vocabulary is invalid");
    LogLinearRewriter restored(vocab, opts);
    if (restored.vocab_ != vocab || restored.params_.size() != count) {
      throw ParseError("snapshot layout does not match its header");
    }
    std::memcpy(restored.params_.data(), blob.data() + nl + 1, count * sizeof(double));
    *this = std::move(restored);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad rewriter snapshot header: ") + e.what());
  }
}

}  // namespace rewriteqa
