#include "rewriteqa/reference_backends.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rewriteqa/errors.h"
#include "rewriteqa/text.h"

namespace rewriteqa {

void GenerationRequest::validate() const {
  if (k < 1) throw InvalidInputError("generation k must be >= 1");
  if (beam_width < k) throw InvalidInputError("generation k must not exceed beam_width");
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ConfigError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::max(-1.0, std::min(1.0, c));
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------

NgramTableScorer::NgramTableScorer(double unk_logprob) : unk_logprob_(unk_logprob) {
  if (unk_logprob > 0) throw ConfigError("unk_logprob must be <= 0");
}

NgramTableScorer NgramTableScorer::from_file(const std::filesystem::path& path,
                                             double unk_logprob) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open n-gram table: " + path.string());
  return from_stream(in, unk_logprob);
}

NgramTableScorer NgramTableScorer::from_stream(std::istream& in, double unk_logprob) {
  NgramTableScorer scorer(unk_logprob);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto tab = body.find('\t');
    if (tab == std::string::npos) throw ParseError("expected '<logprob>\\t<ngram>'", line_no);
    double lp;
    try {
      std::size_t used = 0;
      lp = std::stod(body.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("bad logprob '" + body.substr(0, tab) + "'", line_no);
    }
    if (lp > 0 || !std::isfinite(lp)) throw ParseError("logprob must be finite and <= 0", line_no);
    Tokens gram = split_whitespace(body.substr(tab + 1));
    if (gram.size() == 1) {
      scorer.set_unigram(gram[0], lp);
    } else if (gram.size() == 2) {
      scorer.set_bigram(gram[0], gram[1], lp);
    } else {
      throw ParseError("only unigrams and bigrams are supported", line_no);
    }
  }
  return scorer;
}

void NgramTableScorer::set_unigram(const std::string& token, double logprob) {
  unigrams_[token] = logprob;
}

void NgramTableScorer::set_bigram(const std::string& prev, const std::string& token,
                                  double logprob) {
  bigrams_[{prev, token}] = logprob;
}

SequenceScore NgramTableScorer::score_sequence(std::string_view text) const {
  Tokens tokens = tokenize(text);
  if (tokens.empty()) throw InvalidInputError("cannot score empty text");
  double total = 0.0;
  std::string prev = "<s>";
  for (const auto& t : tokens) {
    if (auto b = bigrams_.find({prev, t}); b != bigrams_.end()) {
      total += b->second;
    } else if (auto u = unigrams_.find(t); u != unigrams_.end()) {
      total += u->second;
    } else {
      total += unk_logprob_;
    }
    prev = t;
  }
  return SequenceScore::make(total, static_cast<int>(tokens.size()));
}

// ---------------------------------------------------------------------------

LookupQA::LookupQA(const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [q, a] : entries) add(q, a);
}

LookupQA LookupQA::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open QA table: " + path.string());
  LookupQA qa;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected '<question>\\t<answer>'", line_no);
    std::string answer = trim(line.substr(tab + 1));
    if (answer.empty()) throw ParseError("empty answer", line_no);
    qa.add(line.substr(0, tab), answer);
  }
  return qa;
}

void LookupQA::add(std::string_view question, std::string answer) {
  table_[normalize_answer(question)] = std::move(answer);
}

std::string LookupQA::answer(std::string_view question) const {
  auto it = table_.find(normalize_answer(question));
  return it == table_.end() ? std::string(kUnknown) : it->second;
}

// ---------------------------------------------------------------------------

HashEmbedder::HashEmbedder(int dimension) : dimension_(dimension) {
  if (dimension < 1) throw ConfigError("embedding dimension must be >= 1");
}

int HashEmbedder::bucket(std::string_view token) const {
  return static_cast<int>(fnv1a64(token) % static_cast<std::uint64_t>(dimension_));
}

std::vector<double> HashEmbedder::embed(std::string_view text) const {
  std::vector<double> v(static_cast<std::size_t>(dimension_), 0.0);
  Tokens tokens = split_whitespace(normalize_answer(text));
  if (tokens.empty()) tokens.push_back("<empty>");
  for (const auto& t : tokens) v[static_cast<std::size_t>(bucket(t))] += 1.0;
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

// ---------------------------------------------------------------------------

std::vector<std::string> IdentityRewriter::generate(const GenerationRequest& request) const {
  request.validate();
  return {request.input_text};
}

}  // namespace rewriteqa
