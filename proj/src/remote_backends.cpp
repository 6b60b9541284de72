#include "rewriteqa/remote_backends.h"

#include <cmath>
#include <regex>
#include <set>

#include "httplib.h"
#include "rewriteqa/errors.h"

namespace rewriteqa {
namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix without trailing '/'
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(http://[A-Za-z0-9._-]+(:[0-9]{1,5})?)(/[^?#\s]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("malformed backend URL: '" + url + "'");
  ParsedUrl out{m[1].str(), m[3].matched ? m[3].str() : ""};
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

const json& field(const json& reply, const char* key, const std::string& route) {
  auto it = reply.find(key);
  if (it == reply.end()) {
    throw BackendError(route + ": reply is missing field '" + key + "'");
  }
  return *it;
}

}  // namespace

void RemoteEndpoint::validate() const {
  parse_url(url);
  if (timeout_ms <= 0) throw ConfigError("backend timeout_ms must be > 0");
  if (retries < 0) throw ConfigError("backend retries must be >= 0");
}

json post_json(const RemoteEndpoint& endpoint, const std::string& path, const json& body) {
  const ParsedUrl url = parse_url(endpoint.url);
  const std::string route = endpoint.url + path;
  httplib::Client client(url.origin);
  const auto timeout_s = endpoint.timeout_ms / 1000;
  const auto timeout_us = (endpoint.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(timeout_s, timeout_us);
  client.set_read_timeout(timeout_s, timeout_us);
  client.set_write_timeout(timeout_s, timeout_us);

  std::string last_error;
  for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
    auto res = client.Post(url.prefix + path, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendError(route + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) {
      throw BackendError(route + ": reply is not a JSON object");
    }
    return reply;
  }
  throw BackendError(route + ": " + last_error + " after " +
                     std::to_string(endpoint.retries + 1) + " attempt(s)");
}

// ---------------------------------------------------------------------------

RemoteScorer::RemoteScorer(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
}

SequenceScore RemoteScorer::score_sequence(std::string_view text) const {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw InvalidInputError("cannot score empty text");
  }
  json reply = post_json(endpoint_, "/score", {{"text", text}});
  const json& total = field(reply, "total_logprob", "/score");
  const json& count = field(reply, "token_count", "/score");
  if (!total.is_number() || !std::isfinite(total.get<double>())) {
    throw BackendError("/score: total_logprob must be a finite number");
  }
  if (!count.is_number_integer() || count.get<long long>() < 1) {
    throw BackendError("/score: token_count must be a positive integer");
  }
  return SequenceScore::make(total.get<double>(), count.get<int>());
}

RemoteQA::RemoteQA(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
}

std::string RemoteQA::answer(std::string_view question) const {
  json reply = post_json(endpoint_, "/answer", {{"question", question}});
  const json& a = field(reply, "answer", "/answer");
  if (!a.is_string()) throw BackendError("/answer: answer must be a string");
  return a.get<std::string>();
}

RemoteEmbedder::RemoteEmbedder(RemoteEndpoint endpoint, int dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {
  endpoint_.validate();
  if (dimension < 1) throw ConfigError("embedding dimension must be >= 1");
}

std::vector<double> RemoteEmbedder::embed(std::string_view text) const {
  json reply = post_json(endpoint_, "/embed", {{"text", text}});
  const json& v = field(reply, "vector", "/embed");
  if (!v.is_array()) throw BackendError("/embed: vector must be an array");
  if (v.size() != static_cast<std::size_t>(dimension_)) {
    throw ConfigError("/embed: expected dimension " + std::to_string(dimension_) + ", got " +
                      std::to_string(v.size()));
  }
  std::vector<double> out;
  out.reserve(v.size());
  double norm = 0;
  for (const auto& x : v) {
    if (!x.is_number()) throw BackendError("/embed: vector entries must be numbers");
    out.push_back(x.get<double>());
    norm += out.back() * out.back();
  }
  if (!(norm > 0) || !std::isfinite(norm)) throw BackendError("/embed: vector has zero norm");
  norm = std::sqrt(norm);
  for (double& x : out) x /= norm;
  return out;
}

RemoteRewriter::RemoteRewriter(RemoteEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  endpoint_.validate();
}

std::vector<std::string> RemoteRewriter::generate(const GenerationRequest& request) const {
  request.validate();
  json reply = post_json(endpoint_, "/generate",
                         {{"input", request.input_text},
                          {"k", request.k},
                          {"beam_width", request.beam_width},
                          {"seed", request.seed}});
  const json& c = field(reply, "candidates", "/generate");
  if (!c.is_array()) throw BackendError("/generate: candidates must be an array");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& x : c) {
    if (!x.is_string()) throw BackendError("/generate: candidates must be strings");
    auto text = x.get<std::string>();
    if (text.empty()) continue;
    if (seen.insert(text).second) out.push_back(std::move(text));
    if (out.size() == static_cast<std::size_t>(request.k)) break;
  }
  return out;
}

double RemoteRewriter::update(std::string_view input_text,
                              const std::vector<WeightedCandidate>& candidates) {
  if (candidates.empty()) throw InvalidInputError("update needs at least one candidate");
  json items = json::array();
  for (const auto& c : candidates) items.push_back({{"text", c.text}, {"weight", c.weight}});
  json reply = post_json(endpoint_, "/update", {{"input", input_text}, {"candidates", items}});
  const json& loss = field(reply, "loss", "/update");
  if (!loss.is_number()) throw BackendError("/update: loss must be a number");
  return loss.get<double>();
}

std::string RemoteRewriter::snapshot() const {
  throw BackendError("remote rewriter parameters live on the server; snapshot unsupported");
}

void RemoteRewriter::restore(const std::string&) {
  throw BackendError("remote rewriter parameters live on the server; restore unsupported");
}

}  // namespace rewriteqa
