#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <thread>

#include "syntaxshap/oracle.hpp"
#include "syntaxshap/wire.hpp"

namespace syntaxshap {

using nlohmann::json;

namespace {

std::string excerpt(std::string_view payload) {
  constexpr std::size_t kMax = 200;
  if (payload.size() <= kMax) return std::string(payload);
  return std::string(payload.substr(0, kMax)) + "...";
}

template <typename T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw ProtocolError(std::string("missing field '") + name + "' in " + excerpt(j.dump()));
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ProtocolError(std::string("field '") + name + "' has the wrong type in " +
                        excerpt(j.dump()));
  }
}

}  // namespace

json to_json(const ValueRequest& request) {
  return {{"tokens", request.tokens},
          {"keep", request.keep},
          {"strategy", std::string(to_string(request.strategy))},
          {"targets", request.targets},
          {"top_k", request.top_k},
          {"seed", request.seed}};
}

ValueRequest request_from_json(const json& j) {
  ValueRequest r;
  r.tokens = field<std::vector<TokenId>>(j, "tokens");
  r.keep = field<std::vector<bool>>(j, "keep");
  try {
    r.strategy = parse_mask_strategy(field<std::string>(j, "strategy"));
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(e.what());
  }
  r.targets = field<std::vector<TokenId>>(j, "targets");
  r.top_k = field<std::size_t>(j, "top_k");
  r.seed = field<std::uint64_t>(j, "seed");
  return r;
}

json to_json(const ValueResponse& response) {
  json top = json::array();
  for (const auto& t : response.top) top.push_back({{"id", t.id}, {"prob", t.prob}});
  return {{"target_probs", response.target_probs}, {"top", std::move(top)}};
}

ValueResponse response_from_json(const json& j) {
  ValueResponse r;
  r.target_probs = field<std::vector<double>>(j, "target_probs");
  auto top = field<json>(j, "top");
  if (!top.is_array()) throw ProtocolError("field 'top' is not a list");
  for (const auto& item : top) {
    r.top.push_back({field<TokenId>(item, "id"), field<double>(item, "prob")});
  }
  return r;
}

json to_json(const OracleMetadata& meta) {
  return {{"model", meta.model},
          {"vocab_size", meta.vocab_size},
          {"max_tokens", meta.max_tokens}};
}

OracleMetadata metadata_from_json(const json& j) {
  OracleMetadata meta;
  meta.model = field<std::string>(j, "model");
  meta.vocab_size = field<std::size_t>(j, "vocab_size");
  meta.max_tokens = j.contains("max_tokens") ? field<std::size_t>(j, "max_tokens") : 0;
  return meta;
}

// --- client ------------------------------------------------------------------

RemoteOracle::RemoteOracle(std::string endpoint, RemoteOptions options)
    : options_(std::move(options)) {
  std::string_view rest = endpoint;
  if (rest.starts_with("http://")) {
    rest.remove_prefix(7);
  } else if (rest.find("://") != std::string_view::npos) {
    throw std::invalid_argument("only http:// endpoints are supported: " + endpoint);
  }
  auto slash = rest.find('/');
  std::string_view authority = rest.substr(0, slash);
  if (slash != std::string_view::npos) base_path_ = rest.substr(slash);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    auto port = authority.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), port_);
    if (ec != std::errc() || ptr != port.data() + port.size()) {
      throw std::invalid_argument("bad port in endpoint " + endpoint);
    }
    authority = authority.substr(0, colon);
  }
  host_ = authority;
  if (host_.empty()) throw std::invalid_argument("endpoint has no host: " + endpoint);
}

RemoteOracle::~RemoteOracle() = default;

namespace {

template <typename Send>
std::string with_retries(const std::string& what, int retries, Send send) {
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50 << std::min(attempt, 6)));
    }
    httplib::Result res = send();
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    throw ProtocolError(what + " returned HTTP " + std::to_string(res->status) + ": " +
                        excerpt(res->body));
  }
  throw TransportError(what + " failed after " + std::to_string(retries + 1) +
                       " attempts: " + last_error);
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error&) {
    throw ProtocolError("response is not JSON: " + excerpt(body));
  }
}

}  // namespace

std::string RemoteOracle::post(const std::string& path, const std::string& body) const {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  if (!options_.auth_token.empty()) client.set_bearer_token_auth(options_.auth_token);
  const std::string url = base_path_ + path;
  return with_retries("POST " + url, options_.retries,
                      [&] { return client.Post(url, body, "application/json"); });
}

std::string RemoteOracle::get(const std::string& path) const {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  if (!options_.auth_token.empty()) client.set_bearer_token_auth(options_.auth_token);
  const std::string url = base_path_ + path;
  return with_retries("GET " + url, options_.retries, [&] { return client.Get(url); });
}

ValueResponse RemoteOracle::evaluate(const ValueRequest& request) const {
  request.validate();
  auto body = post("/v1/score", to_json(request).dump());
  auto response = response_from_json(parse_body(body));
  try {
    validate_response(request, response);
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string(e.what()) + " in " + excerpt(body));
  }
  return response;
}

OracleMetadata RemoteOracle::metadata() const {
  return metadata_from_json(parse_body(get("/v1/meta")));
}

std::vector<std::vector<Token>> RemoteOracle::tokenize(std::span<const std::string> words) const {
  json req = {{"words", std::vector<std::string>(words.begin(), words.end())}};
  auto j = parse_body(post("/v1/tokenize", req.dump()));
  auto lists = field<json>(j, "tokens");
  if (!lists.is_array() || lists.size() != words.size()) {
    throw ProtocolError("tokenize returned " + std::to_string(lists.size()) +
                        " token lists for " + std::to_string(words.size()) + " words");
  }
  std::vector<std::vector<Token>> out;
  for (const auto& list : lists) {
    std::vector<Token> toks;
    for (const auto& t : list) {
      toks.push_back({field<TokenId>(t, "id"), field<std::string>(t, "text")});
    }
    if (toks.empty()) throw ProtocolError("tokenize returned an empty token list");
    out.push_back(std::move(toks));
  }
  return out;
}

std::shared_ptr<RemoteOracle> remote_oracle(const std::string& endpoint, RemoteOptions options) {
  return std::make_shared<RemoteOracle>(endpoint, std::move(options));
}

}  // namespace syntaxshap
