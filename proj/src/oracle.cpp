#include "syntaxshap/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "syntaxshap/coalition.hpp"

namespace syntaxshap {

std::string_view to_string(MaskStrategy strategy) {
  switch (strategy) {
    case MaskStrategy::kZeroAttention:
      return "zero_attention";
    case MaskStrategy::kRandomReplace:
      return "random_replace";
  }
  return "unknown";
}

MaskStrategy parse_mask_strategy(std::string_view name) {
  if (name == "zero_attention") return MaskStrategy::kZeroAttention;
  if (name == "random_replace") return MaskStrategy::kRandomReplace;
  throw std::invalid_argument("unknown masking strategy '" + std::string(name) + "'");
}

void ValueRequest::validate() const {
  if (keep.size() != tokens.size()) {
    throw std::invalid_argument("keep has " + std::to_string(keep.size()) +
                                " entries for " + std::to_string(tokens.size()) +
                                " tokens");
  }
  if (top_k == 0 && targets.empty()) {
    throw std::invalid_argument("request asks for neither targets nor a top-k list");
  }
}

std::vector<ScoredToken> top_k_of(std::vector<ScoredToken> candidates, std::size_t k) {
  auto order = [](const ScoredToken& a, const ScoredToken& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.id < b.id;
  };
  k = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                    candidates.end(), order);
  candidates.resize(k);
  return candidates;
}

void validate_response(const ValueRequest& request, const ValueResponse& response,
                       bool allow_unbounded) {
  auto in_range = [&](double p) {
    return std::isfinite(p) && (allow_unbounded || (p >= 0.0 && p <= 1.0));
  };
  if (response.target_probs.size() != request.targets.size()) {
    throw ProtocolError("response has " + std::to_string(response.target_probs.size()) +
                        " target probabilities for " +
                        std::to_string(request.targets.size()) + " targets");
  }
  for (double p : response.target_probs) {
    if (!in_range(p)) {
      throw ProtocolError("target probability " + std::to_string(p) + " outside [0, 1]");
    }
  }
  if (response.top.size() > request.top_k) {
    throw ProtocolError("top list longer than requested top_k");
  }
  for (std::size_t k = 0; k < response.top.size(); ++k) {
    const auto& t = response.top[k];
    if (!in_range(t.prob)) {
      throw ProtocolError("top-list probability " + std::to_string(t.prob) +
                          " outside [0, 1]");
    }
    if (k > 0) {
      const auto& prev = response.top[k - 1];
      bool ordered = prev.prob > t.prob || (prev.prob == t.prob && prev.id < t.id);
      if (!ordered) throw ProtocolError("top list is not sorted");
    }
  }
}

std::vector<std::vector<Token>> ValueOracle::tokenize(std::span<const std::string>) const {
  throw std::logic_error("oracle '" + metadata().model + "' does not tokenize");
}

// --- toy model -------------------------------------------------------------

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t combine(std::uint64_t h, std::uint64_t v) { return mix(h ^ mix(v)); }

// Uniform in [-1, 1).
double signed_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

std::uint64_t hash_text(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr double kTokenScale = 2.0;
constexpr double kInteractionScale = 1.0;
constexpr double kBiasScale = 1.0;

}  // namespace

ToyHashLm::ToyHashLm(std::uint64_t seed, std::size_t vocab_size)
    : seed_(seed), vocab_size_(vocab_size) {
  if (vocab_size_ < 2) throw std::invalid_argument("toy model needs vocab_size >= 2");
}

TokenId ToyHashLm::replacement(std::uint64_t seed, std::size_t position) const {
  auto h = combine(combine(combine(seed_, 0x7265706cULL), seed), position);
  return static_cast<TokenId>(h % vocab_size_);
}

std::vector<double> ToyHashLm::distribution(const ValueRequest& request) const {
  request.validate();
  std::vector<std::pair<std::size_t, TokenId>> present;
  for (std::size_t i = 0; i < request.tokens.size(); ++i) {
    if (request.keep[i]) {
      present.emplace_back(i, request.tokens[i]);
    } else if (request.strategy == MaskStrategy::kRandomReplace) {
      present.emplace_back(i, replacement(request.seed, i));
    }
  }
  std::uint64_t set_hash = combine(seed_, 0x736574ULL);
  for (const auto& [pos, id] : present) {
    set_hash = combine(combine(set_hash, pos), static_cast<std::uint64_t>(id));
  }

  std::vector<double> logits(vocab_size_);
  for (std::size_t c = 0; c < vocab_size_; ++c) {
    double z = kBiasScale * signed_unit(combine(combine(seed_, 0x62ULL), c));
    for (const auto& [pos, id] : present) {
      auto h = combine(combine(combine(seed_, pos), static_cast<std::uint64_t>(id)), c);
      z += kTokenScale * signed_unit(h);
    }
    z += kInteractionScale * signed_unit(combine(set_hash, c));
    logits[c] = z;
  }
  double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& z : logits) {
    z = std::exp(z - peak);
    sum += z;
  }
  for (auto& z : logits) z /= sum;
  return logits;
}

ValueResponse ToyHashLm::evaluate(const ValueRequest& request) const {
  auto probs = distribution(request);
  ValueResponse response;
  for (TokenId t : request.targets) {
    bool known = t >= 0 && static_cast<std::size_t>(t) < vocab_size_;
    response.target_probs.push_back(known ? probs[static_cast<std::size_t>(t)] : 0.0);
  }
  if (request.top_k > 0) {
    std::vector<ScoredToken> all;
    all.reserve(vocab_size_);
    for (std::size_t c = 0; c < vocab_size_; ++c) {
      all.push_back({static_cast<TokenId>(c), probs[c]});
    }
    response.top = top_k_of(std::move(all), request.top_k);
  }
  return response;
}

OracleMetadata ToyHashLm::metadata() const {
  return {"toy-hash-lm/seed=" + std::to_string(seed_), vocab_size_, kMaxFeatures};
}

std::vector<std::vector<Token>> ToyHashLm::tokenize(std::span<const std::string> words) const {
  std::vector<std::vector<Token>> out;
  for (const auto& w : words) {
    std::vector<std::string> pieces;
    if (w.size() <= 8) {
      pieces.push_back(w);
    } else {
      for (std::size_t k = 0; k < w.size(); k += 4) pieces.push_back(w.substr(k, 4));
    }
    std::vector<Token> toks;
    for (auto& p : pieces) {
      toks.push_back({static_cast<TokenId>(hash_text(p) % vocab_size_), std::move(p)});
    }
    out.push_back(std::move(toks));
  }
  return out;
}

std::shared_ptr<ToyHashLm> toy_hash_lm(std::uint64_t seed, std::size_t vocab_size) {
  return std::make_shared<ToyHashLm>(seed, vocab_size);
}

// --- combinators -------------------------------------------------------------

namespace {

class IgnoreTokenLm : public ValueOracle {
 public:
  IgnoreTokenLm(OraclePtr inner, std::size_t ignored)
      : inner_(std::move(inner)), ignored_(ignored) {}

  ValueResponse evaluate(const ValueRequest& request) const override {
    if (ignored_ >= request.keep.size()) {
      throw std::out_of_range("ignored token " + std::to_string(ignored_) +
                              " outside the request");
    }
    ValueRequest masked = request;
    masked.keep[ignored_] = false;
    return inner_->evaluate(masked);
  }
  OracleMetadata metadata() const override {
    auto meta = inner_->metadata();
    meta.model += "/ignore=" + std::to_string(ignored_);
    return meta;
  }
  std::vector<std::vector<Token>> tokenize(std::span<const std::string> words) const override {
    return inner_->tokenize(words);
  }

 private:
  OraclePtr inner_;
  std::size_t ignored_;
};

class SumOracle : public ValueOracle {
 public:
  SumOracle(OraclePtr f, OraclePtr g) : f_(std::move(f)), g_(std::move(g)) {}

  ValueResponse evaluate(const ValueRequest& request) const override {
    // Summed top lists are computed from targets only.
    ValueRequest targets_only = request;
    targets_only.top_k = 0;
    if (targets_only.targets.empty()) {
      throw std::invalid_argument("sum oracle needs explicit targets");
    }
    auto a = f_->evaluate(targets_only);
    auto b = g_->evaluate(targets_only);
    ValueResponse out;
    for (std::size_t k = 0; k < a.target_probs.size(); ++k) {
      out.target_probs.push_back(a.target_probs[k] + b.target_probs[k]);
    }
    if (request.top_k > 0) {
      std::vector<ScoredToken> scored;
      for (std::size_t k = 0; k < request.targets.size(); ++k) {
        scored.push_back({request.targets[k], out.target_probs[k]});
      }
      out.top = top_k_of(std::move(scored), request.top_k);
    }
    return out;
  }
  OracleMetadata metadata() const override {
    auto meta = f_->metadata();
    meta.model = "sum(" + meta.model + "," + g_->metadata().model + ")";
    return meta;
  }

 private:
  OraclePtr f_;
  OraclePtr g_;
};

}  // namespace

OraclePtr ignore_token_lm(OraclePtr inner, std::size_t ignored) {
  return std::make_shared<IgnoreTokenLm>(std::move(inner), ignored);
}

OraclePtr sum_oracle(OraclePtr f, OraclePtr g) {
  return std::make_shared<SumOracle>(std::move(f), std::move(g));
}

// --- memoization -------------------------------------------------------------

MemoizedOracle::MemoizedOracle(OraclePtr inner) : inner_(std::move(inner)) {}

ValueResponse MemoizedOracle::evaluate(const ValueRequest& request) const {
  Key key{request.tokens, request.keep,    request.strategy,
          request.seed,   request.targets, request.top_k};
  {
    std::lock_guard lock(mutex_);
    ++total_;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  // Evaluated outside the lock; concurrent misses on one key may both reach
  // the inner oracle, but only the first insertion counts as unique.
  auto response = inner_->evaluate(request);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = cache_.emplace(std::move(key), response);
  if (inserted) ++unique_;
  return it->second;
}

std::uint64_t MemoizedOracle::total() const {
  std::lock_guard lock(mutex_);
  return total_;
}

std::uint64_t MemoizedOracle::unique() const {
  std::lock_guard lock(mutex_);
  return unique_;
}

void MemoizedOracle::clear() {
  std::lock_guard lock(mutex_);
  cache_.clear();
  total_ = 0;
  unique_ = 0;
}

std::shared_ptr<MemoizedOracle> memoized(OraclePtr inner) {
  return std::make_shared<MemoizedOracle>(std::move(inner));
}

TokenId predict_next_token(const ValueOracle& oracle, std::span<const Token> tokens,
                           MaskStrategy strategy, std::uint64_t seed) {
  ValueRequest request;
  for (const auto& t : tokens) request.tokens.push_back(t.id);
  request.keep.assign(tokens.size(), true);
  request.strategy = strategy;
  request.top_k = 1;
  request.seed = seed;
  auto response = oracle.evaluate(request);
  if (response.top.empty()) throw ProtocolError("oracle returned an empty top list");
  return response.top.front().id;
}

}  // namespace syntaxshap
