#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "syntaxshap/deptree.hpp"

namespace syntaxshap {

using TokenId = std::int64_t;

enum class MaskStrategy { kZeroAttention, kRandomReplace };

std::string_view to_string(MaskStrategy strategy);
// Accepts "zero_attention" and "random_replace"; throws std::invalid_argument.
MaskStrategy parse_mask_strategy(std::string_view name);

// f_y(x̃) query: `keep[i]` says whether token i is present; masked tokens are
// handled by the oracle according to `strategy`.
struct ValueRequest {
  std::vector<TokenId> tokens;
  std::vector<bool> keep;
  MaskStrategy strategy = MaskStrategy::kZeroAttention;
  std::vector<TokenId> targets;
  std::size_t top_k = 0;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument when the request breaks its invariants.
  void validate() const;
  bool operator==(const ValueRequest&) const = default;
};

struct ScoredToken {
  TokenId id = 0;
  double prob = 0.0;
  bool operator==(const ScoredToken&) const = default;
};

struct ValueResponse {
  std::vector<double> target_probs;  // aligned to ValueRequest::targets
  std::vector<ScoredToken> top;      // descending prob, ties by smaller id

  bool operator==(const ValueResponse&) const = default;
};

// Thrown when a response breaks the contract (probabilities outside [0, 1],
// wrong lengths, unsorted top list).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checks `response` against `request`. `allow_unbounded` skips the [0, 1]
// range check (sums of oracles).
void validate_response(const ValueRequest& request, const ValueResponse& response,
                       bool allow_unbounded = false);

// Sorts candidates into the top-list order and truncates to k.
std::vector<ScoredToken> top_k_of(std::vector<ScoredToken> candidates, std::size_t k);

struct OracleMetadata {
  std::string model;
  std::size_t vocab_size = 0;
  std::size_t max_tokens = 0;
};

// The value function of the attribution game. Implementations are pure for a
// given request and safe to call from several threads.
class ValueOracle {
 public:
  virtual ~ValueOracle() = default;
  virtual ValueResponse evaluate(const ValueRequest& request) const = 0;
  virtual OracleMetadata metadata() const = 0;
  // Model tokenization of each word. The default throws std::logic_error.
  virtual std::vector<std::vector<Token>> tokenize(std::span<const std::string> words) const;
};

using OraclePtr = std::shared_ptr<const ValueOracle>;

// Deterministic stand-in language model. Logits for candidate c are a sum of
// hashed weights over kept (position, token) pairs plus a hashed interaction
// term over the whole kept set, so every kept token moves the distribution.
// Under random_replace masked positions hold a token drawn from a hash of
// (seed, position).
class ToyHashLm : public ValueOracle {
 public:
  ToyHashLm(std::uint64_t seed, std::size_t vocab_size);

  ValueResponse evaluate(const ValueRequest& request) const override;
  OracleMetadata metadata() const override;
  // One token per word; words longer than eight bytes are split into pieces
  // of at most four bytes. Ids are a hash of the piece text.
  std::vector<std::vector<Token>> tokenize(std::span<const std::string> words) const override;

  // Full next-token distribution for a request.
  std::vector<double> distribution(const ValueRequest& request) const;
  // Token that replaces a masked position under random_replace.
  TokenId replacement(std::uint64_t seed, std::size_t position) const;

 private:
  std::uint64_t seed_;
  std::size_t vocab_size_;
};

std::shared_ptr<ToyHashLm> toy_hash_lm(std::uint64_t seed, std::size_t vocab_size);

// Delegates to `inner` with keep[ignored] forced to false.
OraclePtr ignore_token_lm(OraclePtr inner, std::size_t ignored);

// Pointwise sum of target probabilities. Values may exceed 1; only meant for
// additivity checks. The top list is recomputed from the summed targets.
OraclePtr sum_oracle(OraclePtr f, OraclePtr g);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::string auth_token;  // sent as a bearer token when non-empty
};

// HTTP client for the scoring service:
//   GET  /v1/meta      -> {"model", "vocab_size", "max_tokens"}
//   POST /v1/score     ValueRequest -> ValueResponse
//   POST /v1/tokenize  {"words": [...]} -> {"tokens": [[{"id","text"}...]...]}
// /v1/tokenize is optional on the server side.
class RemoteOracle : public ValueOracle {
 public:
  RemoteOracle(std::string endpoint, RemoteOptions options);
  ~RemoteOracle() override;

  ValueResponse evaluate(const ValueRequest& request) const override;
  OracleMetadata metadata() const override;
  std::vector<std::vector<Token>> tokenize(std::span<const std::string> words) const override;

 private:
  std::string post(const std::string& path, const std::string& body) const;
  std::string get(const std::string& path) const;

  std::string host_;
  int port_ = 80;
  std::string base_path_;
  RemoteOptions options_;
};

std::shared_ptr<RemoteOracle> remote_oracle(const std::string& endpoint,
                                            RemoteOptions options = {});

// Caching wrapper. `total()` counts every evaluate call, `unique()` counts
// calls that reached the inner oracle. Errors are not cached.
class MemoizedOracle : public ValueOracle {
 public:
  explicit MemoizedOracle(OraclePtr inner);

  ValueResponse evaluate(const ValueRequest& request) const override;
  OracleMetadata metadata() const override { return inner_->metadata(); }
  std::vector<std::vector<Token>> tokenize(std::span<const std::string> words) const override {
    return inner_->tokenize(words);
  }

  std::uint64_t total() const;
  std::uint64_t unique() const;
  // Drops cached values and resets both counters.
  void clear();

 private:
  struct Key {
    std::vector<TokenId> tokens;
    std::vector<bool> keep;
    MaskStrategy strategy;
    std::uint64_t seed;
    std::vector<TokenId> targets;
    std::size_t top_k;
    auto operator<=>(const Key&) const = default;
  };

  OraclePtr inner_;
  mutable std::mutex mutex_;
  mutable std::map<Key, ValueResponse> cache_;
  mutable std::uint64_t total_ = 0;
  mutable std::uint64_t unique_ = 0;
};

std::shared_ptr<MemoizedOracle> memoized(OraclePtr inner);

// Top-1 token for the unmasked sentence.
TokenId predict_next_token(const ValueOracle& oracle, std::span<const Token> tokens,
                           MaskStrategy strategy, std::uint64_t seed);

}  // namespace syntaxshap
