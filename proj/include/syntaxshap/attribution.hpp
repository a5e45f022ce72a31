#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "syntaxshap/coalition.hpp"
#include "syntaxshap/deptree.hpp"
#include "syntaxshap/oracle.hpp"

namespace syntaxshap {

enum class Method { kSyntaxShap, kSyntaxShapW, kExactShapley, kRandom };

std::string_view to_string(Method method);
// "syntaxshap", "syntaxshap_w", "exact_shapley", "random".
Method parse_method(std::string_view name);

struct OracleCalls {
  std::uint64_t pairs = 0;   // marginal terms f(S ∪ {i}) - f(S)
  std::uint64_t unique = 0;  // distinct coalitions sent to the oracle
};

struct AttributionResult {
  Method method = Method::kSyntaxShap;
  TokenId target_token = 0;
  std::vector<double> values;
  std::vector<int> ranks;
  OracleCalls oracle_calls;
  std::uint64_t seed = 0;
};

struct ExplainOptions {
  MaskStrategy strategy = MaskStrategy::kZeroAttention;
  std::uint64_t seed = 0;
};

// Average marginal contribution of each token over the coalitions its level
// allows. The divisor is N_{l_i}.
AttributionResult syntaxshap(const TokenizedTree& tree, const ValueOracle& oracle,
                             TokenId target, const ExplainOptions& options = {});

// syntaxshap values scaled by 1 / l_i.
AttributionResult syntaxshap_weighted(const TokenizedTree& tree, const ValueOracle& oracle,
                                      TokenId target, const ExplainOptions& options = {});

inline constexpr std::size_t kMaxExactShapleyTokens = 12;

// Classic Shapley values by full subset enumeration. At most 12 tokens.
AttributionResult exact_shapley(std::span<const Token> tokens, const ValueOracle& oracle,
                                TokenId target, const ExplainOptions& options = {});

// i.i.d. standard normal values from a seeded generator.
AttributionResult random_attribution(std::size_t n, std::uint64_t seed);

// Rank 1 for the largest value; equal values rank the smaller index first.
std::vector<int> ranks(std::span<const double> values);

// Sum of subtoken values per word, in word order.
std::vector<double> word_level_values(const TokenizedTree& tree, std::span<const double> values);

// Runs one method end to end.
AttributionResult explain(Method method, const TokenizedTree& tree, const ValueOracle& oracle,
                          TokenId target, const ExplainOptions& options = {});

}  // namespace syntaxshap
