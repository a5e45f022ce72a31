#include "syntaxshap/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace syntaxshap {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kSyntaxShap:
      return "syntaxshap";
    case Method::kSyntaxShapW:
      return "syntaxshap_w";
    case Method::kExactShapley:
      return "exact_shapley";
    case Method::kRandom:
      return "random";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::kSyntaxShap, Method::kSyntaxShapW, Method::kExactShapley,
                 Method::kRandom}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::vector<int> ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<int> out(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) out[order[r]] = static_cast<int>(r + 1);
  return out;
}

namespace {

// f_target(S) for one run. Requests go through a MemoizedOracle: the caller's
// own when it passes one, otherwise a private one, so each pair issues two
// requests and repeated coalitions never reach the model twice.
class CoalitionValues {
 public:
  CoalitionValues(std::span<const Token> tokens, const ValueOracle& oracle, TokenId target,
                  const ExplainOptions& options)
      : target_(target), options_(options) {
    for (const auto& t : tokens) ids_.push_back(t.id);
    memo_ = dynamic_cast<const MemoizedOracle*>(&oracle);
    if (memo_ == nullptr) {
      OraclePtr borrowed(&oracle, [](const ValueOracle*) {});
      owned_ = memoized(std::move(borrowed));
      memo_ = owned_.get();
    }
  }

  double operator()(Coalition s) {
    seen_.insert(s);
    ValueRequest request;
    request.tokens = ids_;
    request.keep = s.keep_vector(ids_.size());
    request.strategy = options_.strategy;
    request.targets = {target_};
    request.seed = options_.seed;
    ValueResponse response;
    try {
      response = memo_->evaluate(request);
    } catch (const std::exception& e) {
      throw std::runtime_error("oracle failed on coalition {" + describe(s) + "}: " + e.what());
    }
    if (response.target_probs.size() != 1) {
      throw ProtocolError("oracle returned " + std::to_string(response.target_probs.size()) +
                          " probabilities for one target");
    }
    return response.target_probs[0];
  }

  double marginal(Coalition s, int feature) {
    ++pairs_;
    return (*this)(s.with(feature)) - (*this)(s);
  }

  OracleCalls calls() const { return {pairs_, seen_.size()}; }

 private:
  static std::string describe(Coalition s) {
    std::string out;
    for (int m : s.members()) {
      if (!out.empty()) out += ",";
      out += std::to_string(m);
    }
    return out;
  }

  TokenId target_;
  ExplainOptions options_;
  std::vector<TokenId> ids_;
  const MemoizedOracle* memo_ = nullptr;
  std::shared_ptr<MemoizedOracle> owned_;
  std::unordered_set<Coalition> seen_;
  std::uint64_t pairs_ = 0;
};

}  // namespace

AttributionResult syntaxshap(const TokenizedTree& tree, const ValueOracle& oracle,
                             TokenId target, const ExplainOptions& options) {
  LevelLayout layout(tree);
  // Fail on over-wide levels before any oracle traffic.
  for (int l = 1; l <= layout.depth(); ++l) count_updates(layout, l);

  auto tokens = tree.tokens();
  CoalitionValues value(tokens, oracle, target, options);
  AttributionResult result;
  result.method = Method::kSyntaxShap;
  result.target_token = target;
  result.seed = options.seed;
  result.values.resize(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const int feature = static_cast<int>(i);
    double sum = 0.0;
    for (Coalition s : feature_coalitions(layout, feature)) sum += value.marginal(s, feature);
    const auto n_updates = count_updates(layout, layout.level(feature)).count;
    result.values[i] = sum / static_cast<double>(n_updates);
  }
  result.ranks = ranks(result.values);
  result.oracle_calls = value.calls();
  return result;
}

AttributionResult syntaxshap_weighted(const TokenizedTree& tree, const ValueOracle& oracle,
                                      TokenId target, const ExplainOptions& options) {
  auto result = syntaxshap(tree, oracle, target, options);
  result.method = Method::kSyntaxShapW;
  const auto& nodes = tree.token_nodes();
  for (std::size_t i = 0; i < result.values.size(); ++i) {
    result.values[i] /= static_cast<double>(nodes[i].level);
  }
  result.ranks = ranks(result.values);
  return result;
}

AttributionResult exact_shapley(std::span<const Token> tokens, const ValueOracle& oracle,
                                TokenId target, const ExplainOptions& options) {
  const std::size_t n = tokens.size();
  if (n == 0) throw std::invalid_argument("exact Shapley needs at least one token");
  if (n > kMaxExactShapleyTokens) {
    throw SizeError(std::to_string(n) + " tokens exceed the exact Shapley limit of " +
                    std::to_string(kMaxExactShapleyTokens));
  }
  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(static_cast<double>(n - s)) -
                         std::lgamma(n + 1.0));
  }
  CoalitionValues value(tokens, oracle, target, options);
  AttributionResult result;
  result.method = Method::kExactShapley;
  result.target_token = target;
  result.seed = options.seed;
  result.values.assign(n, 0.0);
  const std::uint64_t subsets = std::uint64_t{1} << n;
  for (std::size_t i = 0; i < n; ++i) {
    const int feature = static_cast<int>(i);
    for (std::uint64_t mask = 0; mask < subsets; ++mask) {
      Coalition s(mask);
      if (s.contains(feature)) continue;
      result.values[i] += weight[s.size()] * value.marginal(s, feature);
    }
  }
  result.ranks = ranks(result.values);
  result.oracle_calls = value.calls();
  return result;
}

AttributionResult random_attribution(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("random attribution needs n >= 1");
  // Box-Muller over mt19937_64, whose output sequence is fixed by the standard.
  std::mt19937_64 engine(seed);
  auto unit = [&] { return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53; };
  AttributionResult result;
  result.method = Method::kRandom;
  result.seed = seed;
  result.values.reserve(n);
  while (result.values.size() < n) {
    const double radius = std::sqrt(-2.0 * std::log(unit()));
    const double angle = 2.0 * M_PI * unit();
    result.values.push_back(radius * std::cos(angle));
    if (result.values.size() < n) result.values.push_back(radius * std::sin(angle));
  }
  result.ranks = ranks(result.values);
  return result;
}

std::vector<double> word_level_values(const TokenizedTree& tree, std::span<const double> values) {
  if (values.size() != tree.size()) {
    throw std::invalid_argument("value count does not match token count");
  }
  std::vector<double> out(tree.tree().size(), 0.0);
  const auto& nodes = tree.token_nodes();
  for (std::size_t t = 0; t < nodes.size(); ++t) out[nodes[t].word_index - 1] += values[t];
  return out;
}

AttributionResult explain(Method method, const TokenizedTree& tree, const ValueOracle& oracle,
                          TokenId target, const ExplainOptions& options) {
  switch (method) {
    case Method::kSyntaxShap:
      return syntaxshap(tree, oracle, target, options);
    case Method::kSyntaxShapW:
      return syntaxshap_weighted(tree, oracle, target, options);
    case Method::kExactShapley: {
      auto tokens = tree.tokens();
      return exact_shapley(tokens, oracle, target, options);
    }
    case Method::kRandom: {
      auto result = random_attribution(tree.size(), options.seed);
      result.target_token = target;
      return result;
    }
  }
  throw std::invalid_argument("unknown method");
}

}  // namespace syntaxshap
