#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "syntaxshap/attribution.hpp"
#include "syntaxshap/coalition.hpp"
#include "syntaxshap/deptree.hpp"
#include "syntaxshap/oracle.hpp"

namespace fixtures {

using namespace syntaxshap;

enum class Shape { kChain, kStar, kBushy, kRandom };

// Head links (1-based, 0 = root) of a tree with n words. Word order is a
// random permutation of the construction order except for kChain.
std::vector<int> random_heads(std::mt19937_64& rng, int n, Shape shape);

DependencyTree tree_from_heads(const std::vector<int>& heads);
TokenizedTree tokens_from_heads(const std::vector<int>& heads);

// Levels by breadth-first search from the root, independent of deptree.
std::vector<int> bfs_levels(const std::vector<int>& heads);

// Value oracle driven by f(keep) for the first target; other targets get
// 1 - f. Top lists hold the requested targets.
class FunctionOracle : public ValueOracle {
 public:
  using Fn = std::function<double(const std::vector<bool>&)>;
  explicit FunctionOracle(Fn fn, std::string name = "function") : fn_(std::move(fn)), name_(std::move(name)) {}
  ValueResponse evaluate(const ValueRequest& request) const override;
  OracleMetadata metadata() const override { return {name_, 1 << 20, 64}; }

 private:
  Fn fn_;
  std::string name_;
};

// f(S) read from a table of 2^n uniform draws.
std::shared_ptr<FunctionOracle> tabulated_oracle(std::size_t n, std::uint64_t seed);
std::shared_ptr<FunctionOracle> table_oracle(std::vector<double> table);

// Records every distinct keep vector it is asked about.
class CollectingOracle : public ValueOracle {
 public:
  explicit CollectingOracle(OraclePtr inner) : inner_(std::move(inner)) {}
  ValueResponse evaluate(const ValueRequest& request) const override;
  OracleMetadata metadata() const override { return inner_->metadata(); }
  std::size_t distinct() const;
  std::size_t calls() const;

 private:
  OraclePtr inner_;
  mutable std::mutex mutex_;
  mutable std::set<std::vector<bool>> seen_;
  mutable std::size_t calls_ = 0;
};

std::uint64_t mask_of(const std::vector<bool>& keep);

struct Reference {
  std::vector<double> values;
  std::vector<std::uint64_t> updates;   // N_i per feature
  std::set<std::uint64_t> evaluated;    // every S and S ∪ {i}
};

// SyntaxShap straight from the definition: scan all 2^n subsets and keep the
// ones equal to X_{<p} ∪ σ for some p ≤ l_i, σ ⊆ X_p, excluding i.
Reference reference_syntaxshap(const std::vector<int>& levels,
                               const std::function<double(std::uint64_t)>& f);

// Shapley values as the mean marginal contribution over all n! orderings.
std::vector<double> permutation_shapley(std::size_t n,
                                        const std::function<double(std::uint64_t)>& f);

}  // namespace fixtures
