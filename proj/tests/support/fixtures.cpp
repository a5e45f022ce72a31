#include "fixtures.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

namespace fixtures {

std::vector<int> random_heads(std::mt19937_64& rng, int n, Shape shape) {
  // parent[k] over construction order 0..n-1, node 0 is the root.
  std::vector<int> parent(n, -1);
  for (int k = 1; k < n; ++k) {
    switch (shape) {
      case Shape::kChain:
        parent[k] = k - 1;
        break;
      case Shape::kStar:
        parent[k] = 0;
        break;
      case Shape::kBushy:
        parent[k] = (k - 1) / 2;
        break;
      case Shape::kRandom:
        parent[k] = std::uniform_int_distribution<int>(0, k - 1)(rng);
        break;
    }
  }
  std::vector<int> position(n);
  std::iota(position.begin(), position.end(), 0);
  if (shape != Shape::kChain) std::shuffle(position.begin(), position.end(), rng);
  std::vector<int> heads(n, 0);
  for (int k = 0; k < n; ++k) {
    heads[position[k]] = parent[k] < 0 ? 0 : position[parent[k]] + 1;
  }
  return heads;
}

DependencyTree tree_from_heads(const std::vector<int>& heads) {
  std::vector<WordNode> nodes;
  for (std::size_t k = 0; k < heads.size(); ++k) {
    WordNode w;
    w.word_index = static_cast<int>(k + 1);
    w.text = "w" + std::to_string(k + 1);
    w.head_index = heads[k];
    w.deprel = heads[k] == 0 ? "root" : "dep";
    nodes.push_back(w);
  }
  return DependencyTree(std::move(nodes));
}

TokenizedTree tokens_from_heads(const std::vector<int>& heads) {
  return identity_tokens(tree_from_heads(heads));
}

std::vector<int> bfs_levels(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  std::vector<std::vector<int>> children(n + 1);
  for (int k = 0; k < n; ++k) children[heads[k]].push_back(k + 1);
  std::vector<int> level(n + 1, 0);
  std::deque<int> queue = {0};
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int c : children[u]) {
      level[c] = level[u] + 1;
      queue.push_back(c);
    }
  }
  return {level.begin() + 1, level.end()};
}

ValueResponse FunctionOracle::evaluate(const ValueRequest& request) const {
  request.validate();
  const double v = fn_(request.keep);
  ValueResponse out;
  std::vector<ScoredToken> candidates;
  for (std::size_t k = 0; k < request.targets.size(); ++k) {
    const double p = k == 0 ? v : 1.0 - v;
    out.target_probs.push_back(p);
    candidates.push_back({request.targets[k], p});
  }
  if (request.top_k > 0 && candidates.empty()) candidates.push_back({0, v});
  out.top = top_k_of(std::move(candidates), request.top_k);
  return out;
}

std::uint64_t mask_of(const std::vector<bool>& keep) {
  std::uint64_t m = 0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i]) m |= std::uint64_t{1} << i;
  }
  return m;
}

std::shared_ptr<FunctionOracle> table_oracle(std::vector<double> table) {
  return std::make_shared<FunctionOracle>(
      [table = std::move(table)](const std::vector<bool>& keep) { return table.at(mask_of(keep)); },
      "table");
}

std::shared_ptr<FunctionOracle> tabulated_oracle(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> table(std::size_t{1} << n);
  for (auto& v : table) v = u(rng);
  return table_oracle(std::move(table));
}

ValueResponse CollectingOracle::evaluate(const ValueRequest& request) const {
  {
    std::lock_guard lock(mutex_);
    seen_.insert(request.keep);
    ++calls_;
  }
  return inner_->evaluate(request);
}

std::size_t CollectingOracle::distinct() const {
  std::lock_guard lock(mutex_);
  return seen_.size();
}

std::size_t CollectingOracle::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

Reference reference_syntaxshap(const std::vector<int>& levels,
                               const std::function<double(std::uint64_t)>& f) {
  const std::size_t n = levels.size();
  const std::uint64_t subsets = std::uint64_t{1} << n;
  auto words = [&](auto pred) {
    std::uint64_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (pred(levels[j])) m |= std::uint64_t{1} << j;
    }
    return m;
  };
  Reference ref;
  ref.values.assign(n, 0.0);
  ref.updates.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    const int li = levels[i];
    for (std::uint64_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      bool allowed = false;
      for (int p = 0; p <= li && !allowed; ++p) {
        const std::uint64_t below = words([&](int l) { return l < p; });
        const std::uint64_t at = words([&](int l) { return l == p; });
        // S = X_{<p} ∪ σ with σ ⊆ X_p (and i ∉ σ at p = l_i, already true).
        allowed = (s & below) == below && (s & ~(below | at)) == 0;
      }
      if (!allowed) continue;
      ++ref.updates[i];
      ref.values[i] += f(s | bit) - f(s);
      ref.evaluated.insert(s);
      ref.evaluated.insert(s | bit);
    }
    ref.values[i] /= static_cast<double>(ref.updates[i]);
  }
  return ref;
}

std::vector<double> permutation_shapley(std::size_t n,
                                        const std::function<double(std::uint64_t)>& f) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> sum(n, 0.0);
  std::size_t count = 0;
  do {
    std::uint64_t s = 0;
    for (int j : order) {
      sum[j] += f(s | (std::uint64_t{1} << j)) - f(s);
      s |= std::uint64_t{1} << j;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& v : sum) v /= static_cast<double>(count);
  return sum;
}

}  // namespace fixtures
