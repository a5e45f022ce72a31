#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "syntaxshap/deptree.hpp"

namespace syntaxshap {

inline constexpr std::size_t kMaxFeatures = 64;
inline constexpr std::size_t kMaxLevelWidth = 20;

// Raised when a sentence is too large for exact enumeration.
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A set of 0-based feature (token) indices.
class Coalition {
 public:
  constexpr Coalition() = default;
  constexpr explicit Coalition(std::uint64_t mask) : mask_(mask) {}
  static Coalition of(std::initializer_list<int> members) {
    Coalition c;
    for (int m : members) c.insert(m);
    return c;
  }

  constexpr bool contains(int i) const { return (mask_ >> i) & 1U; }
  constexpr void insert(int i) { mask_ |= std::uint64_t{1} << i; }
  constexpr void erase(int i) { mask_ &= ~(std::uint64_t{1} << i); }
  constexpr Coalition with(int i) const { return Coalition(mask_ | (std::uint64_t{1} << i)); }
  constexpr Coalition without(int i) const { return Coalition(mask_ & ~(std::uint64_t{1} << i)); }
  constexpr std::size_t size() const { return std::popcount(mask_); }
  constexpr bool empty() const { return mask_ == 0; }
  constexpr std::uint64_t mask() const { return mask_; }
  std::vector<int> members() const;
  // keep[i] == contains(i) for i < n.
  std::vector<bool> keep_vector(std::size_t n) const;

  constexpr bool operator==(const Coalition&) const = default;
  constexpr auto operator<=>(const Coalition&) const = default;

 private:
  std::uint64_t mask_ = 0;
};

// Feature levels of a sentence, independent of whether features are words or
// model tokens. Levels run 1..depth with every level occupied.
class LevelLayout {
 public:
  explicit LevelLayout(std::vector<int> levels);
  explicit LevelLayout(const DependencyTree& tree);
  explicit LevelLayout(const TokenizedTree& tree);

  std::size_t size() const { return levels_.size(); }
  int depth() const { return static_cast<int>(level_sets_.size()); }
  int level(int feature) const { return levels_.at(feature); }
  std::span<const int> levels() const { return levels_; }
  // X_l as 0-based feature indices, ascending. l in [1, depth].
  const std::vector<int>& level_set(int l) const;
  // n_l, with n_0 = 0.
  std::size_t width(int l) const;
  // X_{<l} as a coalition.
  Coalition above(int l) const;
  Coalition all() const;

 private:
  std::vector<int> levels_;
  std::vector<std::vector<int>> level_sets_;
};

struct CoalitionFamily {
  int level = 0;
  std::vector<Coalition> coalitions;
};

// Lazily enumerates base ∪ σ segment by segment, σ walking the subsets of the
// segment's free members in lexicographic order of their sorted members.
class CoalitionRange {
 public:
  struct Segment {
    Coalition base;
    std::vector<int> free;  // ascending
    bool include_empty = false;  // emit base itself before the non-empty σ
  };

  class iterator {
   public:
    using value_type = Coalition;
    using difference_type = std::ptrdiff_t;
    iterator() = default;
    iterator(const CoalitionRange* range, bool at_end);
    Coalition operator*() const { return current_; }
    iterator& operator++();
    iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    bool operator==(const iterator& other) const {
      return segment_ == other.segment_ && stack_ == other.stack_;
    }

   private:
    void settle();
    const CoalitionRange* range_ = nullptr;
    std::size_t segment_ = 0;
    std::vector<int> stack_;  // positions into the segment's free list
    Coalition current_;
  };

  explicit CoalitionRange(std::vector<Segment> segments)
      : segments_(std::move(segments)) {}

  iterator begin() const { return iterator(this, false); }
  iterator end() const { return iterator(this, true); }
  std::vector<Coalition> collect() const;

 private:
  std::vector<Segment> segments_;
};

// 𝔖_l without the σ=∅ duplicate. l = 0 gives {∅}. Throws std::out_of_range.
CoalitionFamily coalitions_at_level(const LevelLayout& layout, int level);

// The coalitions feature i joins: every 𝔖_p for p < l_i, then level-l_i
// coalitions not containing i. Length equals count_updates(l_i).
CoalitionRange feature_coalitions(const LevelLayout& layout, int feature);
std::vector<Coalition> coalitions_for_feature(const LevelLayout& layout, int feature);

struct UpdateCount {
  int level = 0;
  std::uint64_t count = 0;
};

// N_l = Σ_{p<l} 2^{n_p} + 2^{n_l - 1} - l.
UpdateCount count_updates(const LevelLayout& layout, int level);

struct PredictedEvaluations {
  std::uint64_t pair_count = 0;       // Σ_l n_l N_l
  double naive_shapley_count = 0.0;   // n 2^{n-1}, exact in a double
};

PredictedEvaluations predicted_evaluations(const LevelLayout& layout);

}  // namespace syntaxshap

template <>
struct std::hash<syntaxshap::Coalition> {
  std::size_t operator()(const syntaxshap::Coalition& c) const noexcept {
    return std::hash<std::uint64_t>{}(c.mask());
  }
};
