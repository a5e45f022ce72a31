#include "syntaxshap/coalition.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace syntaxshap {

std::vector<int> Coalition::members() const {
  std::vector<int> out;
  for (std::uint64_t m = mask_; m != 0; m &= m - 1) {
    out.push_back(std::countr_zero(m));
  }
  return out;
}

std::vector<bool> Coalition::keep_vector(std::size_t n) const {
  std::vector<bool> keep(n);
  for (std::size_t i = 0; i < n; ++i) keep[i] = contains(static_cast<int>(i));
  return keep;
}

LevelLayout::LevelLayout(std::vector<int> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("layout needs at least one feature");
  if (levels_.size() > kMaxFeatures) {
    throw SizeError(std::to_string(levels_.size()) + " features exceed the limit of " +
                    std::to_string(kMaxFeatures));
  }
  int depth = 0;
  for (int l : levels_) {
    if (l < 1) throw std::invalid_argument("feature levels start at 1");
    depth = std::max(depth, l);
  }
  level_sets_.assign(depth, {});
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    level_sets_[levels_[i] - 1].push_back(static_cast<int>(i));
  }
  for (int l = 1; l <= depth; ++l) {
    if (level_sets_[l - 1].empty()) {
      throw std::invalid_argument("level " + std::to_string(l) + " has no features");
    }
  }
}

LevelLayout::LevelLayout(const DependencyTree& tree)
    : LevelLayout(std::vector<int>(tree.levels().begin(), tree.levels().end())) {}

LevelLayout::LevelLayout(const TokenizedTree& tree) : LevelLayout(tree.levels()) {}

const std::vector<int>& LevelLayout::level_set(int l) const {
  if (l < 1 || l > depth()) {
    throw std::out_of_range("level " + std::to_string(l) + " outside [1, " +
                            std::to_string(depth()) + "]");
  }
  return level_sets_[l - 1];
}

std::size_t LevelLayout::width(int l) const {
  return l == 0 ? 0 : level_set(l).size();
}

Coalition LevelLayout::above(int l) const {
  Coalition c;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (levels_[i] < l) c.insert(static_cast<int>(i));
  }
  return c;
}

Coalition LevelLayout::all() const { return above(depth() + 1); }

// --- lazy enumeration ------------------------------------------------------

CoalitionRange::iterator::iterator(const CoalitionRange* range, bool at_end)
    : range_(range) {
  if (at_end) {
    segment_ = range_->segments_.size();
    return;
  }
  segment_ = 0;
  settle();
}

// Positions the iterator on the first element of segment_ or a later one.
void CoalitionRange::iterator::settle() {
  const auto& segs = range_->segments_;
  while (segment_ < segs.size()) {
    const auto& seg = segs[segment_];
    stack_.clear();
    if (seg.include_empty) {
      current_ = seg.base;
      return;
    }
    if (!seg.free.empty()) {
      stack_.push_back(0);
      current_ = seg.base.with(seg.free[0]);
      return;
    }
    ++segment_;
  }
  stack_.clear();
}

CoalitionRange::iterator& CoalitionRange::iterator::operator++() {
  const auto& seg = range_->segments_[segment_];
  const int m = static_cast<int>(seg.free.size());
  if (stack_.empty()) {
    // On the segment's empty subset.
    if (m == 0) {
      ++segment_;
      settle();
      return *this;
    }
    stack_.push_back(0);
  } else if (stack_.back() < m - 1) {
    stack_.push_back(stack_.back() + 1);
  } else {
    stack_.pop_back();
    if (stack_.empty()) {
      ++segment_;
      settle();
      return *this;
    }
    ++stack_.back();
  }
  Coalition c = seg.base;
  for (int pos : stack_) c.insert(seg.free[pos]);
  current_ = c;
  return *this;
}

std::vector<Coalition> CoalitionRange::collect() const {
  std::vector<Coalition> out;
  for (auto c : *this) out.push_back(c);
  return out;
}

namespace {

void check_width(const LevelLayout& layout, int level) {
  if (level >= 1 && layout.width(level) > kMaxLevelWidth) {
    throw SizeError("level " + std::to_string(level) + " holds " +
                    std::to_string(layout.width(level)) +
                    " features; exact enumeration is capped at " +
                    std::to_string(kMaxLevelWidth));
  }
}

void check_level(const LevelLayout& layout, int level) {
  if (level < 0 || level > layout.depth()) {
    throw std::out_of_range("level " + std::to_string(level) + " outside [0, " +
                            std::to_string(layout.depth()) + "]");
  }
}

CoalitionRange::Segment level_segment(const LevelLayout& layout, int level) {
  if (level == 0) return {Coalition{}, {}, true};
  return {layout.above(level), layout.level_set(level), false};
}

}  // namespace

CoalitionFamily coalitions_at_level(const LevelLayout& layout, int level) {
  check_level(layout, level);
  check_width(layout, level);
  return {level, CoalitionRange({level_segment(layout, level)}).collect()};
}

CoalitionRange feature_coalitions(const LevelLayout& layout, int feature) {
  if (feature < 0 || feature >= static_cast<int>(layout.size())) {
    throw std::out_of_range("feature " + std::to_string(feature) + " outside [0, " +
                            std::to_string(layout.size()) + ")");
  }
  const int l = layout.level(feature);
  std::vector<CoalitionRange::Segment> segments;
  for (int p = 0; p < l; ++p) {
    check_width(layout, p);
    segments.push_back(level_segment(layout, p));
  }
  check_width(layout, l);
  auto own = level_segment(layout, l);
  own.free.erase(std::find(own.free.begin(), own.free.end(), feature));
  segments.push_back(std::move(own));
  return CoalitionRange(std::move(segments));
}

std::vector<Coalition> coalitions_for_feature(const LevelLayout& layout, int feature) {
  return feature_coalitions(layout, feature).collect();
}

UpdateCount count_updates(const LevelLayout& layout, int level) {
  if (level < 1 || level > layout.depth()) {
    throw std::out_of_range("level " + std::to_string(level) + " outside [1, " +
                            std::to_string(layout.depth()) + "]");
  }
  std::uint64_t total = 0;
  for (int p = 0; p <= level; ++p) check_width(layout, p);
  for (int p = 0; p < level; ++p) total += std::uint64_t{1} << layout.width(p);
  total += std::uint64_t{1} << (layout.width(level) - 1);
  return {level, total - static_cast<std::uint64_t>(level)};
}

PredictedEvaluations predicted_evaluations(const LevelLayout& layout) {
  PredictedEvaluations out;
  for (int l = 1; l <= layout.depth(); ++l) {
    out.pair_count += layout.width(l) * count_updates(layout, l).count;
  }
  const auto n = static_cast<double>(layout.size());
  out.naive_shapley_count = n * std::ldexp(1.0, static_cast<int>(layout.size()) - 1);
  return out;
}

}  // namespace syntaxshap
