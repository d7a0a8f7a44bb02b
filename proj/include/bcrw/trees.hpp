#pragma once

// Offspring laws and the four plane-tree laws: mu-GW, adjoint mu-GW,
// infinite mu-GW (spine with left bushes) and mu-GW conditioned on
// survival (Kesten tree, bushes on both sides of the spine).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/rng.hpp"

namespace bcrw {

/// Critical offspring law mu on {0, 1, ..., n}.
class OffspringDistribution {
 public:
  OffspringDistribution() = default;

  const std::vector<double>& pmf() const noexcept { return pmf_; }
  double operator[](std::size_t i) const noexcept { return i < pmf_.size() ? pmf_[i] : 0.0; }
  std::size_t max_children() const noexcept { return pmf_.size() - 1; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return var_; }
  double third_moment() const noexcept { return third_; }
  /// Always true for a finite pmf list; kept so callers can check the
  /// third-moment hypothesis uniformly.
  bool third_moment_finite() const noexcept { return std::isfinite(third_); }

  /// phi(t) = sum_i mu(i) t^i.
  double pgf(double t) const noexcept {
    double s = 0.0;
    for (std::size_t i = pmf_.size(); i-- > 0;) s = s * t + pmf_[i];
    return s;
  }
  double pgf_derivative(double t) const noexcept {
    double s = 0.0;
    for (std::size_t i = pmf_.size(); i-- > 1;) s = s * t + i * pmf_[i];
    return s;
  }

  std::uint32_t draw(Rng& rng) const noexcept { return alias_(rng); }
  /// Draws n with probability n mu(n).
  std::uint32_t draw_size_biased(Rng& rng) const noexcept { return size_biased_(rng); }

  friend OffspringDistribution validate_offspring(std::vector<double> pmf);

 private:
  std::vector<double> pmf_;
  double mean_ = 0.0, var_ = 0.0, third_ = 0.0;
  AliasTable alias_, size_biased_;
};

inline OffspringDistribution validate_offspring(std::vector<double> pmf) {
  if (pmf.empty()) throw Error(ErrorCode::BadProbabilities, "empty offspring pmf");
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::BadProbabilities, "offspring pmf entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(ErrorCode::BadProbabilities, "offspring pmf sums to " + std::to_string(total));
  while (pmf.size() > 1 && pmf.back() == 0.0) pmf.pop_back();

  OffspringDistribution mu;
  mu.pmf_ = std::move(pmf);
  double m2 = 0.0, m3 = 0.0;
  for (std::size_t i = 0; i < mu.pmf_.size(); ++i) {
    const double k = static_cast<double>(i);
    mu.mean_ += k * mu.pmf_[i];
    m2 += k * k * mu.pmf_[i];
    m3 += k * k * k * mu.pmf_[i];
  }
  if (std::abs(mu.mean_ - 1.0) > 1e-12)
    throw Error(ErrorCode::NotCritical, "offspring mean is " + std::to_string(mu.mean_));
  mu.var_ = m2 - mu.mean_ * mu.mean_;
  mu.third_ = m3;
  if (mu.pmf_.size() < 2 || mu.pmf_[1] == 1.0 || mu.var_ <= 1e-14)
    throw Error(ErrorCode::ZeroVariance, "offspring law is degenerate (mu(1) = 1)");

  mu.alias_ = AliasTable(mu.pmf_);
  std::vector<double> biased(mu.pmf_.size());
  for (std::size_t i = 0; i < biased.size(); ++i) biased[i] = i * mu.pmf_[i];
  mu.size_biased_ = AliasTable(biased);
  return mu;
}

/// mu(0) = mu(2) = 1/2.
inline OffspringDistribution binary_offspring() { return validate_offspring({0.5, 0.0, 0.5}); }

/// mu(i) = 2^{-(i+1)} for i <= 56. The remaining tail, of mass 2^{-57}
/// and mean (58) 2^{-57}, is moved to the single atom 58 so that mass and
/// mean stay exact.
inline OffspringDistribution geometric_offspring() {
  constexpr int n = 56;
  std::vector<double> pmf(n + 3, 0.0);
  for (int i = 0; i <= n; ++i) pmf[i] = std::ldexp(1.0, -(i + 1));
  pmf[n + 2] = std::ldexp(1.0, -(n + 1));
  return validate_offspring(std::move(pmf));
}

/// Adjoint law mu~(i) = sum_{j > i} mu(j).
class AdjointDistribution {
 public:
  explicit AdjointDistribution(const OffspringDistribution& mu) {
    const auto& p = mu.pmf();
    pmf_.assign(p.size() > 1 ? p.size() - 1 : 1, 0.0);
    double tail = 0.0;
    for (std::size_t i = p.size(); i-- > 1;) {
      tail += p[i];
      pmf_[i - 1] = tail;
    }
    for (std::size_t i = 0; i < pmf_.size(); ++i) mean_ += i * pmf_[i];
    alias_ = AliasTable(pmf_);
  }

  const std::vector<double>& pmf() const noexcept { return pmf_; }
  double operator[](std::size_t i) const noexcept { return i < pmf_.size() ? pmf_[i] : 0.0; }
  double mean() const noexcept { return mean_; }

  /// (1 - phi(t)) / (1 - t), the generating function of mu~.
  double pgf(double t) const noexcept {
    double s = 0.0;
    for (std::size_t i = pmf_.size(); i-- > 0;) s = s * t + pmf_[i];
    return s;
  }

  std::uint32_t draw(Rng& rng) const noexcept { return alias_(rng); }

 private:
  std::vector<double> pmf_;
  double mean_ = 0.0;
  AliasTable alias_;
};

inline AdjointDistribution adjoint_distribution(const OffspringDistribution& mu) { return AdjointDistribution(mu); }

/// Ordered rooted tree stored in depth-first pre-order. Vertex ids are
/// array offsets; the root is vertex 0.
class PlaneTree {
 public:
  static constexpr std::int32_t kNone = -1;

  PlaneTree() = default;
  PlaneTree(std::vector<std::int32_t> parent, std::vector<std::int32_t> spine, bool truncated)
      : parent_(std::move(parent)), spine_(std::move(spine)), truncated_(truncated) {
    if (parent_.empty() || parent_[0] != kNone)
      throw Error(ErrorCode::InvalidArgument, "tree needs a root at vertex 0");
    const auto n = parent_.size();
    std::vector<std::int32_t> count(n + 1, 0);
    for (std::size_t v = 1; v < n; ++v) {
      if (parent_[v] < 0 || static_cast<std::size_t>(parent_[v]) >= n || parent_[v] == static_cast<std::int32_t>(v))
        throw Error(ErrorCode::InvalidArgument, "bad parent index");
      ++count[parent_[v] + 1];
    }
    offset_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) offset_[v + 1] = offset_[v] + count[v + 1];
    child_.assign(n - 1, 0);
    std::vector<std::int32_t> fill(offset_.begin(), offset_.end() - 1);
    for (std::size_t v = 1; v < n; ++v) child_[fill[parent_[v]]++] = static_cast<std::int32_t>(v);
  }

  std::size_t size() const noexcept { return parent_.size(); }
  std::int32_t root() const noexcept { return 0; }
  std::int32_t parent(std::size_t v) const noexcept { return parent_[v]; }
  const std::vector<std::int32_t>& parents() const noexcept { return parent_; }

  /// Children of v, eldest first.
  std::span<const std::int32_t> children(std::size_t v) const noexcept {
    return {child_.data() + offset_[v], static_cast<std::size_t>(offset_[v + 1] - offset_[v])};
  }
  std::size_t degree(std::size_t v) const noexcept { return static_cast<std::size_t>(offset_[v + 1] - offset_[v]); }

  bool has_spine() const noexcept { return !spine_.empty(); }
  const std::vector<std::int32_t>& spine() const noexcept { return spine_; }
  bool truncated() const noexcept { return truncated_; }

 private:
  std::vector<std::int32_t> parent_;
  std::vector<std::int32_t> offset_;
  std::vector<std::int32_t> child_;
  std::vector<std::int32_t> spine_;
  bool truncated_ = false;
};

/// Pre-order listing by explicit traversal of the child lists.
inline std::vector<std::int32_t> dfs_traversal(const PlaneTree& t) {
  std::vector<std::int32_t> order, stack{t.root()};
  order.reserve(t.size());
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    order.push_back(v);
    const auto ch = t.children(v);
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

namespace detail {

// Appends a mu-GW subtree below `attach` (or a new root when attach < 0)
// in pre-order. The root draws its degree from `root_draw`. Returns false
// when the cap stopped the expansion.
template <class RootDraw>
bool grow_gw(const OffspringDistribution& mu, RootDraw&& root_draw, Rng& rng, std::size_t cap,
             std::int32_t attach, std::vector<std::int32_t>& parent) {
  struct Frame {
    std::int32_t v;
    std::uint32_t left;
  };
  std::vector<Frame> stack;
  const std::size_t start = parent.size();
  parent.push_back(attach);
  stack.push_back({static_cast<std::int32_t>(start), root_draw(rng)});
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.left == 0) {
      stack.pop_back();
      continue;
    }
    if (parent.size() - start >= cap) return false;
    --top.left;
    const auto v = static_cast<std::int32_t>(parent.size());
    parent.push_back(top.v);
    stack.push_back({v, mu.draw(rng)});
  }
  return true;
}

}  // namespace detail

/// mu-GW tree. Stops expanding once node_cap vertices exist and sets the
/// truncated flag if any drawn child is left out.
inline PlaneTree sample_gw_tree(const OffspringDistribution& mu, Rng& rng, std::size_t node_cap) {
  if (node_cap < 1) throw Error(ErrorCode::InvalidArgument, "node_cap must be >= 1");
  std::vector<std::int32_t> parent;
  const bool done = detail::grow_gw(mu, [&](Rng& r) { return mu.draw(r); }, rng, node_cap, PlaneTree::kNone, parent);
  return PlaneTree(std::move(parent), {}, !done);
}

/// Adjoint mu-GW tree: root degree from mu~, all other vertices from mu.
inline PlaneTree sample_adjoint_tree(const OffspringDistribution& mu, Rng& rng, std::size_t node_cap) {
  if (node_cap < 1) throw Error(ErrorCode::InvalidArgument, "node_cap must be >= 1");
  const AdjointDistribution adj(mu);
  std::vector<std::int32_t> parent;
  const bool done = detail::grow_gw(mu, [&](Rng& r) { return adj.draw(r); }, rng, node_cap, PlaneTree::kNone, parent);
  return PlaneTree(std::move(parent), {}, !done);
}

/// First spine_len vertices of the infinite mu-GW tree. Every spine vertex,
/// the last one included, is the root of an adjoint bush whose subtrees
/// come before the next spine vertex, so the spine child is always the
/// youngest. bush_cap bounds the vertex count of each bush.
inline PlaneTree sample_infinite_tree(const OffspringDistribution& mu, std::size_t spine_len, Rng& rng,
                                      std::size_t bush_cap) {
  if (spine_len < 1) throw Error(ErrorCode::InvalidArgument, "spine_len must be >= 1");
  if (bush_cap < 1) throw Error(ErrorCode::InvalidArgument, "bush_cap must be >= 1");
  const AdjointDistribution adj(mu);
  std::vector<std::int32_t> parent, spine;
  bool truncated = false;
  std::int32_t prev = PlaneTree::kNone;
  for (std::size_t i = 0; i < spine_len; ++i) {
    const auto s = static_cast<std::int32_t>(parent.size());
    spine.push_back(s);
    parent.push_back(prev);
    std::size_t used = 1;
    const auto k = adj.draw(rng);
    for (std::uint32_t c = 0; c < k; ++c) {
      if (used >= bush_cap) {
        truncated = true;
        break;
      }
      const std::size_t before = parent.size();
      if (!detail::grow_gw(mu, [&](Rng& r) { return mu.draw(r); }, rng, bush_cap - used, s, parent))
        truncated = true;
      used += parent.size() - before;
    }
    prev = s;
  }
  return PlaneTree(std::move(parent), std::move(spine), truncated);
}

/// Kesten tree (mu-GW conditioned on survival) cut after spine_len spine
/// vertices. A spine vertex has n children with probability n mu(n) and
/// the spine child sits at a uniform slot among them. The terminal spine
/// vertex keeps both its elder and younger bushes but no spine child.
inline PlaneTree sample_kesten_tree(const OffspringDistribution& mu, std::size_t spine_len, Rng& rng,
                                    std::size_t bush_cap) {
  if (spine_len < 1) throw Error(ErrorCode::InvalidArgument, "spine_len must be >= 1");
  if (bush_cap < 1) throw Error(ErrorCode::InvalidArgument, "bush_cap must be >= 1");
  std::vector<std::uint32_t> elder(spine_len), younger(spine_len);
  for (std::size_t i = 0; i < spine_len; ++i) {
    const auto n = mu.draw_size_biased(rng);
    const auto slot = static_cast<std::uint32_t>(rng.below(n));
    elder[i] = slot;
    younger[i] = n - 1 - slot;
  }
  std::vector<std::int32_t> parent, spine;
  bool truncated = false;
  auto gw = [&](Rng& r) { return mu.draw(r); };
  auto bushes = [&](std::int32_t s, std::uint32_t count) {
    std::size_t used = 0;
    for (std::uint32_t c = 0; c < count; ++c) {
      if (used >= bush_cap) {
        truncated = true;
        return;
      }
      const std::size_t before = parent.size();
      if (!detail::grow_gw(mu, gw, rng, bush_cap - used, s, parent)) truncated = true;
      used += parent.size() - before;
    }
  };
  std::int32_t prev = PlaneTree::kNone;
  for (std::size_t i = 0; i < spine_len; ++i) {
    const auto s = static_cast<std::int32_t>(parent.size());
    spine.push_back(s);
    parent.push_back(prev);
    bushes(s, elder[i]);
    prev = s;
  }
  for (std::size_t i = spine_len; i-- > 0;) bushes(spine[i], younger[i]);
  return PlaneTree(std::move(parent), std::move(spine), truncated);
}

}  // namespace bcrw
