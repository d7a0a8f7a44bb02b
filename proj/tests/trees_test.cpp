#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bcrw/trees.hpp"
#include "test_stats.hpp"

using namespace bcrw;

namespace {

constexpr std::size_t kSamples = 100000;

std::vector<std::uint64_t> histogram(const std::vector<std::uint32_t>& xs) {
  std::vector<std::uint64_t> h;
  for (auto x : xs) {
    if (x >= h.size()) h.resize(x + 1, 0);
    ++h[x];
  }
  return h;
}

// Size of the subtree below vertex v, excluding v itself. Relies on
// pre-order storage: the subtree of v is a contiguous id range.
std::size_t subtree_size(const PlaneTree& t, std::int32_t v) {
  std::size_t end = static_cast<std::size_t>(v) + 1;
  while (end < t.size()) {
    std::int32_t a = t.parent(end);
    while (a != PlaneTree::kNone && a > v) a = t.parent(a);
    if (a != v) break;
    ++end;
  }
  return end - static_cast<std::size_t>(v) - 1;
}

// Vertices strictly left of the spine hanging off spine vertex i.
std::size_t left_bush_size(const PlaneTree& t, std::size_t i) {
  const auto s = t.spine()[i];
  std::size_t total = 0;
  for (auto c : t.children(s)) {
    if (i + 1 < t.spine().size() && c == t.spine()[i + 1]) break;
    total += 1 + subtree_size(t, c);
  }
  return total;
}

}  // namespace

TEST(Offspring, PresetMoments) {
  const auto bin = binary_offspring();
  EXPECT_NEAR(bin.mean(), 1.0, 1e-15);
  EXPECT_NEAR(bin.variance(), 1.0, 1e-15);
  EXPECT_NEAR(bin.third_moment(), 4.0, 1e-15);
  const auto geo = geometric_offspring();
  EXPECT_NEAR(geo.mean(), 1.0, 1e-12);
  EXPECT_NEAR(geo.variance(), 2.0, 1e-12);
  EXPECT_TRUE(geo.third_moment_finite());
}

TEST(Offspring, RejectsInvalidLaws) {
  auto code = [](std::vector<double> pmf) {
    try {
      validate_offspring(std::move(pmf));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code({0.0, 1.0}), ErrorCode::ZeroVariance);
  EXPECT_EQ(code({0.5, 0.5}), ErrorCode::NotCritical);
  EXPECT_EQ(code({0.6, -0.1, 0.5}), ErrorCode::BadProbabilities);
  EXPECT_EQ(code({0.5, 0.0, 0.4}), ErrorCode::BadProbabilities);
  EXPECT_EQ(code({}), ErrorCode::BadProbabilities);
}

TEST(Offspring, GeneratingFunction) {
  const auto geo = geometric_offspring();
  for (double t : {0.0, 0.3, 0.7, 0.95}) {
    EXPECT_NEAR(geo.pgf(t), 1.0 / (2.0 - t), 1e-14);
    EXPECT_NEAR(geo.pgf_derivative(t), 1.0 / ((2.0 - t) * (2.0 - t)), 1e-13);
  }
  EXPECT_NEAR(geo.pgf(1.0), 1.0, 1e-15);
  EXPECT_NEAR(geo.pgf_derivative(1.0), 1.0, 1e-12);
}

TEST(Adjoint, TailSums) {
  const auto bin = adjoint_distribution(binary_offspring());
  ASSERT_EQ(bin.pmf().size(), 2u);
  EXPECT_DOUBLE_EQ(bin[0], 0.5);
  EXPECT_DOUBLE_EQ(bin[1], 0.5);
  const auto mu = geometric_offspring();
  const auto geo = adjoint_distribution(mu);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(geo[i], mu[i], 1e-12);
}

TEST(Adjoint, MeanIsHalfVariance) {
  for (const auto& mu : {binary_offspring(), geometric_offspring(), validate_offspring({0.3, 0.5, 0.1, 0.1})}) {
    const auto adj = adjoint_distribution(mu);
    EXPECT_NEAR(adj.mean(), mu.variance() / 2.0, 1e-10);
    double total = 0.0;
    for (std::size_t i = 0; i < adj.pmf().size(); ++i) {
      total += adj[i];
      if (i + 1 < adj.pmf().size()) {
        EXPECT_GE(adj[i], adj[i + 1]);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (double t : {0.0, 0.4, 0.9}) EXPECT_NEAR(adj.pgf(t), (1.0 - mu.pgf(t)) / (1.0 - t), 1e-12);
  }
}

TEST(Kesten, SizeBiasedSlotLawHasUnitMass) {
  for (const auto& mu : {binary_offspring(), geometric_offspring(), validate_offspring({0.3, 0.5, 0.1, 0.1})}) {
    double total = 0.0;
    const auto n = mu.pmf().size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; i + j + 1 < n; ++j) total += mu[i + j + 1];
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(DfsTraversal, SmallTrees) {
  EXPECT_EQ(dfs_traversal(PlaneTree({-1}, {}, false)), std::vector<std::int32_t>{0});
  // Root 0 with children a=1, b=2 (in that order), a has child c=3.
  const PlaneTree t({-1, 0, 0, 1}, {}, false);
  EXPECT_EQ(dfs_traversal(t), (std::vector<std::int32_t>{0, 1, 3, 2}));
  EXPECT_EQ(dfs_traversal(t).size(), t.size());
}

TEST(GwTree, SampledTreesAreStoredInPreOrder) {
  const auto mu = geometric_offspring();
  Rng rng(7);
  for (int s = 0; s < 200; ++s) {
    const auto t = sample_gw_tree(mu, rng, 5000);
    const auto order = dfs_traversal(t);
    ASSERT_EQ(order.size(), t.size());
    for (std::size_t i = 0; i < order.size(); ++i) ASSERT_EQ(order[i], static_cast<std::int32_t>(i));
  }
}

TEST(GwTree, SingleRootFrequency) {
  const auto mu = binary_offspring();
  Rng rng(11);
  std::size_t singles = 0;
  for (std::size_t s = 0; s < kSamples; ++s) singles += sample_gw_tree(mu, rng, 10000).size() == 1;
  const double f = static_cast<double>(singles) / kSamples;
  EXPECT_NEAR(f, 0.5, 3.0 * std::sqrt(0.25 / kSamples));
}

TEST(GwTree, CapSemantics) {
  const auto mu = binary_offspring();
  Rng rng(3);
  for (int s = 0; s < 1000; ++s) {
    Rng probe = rng;
    const bool has_children = mu.draw(probe) > 0;
    const auto t = sample_gw_tree(mu, rng, 1);
    EXPECT_EQ(t.size(), 1u);
    EXPECT_EQ(t.truncated(), has_children);
  }
}

TEST(GwTree, CriticalTailSanity) {
  const auto mu = binary_offspring();
  auto mean_size = [&](std::size_t cap, std::uint64_t seed, std::vector<std::uint64_t>* sizes) {
    Rng rng(seed);
    double total = 0.0;
    for (std::size_t s = 0; s < kSamples; ++s) {
      const auto n = sample_gw_tree(mu, rng, cap).size();
      total += static_cast<double>(n);
      if (sizes) sizes->push_back(n);
    }
    return total / kSamples;
  };
  std::vector<std::uint64_t> sizes;
  const double small = mean_size(100, 5, nullptr);
  const double large = mean_size(10000, 6, &sizes);
  EXPECT_GT(large, small);
  std::sort(sizes.begin(), sizes.end());
  std::size_t prev = sizes.size();
  for (std::size_t k : {1, 2, 3, 5, 10, 30, 100, 1000, 5000}) {
    const auto at_least = static_cast<std::size_t>(sizes.end() - std::lower_bound(sizes.begin(), sizes.end(), k));
    EXPECT_LE(at_least, prev);
    prev = at_least;
  }
}

TEST(AdjointTree, GeometricRootDegreeMatchesGw) {
  const auto mu = geometric_offspring();
  Rng r1(21), r2(22);
  std::vector<std::uint32_t> adj, gw;
  for (std::size_t s = 0; s < kSamples; ++s) {
    adj.push_back(static_cast<std::uint32_t>(sample_adjoint_tree(mu, r1, 100000).degree(0)));
    gw.push_back(static_cast<std::uint32_t>(sample_gw_tree(mu, r2, 100000).degree(0)));
  }
  const auto ha = histogram(adj), hg = histogram(gw);
  EXPECT_GT(ref::chi_square_two_sample_pvalue(ha, hg), 1e-3);
  EXPECT_GT(ref::chi_square_pvalue(ha, mu.pmf()), 1e-3);
}

TEST(AdjointTree, BinaryRootDegree) {
  const auto mu = binary_offspring();
  Rng rng(23);
  std::vector<double> deg;
  std::size_t ones = 0;
  for (std::size_t s = 0; s < kSamples; ++s) {
    const auto d = sample_adjoint_tree(mu, rng, 10000).degree(0);
    ASSERT_LE(d, 1u);
    ones += d;
    deg.push_back(static_cast<double>(d));
  }
  EXPECT_NEAR(static_cast<double>(ones) / kSamples, 0.5, 3.0 * std::sqrt(0.25 / kSamples));
  const auto mv = ref::mean_var(deg);
  EXPECT_NEAR(mv.mean, mu.variance() / 2.0, 3.0 * mv.stderr_());
}

TEST(AdjointTree, GeometricMeanRootDegree) {
  const auto mu = geometric_offspring();
  Rng rng(24);
  std::vector<double> deg;
  for (std::size_t s = 0; s < kSamples; ++s) deg.push_back(static_cast<double>(sample_adjoint_tree(mu, rng, 100000).degree(0)));
  const auto mv = ref::mean_var(deg);
  EXPECT_NEAR(mv.mean, mu.variance() / 2.0, 3.0 * mv.stderr_());
}

TEST(InfiniteTree, SpineStructure) {
  const auto mu = geometric_offspring();
  Rng rng(31);
  for (std::size_t len : {1, 2, 7, 40}) {
    const auto t = sample_infinite_tree(mu, len, rng, 1000);
    ASSERT_EQ(t.spine().size(), len);
    EXPECT_EQ(t.spine()[0], t.root());
    for (std::size_t i = 0; i + 1 < len; ++i) {
      const auto ch = t.children(t.spine()[i]);
      ASSERT_FALSE(ch.empty());
      EXPECT_EQ(ch.back(), t.spine()[i + 1]);
      EXPECT_EQ(t.parent(t.spine()[i + 1]), t.spine()[i]);
    }
    const auto order = dfs_traversal(t);
    for (std::size_t i = 0; i < order.size(); ++i) ASSERT_EQ(order[i], static_cast<std::int32_t>(i));
  }
}

TEST(InfiniteTree, BinaryBushesEmptyHalfTheTime) {
  const auto mu = binary_offspring();
  Rng rng(32);
  constexpr std::size_t len = 4;
  std::vector<std::size_t> empty(len, 0);
  const std::size_t n = kSamples / 4;
  for (std::size_t s = 0; s < n; ++s) {
    const auto t = sample_infinite_tree(mu, len, rng, 10000);
    for (std::size_t i = 0; i < len; ++i) empty[i] += left_bush_size(t, i) == 0;
  }
  for (std::size_t i = 0; i < len; ++i)
    EXPECT_NEAR(static_cast<double>(empty[i]) / n, 0.5, 3.0 * std::sqrt(0.25 / n)) << "spine vertex " << i;
}

TEST(InfiniteTree, SuccessiveBushesUncorrelated) {
  const auto mu = geometric_offspring();
  Rng rng(33);
  std::vector<double> prod, a, b;
  for (std::size_t s = 0; s < kSamples; ++s) {
    const auto t = sample_infinite_tree(mu, 2, rng, 2000);
    // Bush sizes are heavy tailed, so compare capped sizes.
    const double x = std::min<double>(static_cast<double>(left_bush_size(t, 0)), 10.0);
    const double y = std::min<double>(static_cast<double>(left_bush_size(t, 1)), 10.0);
    a.push_back(x);
    b.push_back(y);
  }
  const auto ma = ref::mean_var(a), mb = ref::mean_var(b);
  for (std::size_t i = 0; i < a.size(); ++i) prod.push_back((a[i] - ma.mean) * (b[i] - mb.mean));
  const auto mp = ref::mean_var(prod);
  EXPECT_NEAR(mp.mean, 0.0, 3.0 * mp.stderr_());
}

TEST(KestenTree, BinarySpineHasTwoChildrenWithUniformSlot) {
  const auto mu = binary_offspring();
  Rng rng(41);
  constexpr std::size_t len = 5;
  std::size_t left = 0, total = 0;
  for (std::size_t s = 0; s < kSamples / 5; ++s) {
    const auto t = sample_kesten_tree(mu, len, rng, 10000);
    for (std::size_t i = 0; i + 1 < len; ++i) {
      const auto ch = t.children(t.spine()[i]);
      ASSERT_EQ(ch.size(), 2u);
      left += ch[0] == t.spine()[i + 1];
      ++total;
    }
  }
  EXPECT_NEAR(static_cast<double>(left) / total, 0.5, 3.0 * std::sqrt(0.25 / total));
}

TEST(KestenTree, SpineDegreesAreSizeBiased) {
  const auto mu = geometric_offspring();
  Rng rng(42);
  std::vector<double> deg;
  for (std::size_t s = 0; s < kSamples / 2; ++s) {
    const auto t = sample_kesten_tree(mu, 3, rng, 100000);
    for (std::size_t i = 0; i + 1 < 3; ++i) deg.push_back(static_cast<double>(t.degree(t.spine()[i])));
  }
  const auto mv = ref::mean_var(deg);
  EXPECT_NEAR(mv.mean, mu.variance() + 1.0, 3.0 * mv.stderr_());
}

TEST(KestenTree, LeftPartMatchesInfiniteTree) {
  const auto mu = geometric_offspring();
  Rng r1(43), r2(44);
  std::vector<std::uint32_t> kesten_left, inf_left, kesten_elder;
  for (std::size_t s = 0; s < kSamples; ++s) {
    const auto k = sample_kesten_tree(mu, 2, r1, 3000);
    const auto f = sample_infinite_tree(mu, 2, r2, 3000);
    kesten_left.push_back(static_cast<std::uint32_t>(std::min<std::size_t>(left_bush_size(k, 0), 60)));
    inf_left.push_back(static_cast<std::uint32_t>(std::min<std::size_t>(left_bush_size(f, 0), 60)));
    std::uint32_t elder = 0;
    for (auto c : k.children(k.spine()[0])) {
      if (c == k.spine()[1]) break;
      ++elder;
    }
    kesten_elder.push_back(elder);
  }
  EXPECT_GT(ref::chi_square_two_sample_pvalue(histogram(kesten_left), histogram(inf_left)), 1e-3);
  EXPECT_GT(ref::chi_square_pvalue(histogram(kesten_elder), adjoint_distribution(mu).pmf()), 1e-3);
}

TEST(KestenTree, TerminalSpineVertexKeepsBushesOnBothSides) {
  const auto mu = validate_offspring({0.3, 0.5, 0.1, 0.1});
  Rng rng(45);
  std::vector<double> deg;
  for (std::size_t s = 0; s < 20000; ++s) deg.push_back(static_cast<double>(sample_kesten_tree(mu, 1, rng, 100000).degree(0) + 1));
  // The terminal vertex keeps n - 1 bushes for a size-biased n.
  const auto mv = ref::mean_var(deg);
  EXPECT_NEAR(mv.mean, mu.variance() + 1.0, 3.0 * mv.stderr_());
}
