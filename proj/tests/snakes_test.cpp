#include <gtest/gtest.h>

#include <cmath>

#include "bcrw/oracle.hpp"
#include "bcrw/snakes.hpp"
#include "test_stats.hpp"

using namespace bcrw;

namespace {

Point pt(std::initializer_list<int> c) {
  Point p{};
  int i = 0;
  for (int v : c) p[i++] = v;
  return p;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::vector<double> atom_probs(const JumpDistribution& theta) {
  std::vector<double> p;
  for (const auto& a : theta.atoms()) p.push_back(a.p);
  return p;
}

void count_step(const JumpDistribution& theta, const Point& v, std::vector<std::uint64_t>& counts) {
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (theta.atoms()[i].v == v) {
      ++counts[i];
      return;
    }
  ADD_FAILURE() << "increment outside the support";
}

// |a - b| within k combined standard errors.
void expect_close(double a, double se_a, double b, double se_b, double k = 4.0) {
  EXPECT_LE(std::abs(a - b), k * std::sqrt(se_a * se_a + se_b * se_b) + 1e-12) << a << " vs " << b;
}

}  // namespace

TEST(Labels, EdgeIncrementsFollowStepLaw) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  std::vector<std::uint64_t> counts(theta.size(), 0);
  Rng rng(7);
  std::size_t edges = 0;
  while (edges < 20000) {
    const auto t = sample_gw_tree(mu, rng, 10000);
    const auto s = label_tree(t, theta, pt({3, -1}), rng);
    EXPECT_EQ(s.labels[0], pt({3, -1}));
    for (std::size_t v = 1; v < t.size(); ++v, ++edges) count_step(theta, s.labels[v] - s.labels[t.parent(v)], counts);
  }
  EXPECT_GT(ref::chi_square_pvalue(counts, atom_probs(theta)), 1e-3);
}

TEST(Labels, SpineIncrementsFollowStepLaw) {
  std::vector<Atom> atoms{{pt({1}), 0.3}, {pt({-1}), 0.3}, {pt({1, 1}), 0.2}, {pt({-1, -1}), 0.2}};
  const auto theta = build_jump_distribution(2, atoms);
  std::vector<std::uint64_t> counts(theta.size(), 0);
  Rng rng(11);
  for (int rep = 0; rep < 400; ++rep) {
    const auto t = sample_infinite_tree(geometric_offspring(), 20, rng, 1000);
    const auto s = label_tree(t, theta, Point{}, rng);
    const auto& sp = t.spine();
    for (std::size_t i = 1; i < sp.size(); ++i) count_step(theta, s.labels[sp[i]] - s.labels[sp[i - 1]], counts);
  }
  EXPECT_GT(ref::chi_square_pvalue(counts, atom_probs(theta)), 1e-3);
}

TEST(Labels, VisitCountsIncludeRoot) {
  const auto theta = simple_random_walk(3);
  Rng rng(3);
  const auto t = sample_gw_tree(binary_offspring(), rng, 100);
  const auto s = label_tree(t, theta, pt({1, 1, 1}), rng);
  const TargetSet a(3, {pt({1, 1, 1})});
  EXPECT_TRUE(snake_visits(s, a));
  EXPECT_GE(count_visits(s, a), 1u);
}

TEST(RunSnake, RootIsVisitedFirstAndStopsOnRequest) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const SnakeModel model(theta, mu);
  SnakeWorkspace ws;
  for (auto kind : {SnakeKind::Snake, SnakeKind::Adjoint, SnakeKind::Infinite, SnakeKind::Incipient}) {
    Rng rng(5);
    std::vector<Point> seen;
    const auto run = run_snake(model, kind, pt({2}), {.spine_len = 10}, rng, ws, [&](const Point& p) {
      seen.push_back(p);
      return true;
    });
    EXPECT_TRUE(run.stopped) << to_string(kind);
    ASSERT_EQ(seen.size(), 1u);
    EXPECT_EQ(seen[0], pt({2}));
  }
}

TEST(RunSnake, MatchesMaterializedTrees) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const TargetSet a(5, {Point{}});
  const Point x = pt({1});
  const std::uint64_t n = 40000;
  const auto direct = estimate_p(a, x, theta, mu, n, {.seed = 17});
  std::uint64_t hits = 0;
  Rng rng(99);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto t = sample_gw_tree(mu, rng, 1'000'000);
    hits += snake_visits(label_tree(t, theta, x, rng), a);
  }
  const auto tree = bernoulli_estimate(hits, n);
  expect_close(direct.value, direct.std_error, tree.value, tree.std_error);
}

TEST(RunSnake, InfiniteSpineNeedsLengthOrKill) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const SnakeModel model(theta, mu);
  SnakeWorkspace ws;
  Rng rng(1);
  EXPECT_EQ(code_of([&] { run_snake(model, SnakeKind::Infinite, Point{}, {}, rng, ws, [](const Point&) { return false; }); }),
            ErrorCode::InvalidArgument);
  const auto run = run_snake(model, SnakeKind::Infinite, Point{}, {.kill = KillBall{Point{}, 3.0}}, rng, ws,
                             [](const Point&) { return false; });
  EXPECT_TRUE(run.spine_exited);
  EXPECT_GT(run.spine_steps, 0u);
}

TEST(Estimators, TargetContainingStartIsCertain) {
  const auto theta = simple_random_walk(5);
  const TargetSet a(5, {pt({2})});
  EXPECT_EQ(estimate_p(a, pt({2}), theta, binary_offspring(), 10).value, 1.0);
  EXPECT_EQ(estimate_r(a, pt({2}), theta, binary_offspring(), 10).value, 1.0);
  EXPECT_EQ(estimate_q(a, pt({2}), theta, binary_offspring(), 10).value, 1.0);
}

TEST(Estimators, IndependentOfWorkerCount) {
  const auto theta = simple_random_walk(5);
  const TargetSet a(5, {Point{}, pt({1})});
  const auto mu = binary_offspring();
  const auto one = estimate_p(a, pt({2, 1}), theta, mu, 3000, {.seed = 42, .workers = 1});
  const auto four = estimate_p(a, pt({2, 1}), theta, mu, 3000, {.seed = 42, .workers = 4});
  EXPECT_EQ(one.value, four.value);
  const auto q1 = estimate_q(a, pt({2, 1}), theta, mu, 1000, {.seed = 42, .workers = 1}, {.spine_len = 50});
  const auto q3 = estimate_q(a, pt({2, 1}), theta, mu, 1000, {.seed = 42, .workers = 3}, {.spine_len = 50});
  EXPECT_EQ(q1.value, q3.value);
  EXPECT_EQ(q1.truncation_bias_bound, q3.truncation_bias_bound);
  const auto other = estimate_p(a, pt({2, 1}), theta, mu, 3000, {.seed = 43});
  EXPECT_NE(one.value, other.value);
}

TEST(Estimators, NodeCapIsOneSided) {
  const auto theta = simple_random_walk(5);
  const TargetSet a(5, {Point{}});
  const auto mu = binary_offspring();
  const auto full = estimate_p(a, pt({2}), theta, mu, 20000, {.seed = 5});
  const auto cut = estimate_p(a, pt({2}), theta, mu, 20000, {.seed = 5, .node_cap = 20});
  EXPECT_GT(cut.truncated, 0u);
  EXPECT_LE(cut.value, full.value);
  EXPECT_GE(cut.value + cut.truncation_bias_bound, full.value);
  // Critical trees exceed 10^6 vertices with probability of order 10^-3.
  EXPECT_LT(full.truncated, cut.truncated);
  EXPECT_LT(full.truncation_bias_bound, 3e-3);
}

TEST(Estimators, JointVisits) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const TargetSet a(5, {pt({1})}), b(5, {pt({-1})});
  EXPECT_EQ(code_of([&] { estimate_joint(a, a, Point{}, theta, mu, SnakeKind::Snake, 10); }), ErrorCode::OverlappingSets);
  EXPECT_EQ(code_of([&] { estimate_joint(a, b, Point{}, theta, mu, SnakeKind::Adjoint, 10); }),
            ErrorCode::InvalidArgument);
  const auto j = estimate_joint(a, b, Point{}, theta, mu, SnakeKind::Snake, 20000, {.seed = 2});
  const auto pa = estimate_p(a, Point{}, theta, mu, 20000, {.seed = 2});
  EXPECT_GT(j.value, 0.0);
  EXPECT_LE(j.value, pa.value);
}

TEST(Estimators, AdaptiveSpineReportsLength) {
  const auto theta = simple_random_walk(5);
  const TargetSet a(5, {Point{}});
  const auto e = estimate_q(a, pt({2}), theta, binary_offspring(), 1000, {.seed = 3, .workers = 0},
                            {.initial_spine = 8, .max_spine = 64, .pilot_samples = 200, .tail_walks = 64});
  EXPECT_GE(e.spine_len, 8u);
  EXPECT_LE(e.spine_len, 64u);
  EXPECT_GT(e.value, 0.0);
  EXPECT_GT(e.truncation_bias_bound, 0.0);
}

// Killing particles that leave a ball matches the window closure of the
// deterministic oracle, so the two must agree up to sampling error.
class Bridge : public ::testing::TestWithParam<int> {};

TEST_P(Bridge, KilledSnakesMatchOracle) {
  const auto theta = simple_random_walk(5);
  const auto mu = GetParam() == 0 ? binary_offspring() : geometric_offspring();
  const double radius = 4.0;
  const Window win(theta, {Point{}, radius});
  const TargetSet a(5, {Point{}, pt({0, 1})});
  const auto fix = solve_visit_fixpoint(a, mu, theta, win, {.tol = 1e-12});
  const McOptions opt{.seed = 2024, .workers = 0, .kill = KillBall{Point{}, radius}};
  const std::uint64_t n = 60000;
  for (const auto& x : {pt({1}), pt({2, 1})}) {
    const auto p = estimate_p(a, x, theta, mu, n, opt);
    expect_close(p.value, p.std_error, fix.p.at(win, x), 0.0);
    const auto r = estimate_r(a, x, theta, mu, n, opt);
    expect_close(r.value, r.std_error, fix.r.at(win, x), 0.0);
    const auto q = estimate_q(a, x, theta, mu, n, opt);
    EXPECT_EQ(q.truncation_bias_bound, 0.0);
    expect_close(q.value, q.std_error, q_via_green(theta, win, fix, a, x, 1e-12).value, 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Offspring, Bridge, ::testing::Values(0, 1));
