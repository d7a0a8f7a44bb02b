#include <gtest/gtest.h>

#include <cmath>

#include "bcrw/capacity.hpp"

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

double half_width(const CapacityEstimate& e) { return 0.5 * e.ci_width(); }

CapacityOptions oracle_opts(std::vector<double> windows = {6.0, 8.0, 10.0}) {
  CapacityOptions o;
  o.method = CapacityMethod::Oracle;
  o.radii = std::move(windows);
  return o;
}

}  // namespace

TEST(AffineFit, RecoversLine) {
  const std::vector<double> x{1.0, 0.5, 0.25}, y{3.0, 2.0, 1.5}, sd{0.1, 0.1, 0.1};
  const auto f = detail::affine_fit(x, y, sd);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.rms, 0.0, 1e-12);
}

TEST(LogLogFit, RecoversPowerLaw) {
  const std::vector<double> r{2, 4, 8, 16};
  std::vector<double> v;
  for (double x : r) v.push_back(3.0 * std::pow(x, 1.5));
  const auto f = loglog_fit(r, v);
  EXPECT_NEAR(f.slope, 1.5, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-9);
}

TEST(Balls, CountsAndMembership) {
  const auto theta = simple_random_walk(5);
  EXPECT_EQ(coordinate_ball(5, 1, 3).size(), 7u);
  EXPECT_EQ(coordinate_ball(5, 2, 1).size(), 5u);
  for (int m : {1, 2, 5}) {
    const auto explicit_ball = coordinate_ball(5, m, 3);
    const auto implicit_ball = coordinate_ball_set(theta, m, 3);
    EXPECT_EQ(implicit_ball.count, explicit_ball.size());
    EXPECT_NEAR(implicit_ball.radius, set_radius(theta, explicit_ball), 1e-12);
    for (const auto& p : explicit_ball.points()) EXPECT_TRUE(implicit_ball.contains(p));
  }
  const auto b = coordinate_ball_set(theta, 2, 3);
  EXPECT_FALSE(b.contains(pt({0, 0, 1})));
  EXPECT_FALSE(b.contains(pt({3, 1})));
  EXPECT_FALSE(b.is_explicit());
  EXPECT_EQ(code_of([] { coordinate_ball(5, 6, 1); }), ErrorCode::InvalidArgument);
}

TEST(Capacity, Errors) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const TargetSet a(5, {Point{}, pt({4})});
  CapacityOptions o;
  o.radii = {5.0, 8.0, 10.0};
  EXPECT_EQ(code_of([&] { estimate_bcap(a, theta, mu, o); }), ErrorCode::RadiusTooSmall);
  o.radii = {8.0, 12.0, 16.0};
  o.budget = 1e6;
  EXPECT_EQ(code_of([&] { estimate_bcap(a, theta, mu, o); }), ErrorCode::BudgetExceeded);
  o.budget = 0.0;
  o.radii = {8.0};
  EXPECT_EQ(code_of([&] { estimate_bcap(a, theta, mu, o); }), ErrorCode::InvalidArgument);
  CapacityOptions s;
  s.budget = 1e3;
  EXPECT_EQ(code_of([&] { ball_scaling_study(5, {1, 2, 4}, theta, mu, s); }), ErrorCode::BudgetExceeded);
  EXPECT_EQ(code_of([&] { ball_scaling_study(5, {1, 2}, theta, mu, {}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { ball_scaling_study(5, {2, 1, 3}, theta, mu, {}); }), ErrorCode::InvalidArgument);
}

TEST(Capacity, OracleMonotoneSubadditiveAndTranslationInvariant) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const auto o = oracle_opts({5.0, 6.0, 7.0});
  const TargetSet a(5, {pt({1})}), b(5, {pt({-1}), pt({0, 1})});
  const TargetSet ab(5, {pt({1}), pt({-1}), pt({0, 1})});
  const auto ca = estimate_bcap(a, theta, mu, o);
  const auto cb = estimate_bcap(b, theta, mu, o);
  const auto cab = estimate_bcap(ab, theta, mu, o);
  for (const auto* e : {&ca, &cb, &cab}) {
    EXPECT_LE(e->ci_low, e->value);
    EXPECT_LE(e->value, e->ci_high);
    EXPECT_GT(e->value, 0.0);
    EXPECT_EQ(e->per_radius.size(), 3u);
  }
  EXPECT_LE(ca.value, cab.value + 2.0 * (ca.ci_width() + cab.ci_width()));
  EXPECT_LE(cb.value, cab.value + 2.0 * (cb.ci_width() + cab.ci_width()));
  EXPECT_LE(cab.value, ca.value + cb.value + half_width(ca) + half_width(cb) + half_width(cab));
  const TargetSet shifted = ab.translated(pt({0, 0, 1, -1}));
  const auto cs = estimate_bcap(shifted, theta, mu, o);
  EXPECT_LE(std::abs(cs.value - cab.value), half_width(cs) + half_width(cab) + 1e-9);
}

TEST(Capacity, PointMcAgreesWithOracle) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const auto oracle = bcap_point(theta, mu, oracle_opts());
  CapacityOptions o;
  o.radii = {6.0, 9.0, 12.0};
  o.n_samples = 30000;
  o.seed = 77;
  const auto mc = bcap_point(theta, mu, o);
  EXPECT_GT(mc.value, 0.0);
  EXPECT_TRUE(mc.shared_samples);
  EXPECT_LE(std::abs(mc.value - oracle.value), half_width(mc) + half_width(oracle));
  // Cached: a second call returns the identical estimate.
  EXPECT_EQ(bcap_point(theta, mu, o).value, mc.value);
  for (const auto& r : mc.per_radius) EXPECT_GT(r.rescaled, 0.0);
}

TEST(Capacity, McIndependentOfWorkerCount) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const TargetSet a(5, {Point{}, pt({1})});
  CapacityOptions o;
  o.n_samples = 2000;
  o.seed = 9;
  o.workers = 1;
  const auto one = estimate_bcap(a, theta, mu, o);
  o.workers = 3;
  const auto three = estimate_bcap(a, theta, mu, o);
  EXPECT_EQ(one.value, three.value);
  ASSERT_EQ(one.probes.size(), three.probes.size());
  for (std::size_t i = 0; i < one.probes.size(); ++i) EXPECT_EQ(one.probes[i].hits, three.probes[i].hits);
}

TEST(Capacity, SharedAndDirectEstimatorsAgree) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const TargetSet a(5, {Point{}, pt({1}), pt({0, 1})});
  CapacityOptions o;
  o.radii = {4.0, 6.0};
  o.probes_per_radius = 2;
  o.kill_factor = 2.0;
  o.n_samples = 4000;
  const auto shared = estimate_bcap(a, theta, mu, o);
  o.direct = true;
  o.seed = 2;
  const auto direct = estimate_bcap(a, theta, mu, o);
  EXPECT_FALSE(direct.shared_samples);
  ASSERT_EQ(shared.per_radius.size(), direct.per_radius.size());
  for (std::size_t g = 0; g < shared.per_radius.size(); ++g) {
    const auto& s = shared.per_radius[g];
    const auto& d = direct.per_radius[g];
    EXPECT_LE(std::abs(s.rescaled - d.rescaled), 4.0 * std::hypot(s.std_error, d.std_error)) << s.radius;
  }
}

TEST(Capacity, ImplicitSetMatchesExplicit) {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  CapacityOptions o;
  o.n_samples = 3000;
  o.radii = {4.0, 6.0, 8.0};
  const auto ex = estimate_bcap_mc(PointSet::from(theta, coordinate_ball(5, 2, 1)), theta, mu, o);
  const auto im = estimate_bcap_mc(coordinate_ball_set(theta, 2, 1), theta, mu, o);
  // Same samples, different lookup strategy: identical hit counts.
  ASSERT_EQ(ex.probes.size(), im.probes.size());
  for (std::size_t i = 0; i < ex.probes.size(); ++i) EXPECT_EQ(ex.probes[i].hits, im.probes[i].hits);
}
