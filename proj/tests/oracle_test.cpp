#include <gtest/gtest.h>

#include <cmath>

#include "bcrw/green.hpp"
#include "bcrw/oracle.hpp"
#include "bcrw/trees.hpp"

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

struct Fixture {
  JumpDistribution theta = simple_random_walk(5);
  Window win{theta, WindowSpec{Point{}, 5.0}};
  TargetSet a{5, {Point{}}};
};

}  // namespace

TEST(Fixpoint, NewtonAgreesWithJacobi) {
  Fixture f;
  const auto mu = binary_offspring();
  const auto newton = solve_visit_fixpoint(f.a, mu, f.theta, f.win, {.tol = 1e-12});
  const auto jacobi = solve_visit_fixpoint(f.a, mu, f.theta, f.win, {.tol = 1e-13, .method = FixpointMethod::Jacobi});
  EXPECT_LT(newton.residual, 1e-12);
  EXPECT_LT(newton.iterations, 20);
  double worst = 0.0;
  for (std::size_t i = 0; i < f.win.size(); ++i)
    worst = std::max(worst, std::abs(newton.p.values[i] - jacobi.p.values[i]));
  // Jacobi stops on the sweep increment, which understates its error by the
  // inverse spectral gap of the killed walk.
  EXPECT_LT(worst, 1e-9);
}

TEST(Fixpoint, ValuesAreProbabilitiesAndOneOnTarget) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(f.a, binary_offspring(), f.theta, f.win);
  for (std::size_t i = 0; i < f.win.size(); ++i) {
    EXPECT_GE(fix.p.values[i], 0.0);
    EXPECT_LE(fix.p.values[i], 1.0);
    EXPECT_GE(fix.r.values[i], 0.0);
    EXPECT_LE(fix.r.values[i], fix.p.values[i] + 1e-15);
  }
  EXPECT_EQ(fix.p.at(f.win, Point{}), 1.0);
  EXPECT_EQ(fix.r.at(f.win, Point{}), 1.0);
  EXPECT_GT(fix.p.at(f.win, pt({1})), fix.p.at(f.win, pt({2})));
  EXPECT_GT(fix.p.at(f.win, pt({2})), fix.p.at(f.win, pt({3})));
}

TEST(Fixpoint, GeometricAdjointGivesEqualFields) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(f.a, geometric_offspring(), f.theta, f.win);
  for (std::size_t i = 0; i < f.win.size(); ++i) EXPECT_NEAR(fix.r.values[i], fix.p.values[i], 10 * fix.residual + 1e-12);
}

TEST(Fixpoint, MonotoneInTargetSet) {
  Fixture f;
  const auto mu = binary_offspring();
  const TargetSet big(5, {Point{}, pt({1}), pt({0, 1})});
  const auto small_fix = solve_visit_fixpoint(f.a, mu, f.theta, f.win);
  const auto big_fix = solve_visit_fixpoint(big, mu, f.theta, f.win);
  for (std::size_t i = 0; i < f.win.size(); ++i) EXPECT_GE(big_fix.p.values[i] + 1e-12, small_fix.p.values[i]);
}

TEST(Fixpoint, LargerWindowGivesLargerValues) {
  const auto theta = simple_random_walk(5);
  const TargetSet a(5, {Point{}});
  const Window w4(theta, {Point{}, 4.0}), w6(theta, {Point{}, 6.0});
  const auto f4 = solve_visit_fixpoint(a, binary_offspring(), theta, w4);
  const auto f6 = solve_visit_fixpoint(a, binary_offspring(), theta, w6);
  for (const auto& x : {pt({1}), pt({2}), pt({1, 1})}) EXPECT_GT(f6.p.at(w6, x), f4.p.at(w4, x));
}

TEST(Fixpoint, Errors) {
  Fixture f;
  const TargetSet far(5, {pt({3})});
  EXPECT_EQ(code_of([&] { solve_visit_fixpoint(far, binary_offspring(), f.theta, f.win); }),
            ErrorCode::MarginTooSmall);
  EXPECT_EQ(code_of([&] {
              solve_visit_fixpoint(f.a, binary_offspring(), f.theta, f.win,
                                   {.method = FixpointMethod::Jacobi, .max_sweeps = 3});
            }),
            ErrorCode::NoConvergence);
}

TEST(GreenRepresentation, VisitProbabilityIsKilledGreenToTarget) {
  Fixture f;
  for (const auto& mu : {binary_offspring(), geometric_offspring()}) {
    const TargetSet a(5, {Point{}, pt({1, 1})});
    const auto fix = solve_visit_fixpoint(a, mu, f.theta, f.win, {.tol = 1e-12});
    const auto rep = p_via_green(f.theta, f.win, fix, 1e-12);
    EXPECT_EQ(rep.checked, f.win.size() - 2);
    EXPECT_LT(rep.max_residual, 1e-9);
  }
}

TEST(GreenRepresentation, InfiniteSnakeAtLeastSnake) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(f.a, binary_offspring(), f.theta, f.win);
  for (const auto& x : {pt({1}), pt({2}), pt({2, 1})}) {
    const auto q = q_via_green(f.theta, f.win, fix, f.a, x);
    EXPECT_GT(q.value, fix.p.at(f.win, x));
    EXPECT_LE(q.value, 1.0);
    EXPECT_GT(q.tail_estimate, 0.0);
  }
}

TEST(PathWeight, ProductOfSurvivalAndSteps) {
  Fixture f;
  std::vector<double> k(f.win.size(), 0.0);
  k[f.win.require(Point{})] = 0.5;
  k[f.win.require(pt({1}))] = 0.25;
  const std::vector<Point> path{Point{}, pt({1}), pt({1, 1})};
  EXPECT_NEAR(path_weight(path, f.theta, f.win, k), 0.5 * 0.75 * 0.01, 1e-15);
  const std::vector<Point> single{pt({2})};
  EXPECT_EQ(path_weight(single, f.theta, f.win, k), 1.0);
  const std::vector<Point> bad{Point{}, pt({2})};
  EXPECT_EQ(code_of([&] { path_weight(bad, f.theta, f.win, k); }), ErrorCode::StepOutsideSupport);
}

TEST(KilledGreen, FreeCaseMatchesWindowGreen) {
  Fixture f;
  const std::vector<double> k(f.win.size(), 0.0);
  const auto col = killed_green_column(f.theta, f.win, k, Point{});
  const auto ref = free_green_column(f.theta, f.win, Point{});
  for (std::size_t i = 0; i < f.win.size(); ++i) EXPECT_NEAR(col[i], ref[i], 1e-9);
}

TEST(KilledGreen, ReversalWithSurvivalWeights) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(TargetSet(5, {pt({1})}), binary_offspring(), f.theta, f.win);
  const auto& k = fix.r.values;
  const Point x = pt({-2, 1}), y = pt({0, 2, 1});
  const double gxy = green_killed(f.theta, f.win, k, x, y, 1e-12);
  const double gyx = green_killed(f.theta, f.win, k, y, x, 1e-12);
  const double sx = 1.0 - k[f.win.require(x)], sy = 1.0 - k[f.win.require(y)];
  EXPECT_NEAR(gxy * sy, gyx * sx, 1e-11);
  const auto row = killed_green_row(f.theta, f.win, k, x, 1e-12);
  EXPECT_NEAR(row[f.win.require(y)], gxy, 1e-10);
}

TEST(KilledGreen, TargetSitesAbsorb) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(f.a, binary_offspring(), f.theta, f.win);
  // Paths through A die there, so G_A(0, y) is zero unless y = 0.
  const auto row = killed_green_row(f.theta, f.win, fix.r.values, Point{});
  for (std::size_t i = 0; i < f.win.size(); ++i) EXPECT_EQ(row[i], f.win.site(i) == Point{} ? 1.0 : 0.0);
}

TEST(Harmonic, ForwardAndBackwardAgree) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(f.a, binary_offspring(), f.theta, f.win);
  const auto b = ball_mask(f.theta, f.win, pt({1}), 2.0);
  const Point x = pt({1, 1}), z = pt({4});
  const auto from = harmonic_from(f.theta, f.win, fix.r.values, b, x, 1e-12);
  const auto to = harmonic_to(f.theta, f.win, fix.r.values, b, z, 1e-12);
  EXPECT_NEAR(from[f.win.require(z)], to[f.win.require(x)], 1e-12);
  EXPECT_GT(from[f.win.require(z)], 0.0);
}

TEST(Harmonic, ExitDistributionWithoutKilling) {
  Fixture f;
  const std::vector<double> k(f.win.size(), 0.0);
  const auto b = ball_mask(f.theta, f.win, Point{}, 2.0);
  const auto h = harmonic_from(f.theta, f.win, k, b, pt({1}), 1e-12);
  double out = 0.0;
  for (std::size_t z = 0; z < f.win.size(); ++z)
    if (!b[z]) {
      EXPECT_GE(h[z], 0.0);
      out += h[z];
    }
  EXPECT_NEAR(out, 1.0, 1e-10);
  // Returns to x inside B add to the empty path.
  const double loop = harmonic_measure(f.theta, f.win, k, b, pt({1}), pt({1}));
  EXPECT_GT(loop, 1.0);
  const std::vector<std::uint8_t> none(f.win.size(), 0);
  EXPECT_EQ(harmonic_measure(f.theta, f.win, k, none, pt({1}), pt({1})), 1.0);
  EXPECT_NEAR(harmonic_measure(f.theta, f.win, k, none, pt({1}), pt({1, 1})), 0.1, 1e-15);
}

TEST(FirstVisit, FourDecompositionsHold) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(TargetSet(5, {pt({1})}), binary_offspring(), f.theta, f.win);
  const auto b = ball_mask(f.theta, f.win, Point{}, 1.5);
  for (const auto& k : {std::vector<double>(f.win.size(), 0.0), fix.r.values}) {
    const auto res = check_first_visit(f.theta, f.win, k, b, pt({0, 1}), pt({-1, 2, 1}), 1e-12);
    EXPECT_GT(res.g_ab, 0.0);
    for (double e : res.residual) EXPECT_LT(e, 1e-10);
  }
  EXPECT_EQ(code_of([&] { check_first_visit(f.theta, f.win, fix.r.values, b, pt({3}), pt({4})); }),
            ErrorCode::InvalidArgument);
}

TEST(Occupation, SolveMatchesTimeStepping) {
  const auto theta = simple_random_walk(5);
  const Window win(theta, {Point{}, 4.0});
  const TargetSet a(5, {Point{}});
  const auto fix = solve_visit_fixpoint(a, binary_offspring(), theta, win);
  const auto b = ball_mask(theta, win, pt({1}), 1.5);
  const Point x = pt({2, 1});
  const auto conv = convolved_sum_check(theta, win, fix, b, x, 1e-13);
  const double dp = occupation_path_sum(win, fix.r.values, b, fix.in_a, x);
  EXPECT_NEAR(conv.lhs_p, dp, 1e-10 * std::max(1.0, dp));
  EXPECT_GT(conv.lhs_p, 0.0);
}

TEST(Occupation, ConvolvedSumsBoundedByDiameterSquared) {
  Fixture f;
  const auto fix = solve_visit_fixpoint(f.a, binary_offspring(), f.theta, f.win);
  for (double rb : {1.0, 1.5, 2.0}) {
    const auto b = ball_mask(f.theta, f.win, Point{}, rb);
    const auto c = convolved_sum_check(f.theta, f.win, fix, b, pt({1, 1}));
    EXPECT_GT(c.ratio_q, 0.0);
    EXPECT_LT(c.ratio_q, 2.0);
    EXPECT_LT(c.ratio_p, 2.0);
    EXPECT_NEAR(c.diameter, 2.0 * rb, 0.6);
  }
}

TEST(Restriction, RatiosInUnitIntervalAndNearOne) {
  const auto theta = simple_random_walk(5);
  const Window win(theta, {Point{}, 8.0});
  const TargetSet a(5, {Point{}, pt({1})});
  const auto fix = solve_visit_fixpoint(a, binary_offspring(), theta, win);
  const auto rr = restriction_ratio(theta, win, fix, 2.0, pt({0, 1, 1}));
  EXPECT_GT(rr.ratio_p, 0.5);
  EXPECT_LE(rr.ratio_p, 1.0 + 1e-12);
  EXPECT_GT(rr.ratio_q, 0.5);
  EXPECT_LE(rr.ratio_q, 1.0 + 1e-12);
  EXPECT_EQ(code_of([&] { restriction_ratio(theta, win, fix, 3.0, Point{}); }), ErrorCode::WindowTooSmall);
}

TEST(Charge, GrowsWithWindowAndBoundedByOne) {
  const auto theta = simple_random_walk(5);
  const TargetSet a(5, {Point{}});
  double prev = 2.0;
  for (double w : {4.0, 6.0, 8.0}) {
    const Window win(theta, {Point{}, w});
    const auto fix = solve_visit_fixpoint(a, binary_offspring(), theta, win);
    const double c = window_charge(win, fix);
    EXPECT_GT(c, 0.0);
    // The window charge is the outward flux, which decreases toward the
    // lattice value as the window grows.
    EXPECT_LT(c, prev);
    prev = c;
  }
}
