#pragma once

// Oracle identity suite, comparability bands and the Monte Carlo bridge,
// collected as named checks.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bcrw/green.hpp"
#include "bcrw/oracle.hpp"
#include "bcrw/snakes.hpp"

namespace bcrw {

enum class CheckKind { Identity, Band, Bridge };

inline std::string_view to_string(CheckKind k) noexcept {
  switch (k) {
    case CheckKind::Identity: return "identity";
    case CheckKind::Band: return "band";
    case CheckKind::Bridge: return "bridge";
  }
  return "unknown";
}

/// Identities and bridges pass when value <= hi; bands when lo <= value <= hi.
struct Check {
  std::string name;
  CheckKind kind = CheckKind::Identity;
  double value = 0.0;
  double lo = 0.0, hi = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<Check> checks;

  bool passed(CheckKind k) const {
    for (const auto& c : checks)
      if (c.kind == k && !c.pass) return false;
    return true;
  }
  std::size_t count(CheckKind k) const {
    std::size_t n = 0;
    for (const auto& c : checks) n += c.kind == k;
    return n;
  }
};

struct ValidateOptions {
  double radius = 8.0;             // identity window
  double tol = 1e-12;              // solver tolerance
  double identity_threshold = 1e-6;
  double bridge_radius = 6.0;      // kill ball and oracle window for the bridge
  std::uint64_t bridge_samples = 100000;
  bool bridge = true;
  std::uint64_t seed = 1;
  int workers = 1;
};

namespace detail {

inline Point axis(std::initializer_list<int> c) { return make_point(c); }

inline void identity(ValidationReport& rep, std::string name, double residual, double threshold) {
  rep.checks.push_back({std::move(name), CheckKind::Identity, residual, 0.0, threshold, residual <= threshold});
}

inline void band(ValidationReport& rep, std::string name, double value, double lo, double hi) {
  rep.checks.push_back({std::move(name), CheckKind::Band, value, lo, hi, value >= lo && value <= hi});
}

// Every exact identity for one target set, plus the recorded constants.
inline void identity_block(ValidationReport& rep, const std::string& tag, const TargetSet& a,
                           const JumpDistribution& theta, const OffspringDistribution& mu, const Window& win,
                           const ValidateOptions& opt) {
  const double R = win.spec().radius, thr = opt.identity_threshold, tol = opt.tol;
  const auto fix = solve_visit_fixpoint(a, mu, theta, win, {.tol = tol});
  const auto& k = fix.r.values;
  identity(rep, tag + "/fixpoint_residual", fix.residual, thr);

  const auto jac = solve_visit_fixpoint(a, mu, theta, win, {.tol = 0.1 * tol, .method = FixpointMethod::Jacobi});
  double worst = 0.0;
  for (std::size_t i = 0; i < win.size(); ++i) worst = std::max(worst, std::abs(fix.p.values[i] - jac.p.values[i]));
  identity(rep, tag + "/newton_vs_jacobi", worst, thr);

  identity(rep, tag + "/p_equals_green_to_A", p_via_green(theta, win, fix, tol).max_residual, thr);

  // First and last visit decompositions through B = Ball(3R/8).
  const int bx = static_cast<int>(std::lround(0.625 * R));
  const auto b_mask = ball_mask(theta, win, Point{}, 0.375 * R);
  const std::pair<Point, Point> pairs[] = {{axis({1}), axis({bx})}, {axis({0, 1, 1}), axis({-(bx - 1), -2})}};
  for (std::size_t j = 0; j < std::size(pairs); ++j) {
    const auto res = check_first_visit(theta, win, k, b_mask, pairs[j].first, pairs[j].second, tol);
    for (int i = 0; i < 4; ++i)
      identity(rep, tag + "/first_visit_pair" + std::to_string(j) + "_form" + std::to_string(i), res.residual[i], thr);
  }

  // Occupation identity: linear solve against forward time stepping.
  const auto occ_b = ball_mask(theta, win, axis({1}), 1.5);
  const Point ox = axis({2, 1});
  const auto conv = convolved_sum_check(theta, win, fix, occ_b, ox, tol);
  const double stepped = occupation_path_sum(win, k, occ_b, fix.in_a, ox);
  identity(rep, tag + "/occupation", std::abs(conv.lhs_p - stepped), thr);

  // Reversal: G(x,y)(1-k(y)) = G(y,x)(1-k(x)).
  const Point gx = axis({-2, 1}), gy = axis({0, 2, 1});
  const double gxy = green_killed(theta, win, k, gx, gy, tol), gyx = green_killed(theta, win, k, gy, gx, tol);
  identity(rep, tag + "/green_reversal",
           std::abs(gxy * (1.0 - k[win.require(gy)]) - gyx * (1.0 - k[win.require(gx)])), thr);

  // Recorded constants.
  const Point qx = axis({2, 1});
  std::vector<std::uint8_t> all(win.size(), 1);
  const auto whole = convolved_sum_check(theta, win, fix, all, qx, tol);
  band(rep, tag + "/q_over_weighted_paths", whole.rhs_q / whole.lhs_p, 0.2, 5.0);

  double prev = 0.0;
  for (double rb : {1.0, 2.0}) {
    const auto c = convolved_sum_check(theta, win, fix, ball_mask(theta, win, Point{}, rb), axis({1, 1}), tol);
    const auto s = "/convolved_B" + std::to_string(static_cast<int>(rb));
    band(rep, tag + s + "_q", c.ratio_q, 0.0, 10.0);
    band(rep, tag + s + "_p", c.ratio_p, 0.0, 10.0);
    if (prev > 0.0) band(rep, tag + "/convolved_scale_change", std::max(c.ratio_q / prev, prev / c.ratio_q), 1.0, 2.0);
    prev = c.ratio_q;
  }

  // Needs Ball(4n) inside the window, so small windows go without it.
  const double rn = std::max({1.0, 0.2 * R, set_radius(theta, a)});
  if (4.0 * rn <= R) {
    const auto rr = restriction_ratio(theta, win, fix, rn, axis({1}), tol);
    band(rep, tag + "/restriction_p", rr.ratio_p, 0.1, 1.0 + 1e-9);
    band(rep, tag + "/restriction_q", rr.ratio_q, 0.05, 1.0 + 1e-9);
  }

  band(rep, tag + "/window_charge", window_charge(win, fix), 0.0, static_cast<double>(a.size()));

  const int gz = std::max(3, bx - 2);
  const Point lx = axis({0, 0, gz, 1}), ly = axis({0, 0, -gz, 1});
  const auto free_col = free_green_column(theta, win, ly, tol);
  band(rep, tag + "/killed_over_free_green", green_killed(theta, win, k, lx, ly, tol) / free_col[win.require(lx)], 0.1,
       1.0 + 1e-9);
}

}  // namespace detail

/// The exact identities for A = {0} and a three-point set on one window,
/// with comparability constants recorded against their bands.
inline ValidationReport identity_suite(const JumpDistribution& theta, const OffspringDistribution& mu,
                                       const ValidateOptions& opt = {}) {
  const Window win(theta, {Point{}, opt.radius});
  ValidationReport rep;
  detail::identity_block(rep, "point", TargetSet(theta.dim(), {Point{}}), theta, mu, win, opt);
  detail::identity_block(rep, "three_points",
                         TargetSet(theta.dim(), {Point{}, detail::axis({2}), detail::axis({0, -1, 1})}), theta, mu,
                         win, opt);
  return rep;
}

/// estimate_p and estimate_q against the oracle at six probes, with killing
/// outside the oracle window so both compute the same quantity.
inline ValidationReport bridge_suite(const JumpDistribution& theta, const OffspringDistribution& mu,
                                     const ValidateOptions& opt = {}) {
  const double R = opt.bridge_radius;
  const Window win(theta, {Point{}, R});
  const TargetSet a(theta.dim(), {Point{}, detail::axis({0, 1})});
  const auto fix = solve_visit_fixpoint(a, mu, theta, win, {.tol = opt.tol});
  const int far = std::max(2, static_cast<int>(R / 2));
  const Point probes[] = {detail::axis({1}),          detail::axis({2, 1}),       detail::axis({0, 0, 2}),
                          detail::axis({-2, 0, 1, 1}), detail::axis({1, 1, 1, 1}), detail::axis({far})};
  ValidationReport rep;
  std::uint64_t task = 0;
  for (const auto& x : probes) {
    std::string at = "(";
    for (int i = 0; i < theta.dim(); ++i) at += (i ? "," : "") + std::to_string(x[i]);
    at += ")";
    const McOptions mc{.seed = opt.seed, .task = ++task, .workers = opt.workers, .kill = KillBall{Point{}, R}};
    const auto p = estimate_p(a, x, theta, mu, opt.bridge_samples, mc);
    const double dp = std::abs(p.value - fix.p.at(win, x));
    const double tp = 3.0 * p.std_error + p.truncation_bias_bound + 10.0 * opt.tol;
    rep.checks.push_back({"p" + at, CheckKind::Bridge, dp, 0.0, tp, dp <= tp});

    const McOptions mq{.seed = opt.seed, .task = 1000 + task, .workers = opt.workers, .kill = KillBall{Point{}, R}};
    const auto q = estimate_q(a, x, theta, mu, opt.bridge_samples, mq);
    const double dq = std::abs(q.value - q_via_green(theta, win, fix, a, x, opt.tol).value);
    const double tq = 3.0 * q.std_error + q.truncation_bias_bound + 10.0 * opt.tol;
    rep.checks.push_back({"q" + at, CheckKind::Bridge, dq, 0.0, tq, dq <= tq});
  }
  return rep;
}

inline ValidationReport validate_all(const JumpDistribution& theta, const OffspringDistribution& mu,
                                     const ValidateOptions& opt = {}) {
  auto rep = identity_suite(theta, mu, opt);
  if (opt.bridge) {
    const auto b = bridge_suite(theta, mu, opt);
    rep.checks.insert(rep.checks.end(), b.checks.begin(), b.checks.end());
  }
  return rep;
}

}  // namespace bcrw
