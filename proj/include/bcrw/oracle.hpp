#pragma once

// Deterministic ground truth on a window: the visit-probability fixed
// point, killed-walk Green functions G_A, harmonic measures and the exact
// path identities that tie them together.
//
// Closure: sites outside the window never visit A (fixpoint) and kill the
// walk (Green sums), so every field is a lower bound for its Z^d value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/green.hpp"
#include "bcrw/lattice.hpp"
#include "bcrw/linear.hpp"
#include "bcrw/target.hpp"
#include "bcrw/trees.hpp"
#include "bcrw/window.hpp"

namespace bcrw {

enum class FieldTag : std::uint32_t { Killing = 0, VisitP = 1, VisitR = 2, GreenColumn = 3, Harmonic = 4, VisitQ = 5 };

inline std::string_view to_string(FieldTag t) noexcept {
  switch (t) {
    case FieldTag::Killing: return "killing";
    case FieldTag::VisitP: return "visit_p";
    case FieldTag::VisitR: return "visit_r";
    case FieldTag::GreenColumn: return "green_column";
    case FieldTag::Harmonic: return "harmonic";
    case FieldTag::VisitQ: return "visit_q";
  }
  return "unknown";
}

/// One value per window site, in Window::sites() order.
struct LatticeField {
  FieldTag tag = FieldTag::VisitP;
  WindowSpec spec{};
  int dim = 0;
  std::vector<double> values;

  double at(const Window& win, const Point& x) const {
    const auto i = win.index_of(x);
    return i ? values[*i] : 0.0;
  }
};

/// Site mask of a target set; throws WindowTooSmall if A leaves the window.
inline std::vector<std::uint8_t> set_mask(const Window& win, const TargetSet& a) {
  std::vector<std::uint8_t> m(win.size(), 0);
  for (const auto& p : a.points()) m[win.require(p)] = 1;
  return m;
}

/// Mask of window sites z with ||z - center|| <= radius.
inline std::vector<std::uint8_t> ball_mask(const JumpDistribution& theta, const Window& win, const Point& center,
                                           double radius) {
  std::vector<std::uint8_t> m(win.size(), 0);
  const double r2 = radius * radius + 1e-9;
  for (std::size_t i = 0; i < win.size(); ++i) m[i] = theta.norm_sq(win.site(i) - center) <= r2;
  return m;
}

namespace detail {

inline void step_average(const Window& win, std::span<const double> u, std::span<double> out) {
  const std::size_t na = win.atoms();
  for (std::size_t x = 0; x < win.size(); ++x) {
    double acc = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const auto y = win.forward(x, a);
      if (y >= 0) acc += win.step_prob(a) * u[y];
    }
    out[x] = acc;
  }
}

}  // namespace detail

enum class FixpointMethod { Newton, Jacobi };

struct FixpointOptions {
  double tol = 1e-10;
  FixpointMethod method = FixpointMethod::Newton;
  int max_sweeps = 100000;
  int max_newton = 60;
};

struct FixpointResult {
  LatticeField p;
  LatticeField r;
  std::vector<std::uint8_t> in_a;
  int iterations = 0;
  double residual = 0.0;
  /// Upper bound for p_A(x) - p(x): one expected boundary exit times the
  /// largest expected number of visits to A from outside the window.
  double deficit_bound = 0.0;
  double sigma2 = 0.0;
};

/// Solves 1 - p(x) = phi(1 - P p(x)) off A with p = 1 on A and p = 0
/// outside the window, then r(x) = 1 - phi~(1 - P p(x)) off A, r = 1 on A.
inline FixpointResult solve_visit_fixpoint(const TargetSet& a, const OffspringDistribution& mu,
                                           const JumpDistribution& theta, const Window& win,
                                           const FixpointOptions& opt = {}) {
  const double rad = [&] {
    double m = 0.0;
    for (const auto& pt : a.points()) m = std::max(m, std::sqrt(theta.norm_sq(pt - win.spec().center)));
    return m;
  }();
  if (rad > win.spec().radius / 2.0 + 1e-9)
    throw Error(ErrorCode::MarginTooSmall, "target set must lie within half the window radius");
  const auto in_a = set_mask(win, a);
  const AdjointDistribution adj(mu);
  const std::size_t n = win.size();
  std::vector<double> p(n, 0.0), pp(n), next(n);
  for (std::size_t i = 0; i < n; ++i)
    if (in_a[i]) p[i] = 1.0;

  auto residual = [&](std::vector<double>& res) {
    detail::step_average(win, p, pp);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      res[i] = in_a[i] ? 0.0 : p[i] - (1.0 - mu.pgf(1.0 - pp[i]));
      worst = std::max(worst, std::abs(res[i]));
    }
    return worst;
  };

  FixpointResult out;
  out.sigma2 = mu.variance();
  if (opt.method == FixpointMethod::Jacobi) {
    // Monotone nondecreasing from p = 0 off A.
    int it = 0;
    double inc = 0.0;
    for (it = 1; it <= opt.max_sweeps; ++it) {
      detail::step_average(win, p, pp);
      inc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        next[i] = in_a[i] ? 1.0 : 1.0 - mu.pgf(1.0 - pp[i]);
        inc = std::max(inc, std::abs(next[i] - p[i]));
      }
      p.swap(next);
      if (inc < opt.tol) break;
    }
    out.iterations = it;
    if (inc >= opt.tol)
      throw Error(ErrorCode::NoConvergence, "fixpoint sweeps stalled at increment " + std::to_string(inc));
  } else {
    // Newton: (I - diag(phi'(1 - Pp)) P) delta = -F off A.
    std::vector<double> res(n), surv(n), delta(n), f(n);
    std::vector<std::uint8_t> off_a(n);
    for (std::size_t i = 0; i < n; ++i) off_a[i] = !in_a[i];
    int it = 0;
    double worst = residual(res);
    for (it = 1; it <= opt.max_newton && worst >= opt.tol; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        surv[i] = in_a[i] ? 0.0 : mu.pgf_derivative(1.0 - pp[i]);
        f[i] = -res[i];
      }
      KilledKernel k(win, surv, off_a);
      solve_killed(theta, k, Direction::Backward, f, delta, {.tol = std::max(opt.tol * 1e-2, 1e-13)});
      for (std::size_t i = 0; i < n; ++i)
        if (!in_a[i]) p[i] = std::clamp(p[i] + delta[i], 0.0, 1.0);
      worst = residual(res);
    }
    out.iterations = it - 1;
    if (worst >= opt.tol)
      throw Error(ErrorCode::NoConvergence, "Newton fixpoint stalled at residual " + std::to_string(worst));
  }

  out.residual = residual(next);
  detail::step_average(win, p, pp);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = in_a[i] ? 1.0 : 1.0 - adj.pgf(1.0 - pp[i]);
  out.p = {FieldTag::VisitP, win.spec(), win.dim(), std::move(p)};
  out.r = {FieldTag::VisitR, win.spec(), win.dim(), std::move(r)};
  out.in_a = in_a;
  const double gap = std::max(1.0, win.spec().radius - rad);
  out.deficit_bound = static_cast<double>(a.size()) * green_constant(theta) * std::pow(gap, 2.0 - theta.dim());
  return out;
}

/// b(gamma) = s(gamma) prod_{i < |gamma|} (1 - k(gamma(i))).
inline double path_weight(std::span<const Point> path, const JumpDistribution& theta, const Window& win,
                          std::span<const double> k) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "empty path");
  double w = 1.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double step = theta.prob(path[i + 1] - path[i]);
    if (step == 0.0) throw Error(ErrorCode::StepOutsideSupport, "path step outside the support of theta");
    w *= (1.0 - k[win.require(path[i])]) * step;
  }
  win.require(path.back());
  return w;
}

namespace detail {

inline std::vector<double> survival_of(std::span<const double> k) {
  std::vector<double> s(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) s[i] = 1.0 - k[i];
  return s;
}

}  // namespace detail

/// u(x) = sum_z G_k(x, z) f(z) over paths inside `mask` (whole window by default).
inline std::vector<double> killed_green_apply(const JumpDistribution& theta, const Window& win,
                                              std::span<const double> k, std::span<const double> f, double tol = 1e-10,
                                              std::span<const std::uint8_t> mask = {}) {
  const auto s = detail::survival_of(k);
  std::vector<std::uint8_t> all;
  if (mask.empty()) {
    all.assign(win.size(), 1);
    mask = all;
  }
  std::vector<double> fm(f.begin(), f.end()), u(win.size());
  for (std::size_t i = 0; i < win.size(); ++i)
    if (!mask[i]) fm[i] = 0.0;
  KilledKernel ker(win, s, mask);
  solve_killed(theta, ker, Direction::Backward, fm, u, {.tol = tol});
  return u;
}

/// v(z) = sum_x f(x) G_k(x, z).
inline std::vector<double> killed_green_apply_forward(const JumpDistribution& theta, const Window& win,
                                                      std::span<const double> k, std::span<const double> f,
                                                      double tol = 1e-10) {
  const auto s = detail::survival_of(k);
  std::vector<std::uint8_t> all(win.size(), 1);
  std::vector<double> v(win.size());
  KilledKernel ker(win, s, all);
  solve_killed(theta, ker, Direction::Forward, f, v, {.tol = tol});
  return v;
}

/// x -> G_k(x, y).
inline std::vector<double> killed_green_column(const JumpDistribution& theta, const Window& win,
                                               std::span<const double> k, const Point& y, double tol = 1e-10) {
  std::vector<double> f(win.size(), 0.0);
  f[win.require(y)] = 1.0;
  return killed_green_apply(theta, win, k, f, tol);
}

/// z -> G_k(x, z).
inline std::vector<double> killed_green_row(const JumpDistribution& theta, const Window& win,
                                            std::span<const double> k, const Point& x, double tol = 1e-10) {
  std::vector<double> f(win.size(), 0.0);
  f[win.require(x)] = 1.0;
  return killed_green_apply_forward(theta, win, k, f, tol);
}

/// G_k(x, y) on the window.
inline double green_killed(const JumpDistribution& theta, const Window& win, std::span<const double> k,
                           const Point& x, const Point& y, double tol = 1e-10) {
  const auto col = killed_green_column(theta, win, k, y, tol);
  return col[win.require(x)];
}

/// x -> H^B(x, y): paths from x to y whose vertices other than the two
/// endpoints lie in B, weighted by b. The zero-length path counts when x = y.
inline std::vector<double> harmonic_to(const JumpDistribution& theta, const Window& win, std::span<const double> k,
                                       std::span<const std::uint8_t> b, const Point& y, double tol = 1e-10) {
  const std::size_t n = win.size(), na = win.atoms();
  const auto yi = win.require(y);
  const auto s = detail::survival_of(k);
  // c(z) = theta(y - z): one step from z lands on y.
  std::vector<double> c(n, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    const auto z = win.backward(yi, a);
    if (z >= 0) c[z] += win.step_prob(a);
  }
  // h(z) = s(z) [c(z) + sum_v theta(v) h(z + v) 1_B(z + v)] for z in B.
  std::vector<double> f(n, 0.0), h(n, 0.0);
  for (std::size_t z = 0; z < n; ++z)
    if (b[z]) f[z] = s[z] * c[z];
  KilledKernel ker(win, s, b);
  solve_killed(theta, ker, Direction::Backward, f, h, {.tol = tol});
  std::vector<double> out(n);
  for (std::size_t x = 0; x < n; ++x) {
    double acc = c[x];
    for (std::size_t a = 0; a < na; ++a) {
      const auto w = win.forward(x, a);
      if (w >= 0 && b[w]) acc += win.step_prob(a) * h[w];
    }
    out[x] = (x == static_cast<std::size_t>(yi) ? 1.0 : 0.0) + s[x] * acc;
  }
  return out;
}

/// z -> H^B(x, z).
inline std::vector<double> harmonic_from(const JumpDistribution& theta, const Window& win, std::span<const double> k,
                                         std::span<const std::uint8_t> b, const Point& x, double tol = 1e-10) {
  const std::size_t n = win.size(), na = win.atoms();
  const auto xi = win.require(x);
  const auto s = detail::survival_of(k);
  // e(w) = s(x) theta(w - x): mass after the first step.
  std::vector<double> e(n, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    const auto w = win.forward(xi, a);
    if (w >= 0) e[w] += s[xi] * win.step_prob(a);
  }
  // m(w) = e(w) + sum_v theta(v) s(w - v) m(w - v) 1_B(w - v) for w in B.
  std::vector<double> f(n, 0.0), m(n, 0.0);
  for (std::size_t w = 0; w < n; ++w)
    if (b[w]) f[w] = e[w];
  KilledKernel ker(win, s, b);
  solve_killed(theta, ker, Direction::Forward, f, m, {.tol = tol});
  std::vector<double> out(n);
  for (std::size_t z = 0; z < n; ++z) {
    double acc = e[z];
    for (std::size_t a = 0; a < na; ++a) {
      const auto u = win.backward(z, a);
      if (u >= 0 && b[u]) acc += win.step_prob(a) * s[u] * m[u];
    }
    out[z] = (z == static_cast<std::size_t>(xi) ? 1.0 : 0.0) + acc;
  }
  return out;
}

/// H^B(x, y).
inline double harmonic_measure(const JumpDistribution& theta, const Window& win, std::span<const double> k,
                               std::span<const std::uint8_t> b, const Point& x, const Point& y, double tol = 1e-10) {
  return harmonic_to(theta, win, k, b, y, tol)[win.require(x)];
}

struct FirstVisitResiduals {
  /// G(a,b) vs sum_{z in B^c} H^B(a,z) G(z,b); G(a,b) vs sum_{z in B} G(a,z) H^{B^c}(z,b);
  /// G(b,a) vs sum_{z in B} H^{B^c}(b,z) G(z,a); G(b,a) vs sum_{z in B^c} G(b,z) H^B(z,a).
  std::array<double, 4> residual{};
  double g_ab = 0.0, g_ba = 0.0;
};

/// The four first/last-visit decompositions for a in B, b outside B.
inline FirstVisitResiduals check_first_visit(const JumpDistribution& theta, const Window& win,
                                             std::span<const double> k, std::span<const std::uint8_t> b_mask,
                                             const Point& a, const Point& b, double tol = 1e-10) {
  const auto ai = win.require(a), bi = win.require(b);
  if (!b_mask[ai] || b_mask[bi]) throw Error(ErrorCode::InvalidArgument, "need a in B and b outside B");
  const std::size_t n = win.size();
  std::vector<std::uint8_t> bc(n);
  for (std::size_t i = 0; i < n; ++i) bc[i] = !b_mask[i];

  const auto col_b = killed_green_column(theta, win, k, b, tol);  // z -> G(z, b)
  const auto col_a = killed_green_column(theta, win, k, a, tol);  // z -> G(z, a)
  const auto row_a = killed_green_row(theta, win, k, a, tol);     // z -> G(a, z)
  const auto row_b = killed_green_row(theta, win, k, b, tol);     // z -> G(b, z)
  const auto h_from_a = harmonic_from(theta, win, k, b_mask, a, tol);  // H^B(a, z)
  const auto h_to_b = harmonic_to(theta, win, k, bc, b, tol);          // H^{B^c}(z, b)
  const auto h_from_b = harmonic_from(theta, win, k, bc, b, tol);      // H^{B^c}(b, z)
  const auto h_to_a = harmonic_to(theta, win, k, b_mask, a, tol);      // H^B(z, a)

  FirstVisitResiduals out;
  out.g_ab = col_b[ai];
  out.g_ba = col_a[bi];
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (std::size_t z = 0; z < n; ++z) {
    if (b_mask[z]) {
      s2 += row_a[z] * h_to_b[z];
      s3 += h_from_b[z] * col_a[z];
    } else {
      s1 += h_from_a[z] * col_b[z];
      s4 += row_b[z] * h_to_a[z];
    }
  }
  out.residual = {std::abs(out.g_ab - s1), std::abs(out.g_ab - s2), std::abs(out.g_ba - s3), std::abs(out.g_ba - s4)};
  return out;
}

struct GreenIdentityReport {
  LatticeField field;
  double max_residual = 0.0;  // max |G_A(x, A) - p(x)| over checked sites
  std::size_t checked = 0;
};

/// x -> G_A(x, A) with killing r, compared with the fixpoint p at window
/// sites off A whose distance to the boundary is at least `margin`.
inline GreenIdentityReport p_via_green(const JumpDistribution& theta, const Window& win, const FixpointResult& fix,
                                       double tol = 1e-10, double margin = 0.0) {
  std::vector<double> f(win.size());
  for (std::size_t i = 0; i < win.size(); ++i) f[i] = fix.in_a[i] ? 1.0 : 0.0;
  GreenIdentityReport rep;
  rep.field = {FieldTag::VisitP, win.spec(), win.dim(), killed_green_apply(theta, win, fix.r.values, f, tol)};
  const double lim = std::pow(std::max(0.0, win.spec().radius - margin), 2) + 1e-9;
  for (std::size_t i = 0; i < win.size(); ++i) {
    if (fix.in_a[i] || theta.norm_sq(win.site(i) - win.spec().center) > lim) continue;
    rep.max_residual = std::max(rep.max_residual, std::abs(rep.field.values[i] - fix.p.values[i]));
    ++rep.checked;
  }
  return rep;
}

struct QValue {
  double value = 0.0;
  double tail_estimate = 0.0;
  LatticeField field;
};

/// q_A(x) = sum_y G_A(x, y) r_A(y) over the window. tail_estimate is the
/// expected-visit bound for the infinite snake beyond the window boundary.
inline QValue q_via_green(const JumpDistribution& theta, const Window& win, const FixpointResult& fix,
                          const TargetSet& a, const Point& x, double tol = 1e-10) {
  QValue q;
  q.field = {FieldTag::VisitQ, win.spec(), win.dim(), killed_green_apply(theta, win, fix.r.values, fix.r.values, tol)};
  q.value = q.field.values[win.require(x)];
  double rad = 0.0;
  for (const auto& p : a.points()) rad = std::max(rad, std::sqrt(theta.norm_sq(p - win.spec().center)));
  const double gap = std::max(1.0, win.spec().radius - rad), d = theta.dim();
  const double co = theta.dim() >= 5 ? occupation_constant(theta) : 0.0;
  q.tail_estimate = static_cast<double>(a.size()) *
                    (green_constant(theta) * std::pow(gap, 2.0 - d) + 0.5 * fix.sigma2 * co * std::pow(gap, 4.0 - d));
  return q;
}

/// sum_{gamma: x -> A} b(gamma) sum_i 1_B(gamma(i)) by stepping the killed
/// walk distribution forward in time; independent of the linear solvers.
inline double occupation_path_sum(const Window& win, std::span<const double> k, std::span<const std::uint8_t> b_mask,
                                  std::span<const std::uint8_t> a_mask, const Point& x, double tol = 1e-16,
                                  int max_steps = 10000000) {
  const std::size_t n = win.size(), na = win.atoms();
  std::vector<double> f(n, 0.0), h(n, 0.0), f2(n), h2(n);
  const auto xi = win.require(x);
  f[xi] = 1.0;
  h[xi] = b_mask[xi] ? 1.0 : 0.0;
  double total = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    double fm = 0.0, hm = 0.0;
    for (std::size_t z = 0; z < n; ++z) {
      if (a_mask[z]) total += h[z];
      fm += f[z];
      hm += h[z];
    }
    if (fm < tol && hm < tol) break;
    std::fill(f2.begin(), f2.end(), 0.0);
    std::fill(h2.begin(), h2.end(), 0.0);
    for (std::size_t z = 0; z < n; ++z) {
      if (f[z] == 0.0 && h[z] == 0.0) continue;
      const double s = 1.0 - k[z];
      if (s == 0.0) continue;
      for (std::size_t a = 0; a < na; ++a) {
        const auto w = win.forward(z, a);
        if (w < 0) continue;
        const double t = s * win.step_prob(a);
        f2[w] += t * f[z];
        h2[w] += t * h[z];
      }
    }
    for (std::size_t w = 0; w < n; ++w)
      if (b_mask[w]) h2[w] += f2[w];
    f.swap(f2);
    h.swap(h2);
  }
  return total;
}

struct ConvolvedSums {
  double lhs_q = 0.0, rhs_q = 0.0;  // sum_{z in B} G_A(x,z) q_A(z), q_A(x)
  double lhs_p = 0.0, rhs_p = 0.0;  // sum_{z in B} G_A(x,z) p_A(z), p_A(x)
  double diameter = 0.0;            // Euclidean diameter of B
  double ratio_q = 0.0, ratio_p = 0.0;
};

/// Both sides of the convolved-sum inequalities for a site set B.
inline ConvolvedSums convolved_sum_check(const JumpDistribution& theta, const Window& win, const FixpointResult& fix,
                                         std::span<const std::uint8_t> b_mask, const Point& x, double tol = 1e-10) {
  const std::size_t n = win.size();
  const auto& r = fix.r.values;
  const auto q = killed_green_apply(theta, win, r, r, tol);
  std::vector<double> fq(n), fp(n);
  std::vector<Point> b_pts;
  for (std::size_t i = 0; i < n; ++i) {
    fq[i] = b_mask[i] ? q[i] : 0.0;
    fp[i] = b_mask[i] ? fix.p.values[i] : 0.0;
    if (b_mask[i]) b_pts.push_back(win.site(i));
  }
  const auto xi = win.require(x);
  ConvolvedSums c;
  c.lhs_q = killed_green_apply(theta, win, r, fq, tol)[xi];
  c.lhs_p = killed_green_apply(theta, win, r, fp, tol)[xi];
  c.rhs_q = q[xi];
  c.rhs_p = fix.p.values[xi];
  c.diameter = b_pts.size() > 1 ? set_diameter(TargetSet(win.dim(), b_pts)) : 1.0;
  c.ratio_q = c.lhs_q / (c.diameter * c.diameter * c.rhs_q);
  c.ratio_p = c.lhs_p / (c.diameter * c.diameter * c.rhs_p);
  return c;
}

struct RestrictionRatios {
  double ratio_p = 0.0;  // paths inside Ball(1.1 n) over all paths
  double ratio_q = 0.0;  // [gamma]-weighted, paths inside Ball(4 n) over all paths
};

/// Restricted over unrestricted path sums for A in Ball(n), with the
/// killing of the full-window fixpoint.
inline RestrictionRatios restriction_ratio(const JumpDistribution& theta, const Window& win, const FixpointResult& fix,
                                           double n, const Point& x, double tol = 1e-10) {
  if (win.spec().radius < 4.0 * n - 1e-9) throw Error(ErrorCode::WindowTooSmall, "window must contain Ball(4n)");
  const std::size_t sz = win.size();
  const auto& r = fix.r.values;
  std::vector<double> one_a(sz);
  for (std::size_t i = 0; i < sz; ++i) one_a[i] = fix.in_a[i] ? 1.0 : 0.0;
  const auto xi = win.require(x);
  const auto small = ball_mask(theta, win, win.spec().center, 1.1 * n);
  const auto big = ball_mask(theta, win, win.spec().center, 4.0 * n);

  const auto p_all = killed_green_apply(theta, win, r, one_a, tol);
  const auto p_small = killed_green_apply(theta, win, r, one_a, tol, small);
  const auto w_all = killed_green_apply(theta, win, r, p_all, tol);
  const auto p_big = killed_green_apply(theta, win, r, one_a, tol, big);
  const auto w_big = killed_green_apply(theta, win, r, p_big, tol, big);
  return {p_small[xi] / p_all[xi], w_big[xi] / w_all[xi]};
}

/// Charge form of the capacity on one window:
/// sum_y (p(y) - P p(y)) = sum_{a in A} (1 - P p(a)) - sum_{y off A} r(y) P p(y).
inline double window_charge(const Window& win, const FixpointResult& fix) {
  std::vector<double> pp(win.size());
  detail::step_average(win, fix.p.values, pp);
  double s = 0.0;
  for (std::size_t i = 0; i < win.size(); ++i) s += fix.p.values[i] - pp[i];
  return s;
}

}  // namespace bcrw
