#pragma once

// Free-walk Green functions on a window: g(0, x) and the vertex-weighted
// path sum sum_gamma [gamma] s(gamma) = sum_z g(0, z) g(z, x).

#include <cmath>
#include <span>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/lattice.hpp"
#include "bcrw/linear.hpp"
#include "bcrw/window.hpp"

namespace bcrw {

struct GreenValue {
  double value = 0.0;
  /// Leading-order estimate of what the absorbing boundary removes.
  double tail_estimate = 0.0;
  int iterations = 0;
};

namespace detail {

inline void require_clear_of_boundary(const JumpDistribution& theta, const Window& win, const Point& x) {
  if (!win.contains(x) || theta.norm_sq(x - win.spec().center) >
                              std::pow(std::max(0.0, win.spec().radius - theta.step_norm()), 2) + 1e-9)
    throw Error(ErrorCode::WindowTooSmall, "point within one step range of the window boundary");
}

inline double boundary_tail(const JumpDistribution& theta, const Window& win, const Point& x) {
  const double gap = std::max(1.0, win.spec().radius - std::sqrt(theta.norm_sq(x - win.spec().center)));
  return green_constant(theta) * std::pow(gap, 2.0 - theta.dim());
}

}  // namespace detail

/// Column z -> g_W(z, target) of the free Green function on the window.
inline std::vector<double> free_green_column(const JumpDistribution& theta, const Window& win, const Point& target,
                                             double tol = 1e-10, SolveReport* report = nullptr) {
  std::vector<double> surv(win.size(), 1.0), f(win.size(), 0.0), u(win.size());
  std::vector<std::uint8_t> mask(win.size(), 1);
  f[win.require(target)] = 1.0;
  KilledKernel k(win, surv, mask);
  const auto rep = solve_killed(theta, k, Direction::Backward, f, u, {.tol = tol});
  if (report) *report = rep;
  return u;
}

/// Row z -> g_W(source, z).
inline std::vector<double> free_green_row(const JumpDistribution& theta, const Window& win, const Point& source,
                                          double tol = 1e-10, SolveReport* report = nullptr) {
  std::vector<double> surv(win.size(), 1.0), f(win.size(), 0.0), u(win.size());
  std::vector<std::uint8_t> mask(win.size(), 1);
  f[win.require(source)] = 1.0;
  KilledKernel k(win, surv, mask);
  const auto rep = solve_killed(theta, k, Direction::Forward, f, u, {.tol = tol});
  if (report) *report = rep;
  return u;
}

/// g(0, x) on the window with absorbing boundary. A lower bound for the
/// lattice value; tail_estimate is a_d (radius - ||x||)^{2-d}.
inline GreenValue free_green(const JumpDistribution& theta, const Point& x, const Window& win, double tol = 1e-10) {
  detail::require_clear_of_boundary(theta, win, x);
  detail::require_clear_of_boundary(theta, win, Point{});
  SolveReport rep;
  const auto col = free_green_column(theta, win, x, tol, &rep);
  return {col[win.require(Point{})], detail::boundary_tail(theta, win, x), rep.iterations};
}

/// sum_z g_W(0, z) g_W(z, x), the window version of sum_n (n+1) P(S_n = x).
inline GreenValue occupation_green(const JumpDistribution& theta, const Point& x, const Window& win,
                                   double tol = 1e-10) {
  detail::require_clear_of_boundary(theta, win, x);
  detail::require_clear_of_boundary(theta, win, Point{});
  SolveReport r1, r2;
  const auto row = free_green_row(theta, win, Point{}, tol, &r1);
  const auto col = free_green_column(theta, win, x, tol, &r2);
  double s = 0.0;
  for (std::size_t i = 0; i < win.size(); ++i) s += row[i] * col[i];
  const double gap = std::max(1.0, win.spec().radius - std::sqrt(theta.norm_sq(x - win.spec().center)));
  return {s, green_constant(theta) * std::pow(gap, 4.0 - theta.dim()), r1.iterations + r2.iterations};
}

namespace detail {

// P(S_n = x), n = 0..n_max, for the simple random walk: the n steps are
// split binomially across coordinates, one coordinate at a time.
inline std::vector<double> srw_point_probabilities(int dim, const Point& x, int n_max) {
  std::vector<double> logfact(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int i = 1; i <= n_max; ++i) logfact[i] = logfact[i - 1] + std::log(static_cast<double>(i));
  auto one_dim = [&](int m, int xi) {
    xi = std::abs(xi);
    if (xi > m || ((m + xi) & 1)) return 0.0;
    const int k = (m + xi) / 2;
    return std::exp(logfact[m] - logfact[k] - logfact[m - k] - m * std::numbers::ln2);
  };
  std::vector<double> level(static_cast<std::size_t>(n_max) + 1);
  for (int m = 0; m <= n_max; ++m) level[m] = one_dim(m, x[dim - 1]);
  for (int k = 2; k <= dim; ++k) {
    const int axis = dim - k;
    const double lp = std::log(1.0 / k), lq = std::log1p(-1.0 / k);
    std::vector<double> first(static_cast<std::size_t>(n_max) + 1);
    for (int m = 0; m <= n_max; ++m) first[m] = one_dim(m, x[axis]);
    std::vector<double> next(static_cast<std::size_t>(n_max) + 1, 0.0);
    for (int n = 0; n <= n_max; ++n) {
      double acc = 0.0;
      for (int j = 0; j <= n; ++j) {
        if (first[j] == 0.0 || level[n - j] == 0.0) continue;
        acc += std::exp(logfact[n] - logfact[j] - logfact[n - j] + j * lp + (n - j) * lq) * first[j] * level[n - j];
      }
      next[n] = acc;
    }
    level.swap(next);
  }
  return level;
}

}  // namespace detail

/// Lattice Green function g(0, x) of the d-dimensional simple random walk
/// on all of Z^d, from the time series sum_n P(S_n = x). The tail past
/// n_max uses the local limit theorem, averaged over parity:
/// P(S_n = x) ~ (d / 2 pi n)^{d/2} exp(-d |x|^2 / 2n).
inline double srw_green_series(int dim, const Point& x, int n_max = 3000) {
  if (dim < 3) throw Error(ErrorCode::InvalidArgument, "simple random walk is recurrent for d < 3");
  const auto probs = detail::srw_point_probabilities(dim, x, n_max);
  double g = 0.0;
  for (double p : probs) g += p;
  const double d = dim, r2 = euclidean_norm(x) * euclidean_norm(x);
  const double c = std::pow(d / (2.0 * std::numbers::pi), d / 2.0);
  const double nm = n_max + 0.5;
  g += c * (std::pow(nm, 1.0 - d / 2.0) / (d / 2.0 - 1.0) - 0.5 * d * r2 * std::pow(nm, -d / 2.0) / (d / 2.0));
  return g;
}

/// sum_n (n + 1) P(S_n = x) on all of Z^d for the simple random walk, d >= 5.
inline double srw_occupation_series(int dim, const Point& x, int n_max = 3000) {
  if (dim < 5) throw Error(ErrorCode::InvalidArgument, "vertex-weighted path sum diverges for d < 5");
  const auto probs = detail::srw_point_probabilities(dim, x, n_max);
  double s = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) s += (n + 1.0) * probs[n];
  const double d = dim, r2 = euclidean_norm(x) * euclidean_norm(x);
  const double c = std::pow(d / (2.0 * std::numbers::pi), d / 2.0);
  const double nm = n_max + 0.5;
  s += c * (std::pow(nm, 2.0 - d / 2.0) / (d / 2.0 - 2.0) - 0.5 * d * r2 * std::pow(nm, 1.0 - d / 2.0) / (d / 2.0 - 1.0));
  return s;
}

/// Constant c with sum_z g(0, z) g(z, x) ~ c ||x||^{4-d}, from the
/// continuum convolution of two Green kernels (d >= 5).
inline double occupation_constant(const JumpDistribution& theta) {
  const double d = theta.dim();
  if (theta.dim() < 5) throw Error(ErrorCode::InvalidArgument, "occupation constant needs d >= 5");
  const double a = green_constant(theta);
  const double jac = std::sqrt(std::pow(d, d) * theta.covariance_det());
  const double g = std::tgamma((d - 2.0) / 2.0);
  return a * a * jac * std::pow(std::numbers::pi, d / 2.0) * std::tgamma((d - 4.0) / 2.0) / (g * g);
}

}  // namespace bcrw
