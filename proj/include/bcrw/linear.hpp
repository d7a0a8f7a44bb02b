#pragma once

// Linear solvers for walks with site-dependent survival on a window.
//
// Backward form (a function of the starting point):
//   u(x) = f(x) + s(x) * sum_a theta_a u(x + v_a) * [x + v_a in S]
// Forward form (a function of the end point):
//   v(y) = f(y) + sum_a theta_a s(y - v_a) v(y - v_a) * [y - v_a in S]
// for x, y in the active set S. With u = v = 0 off S these are the Green
// sums of the walk killed at rate 1 - s and on leaving S.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/lattice.hpp"
#include "bcrw/window.hpp"

namespace bcrw {

enum class Direction { Backward, Forward };
enum class SolverKind { Auto, Neumann, ConjugateGradient };

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 200000;
  SolverKind kind = SolverKind::Auto;
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;  // max-norm residual of the fixed-point equation
  bool converged = false;
};

/// Survival-weighted step kernel restricted to a site mask.
class KilledKernel {
 public:
  KilledKernel(const Window& window, std::span<const double> survival, std::span<const std::uint8_t> mask)
      : win_(window), surv_(survival), mask_(mask) {
    if (survival.size() != window.size() || mask.size() != window.size())
      throw Error(ErrorCode::InvalidArgument, "kernel field sizes do not match window");
  }

  const Window& window() const noexcept { return win_; }
  std::span<const double> survival() const noexcept { return surv_; }
  std::span<const std::uint8_t> mask() const noexcept { return mask_; }

  /// out = f + K u for the chosen direction; sites off the mask get 0.
  void apply(Direction dir, std::span<const double> f, std::span<const double> u, std::span<double> out) const {
    const std::size_t n = win_.size();
    const std::size_t na = win_.atoms();
    for (std::size_t x = 0; x < n; ++x) {
      if (!mask_[x]) {
        out[x] = 0.0;
        continue;
      }
      double acc = 0.0;
      if (dir == Direction::Backward) {
        for (std::size_t a = 0; a < na; ++a) {
          const auto y = win_.forward(x, a);
          if (y >= 0 && mask_[y]) acc += win_.step_prob(a) * u[y];
        }
        out[x] = f[x] + surv_[x] * acc;
      } else {
        for (std::size_t a = 0; a < na; ++a) {
          const auto y = win_.backward(x, a);
          if (y >= 0 && mask_[y]) acc += win_.step_prob(a) * surv_[y] * u[y];
        }
        out[x] = f[x] + acc;
      }
    }
  }

  double residual(Direction dir, std::span<const double> f, std::span<const double> u) const {
    std::vector<double> tmp(win_.size());
    apply(dir, f, u, tmp);
    double r = 0.0;
    for (std::size_t x = 0; x < win_.size(); ++x)
      if (mask_[x]) r = std::max(r, std::abs(tmp[x] - u[x]));
    return r;
  }

 private:
  const Window& win_;
  std::span<const double> surv_;
  std::span<const std::uint8_t> mask_;
};

namespace detail {

inline SolveReport solve_neumann(const KilledKernel& k, Direction dir, std::span<const double> f,
                                 std::span<double> u, const SolveOptions& opt) {
  const std::size_t n = k.window().size();
  std::vector<double> next(n);
  std::copy(f.begin(), f.end(), u.begin());
  for (std::size_t x = 0; x < n; ++x)
    if (!k.mask()[x]) u[x] = 0.0;
  SolveReport rep;
  for (int it = 1; it <= opt.max_iter; ++it) {
    k.apply(dir, f, u, next);
    double inc = 0.0;
    for (std::size_t x = 0; x < n; ++x) inc = std::max(inc, std::abs(next[x] - u[x]));
    std::copy(next.begin(), next.end(), u.begin());
    rep.iterations = it;
    rep.residual = inc;
    if (inc < opt.tol) {
      rep.converged = true;
      break;
    }
  }
  return rep;
}

// Preconditioned CG on M = S^{-1} - P restricted to sites with s > 0.
// Requires a symmetric step law so that P is symmetric.
inline SolveReport solve_cg(const KilledKernel& k, Direction dir, std::span<const double> f, std::span<double> u,
                            const SolveOptions& opt) {
  const Window& win = k.window();
  const std::size_t n = win.size();
  const std::size_t na = win.atoms();
  const auto surv = k.survival();
  const auto mask = k.mask();

  std::vector<std::int32_t> act_of(n, -1);
  std::vector<std::int32_t> sites;
  for (std::size_t x = 0; x < n; ++x)
    if (mask[x] && surv[x] > 0.0) {
      act_of[x] = static_cast<std::int32_t>(sites.size());
      sites.push_back(static_cast<std::int32_t>(x));
    }
  const std::size_t m = sites.size();
  std::vector<std::int32_t> nb(m * na, -1);
  std::vector<double> inv_s(m);
  for (std::size_t i = 0; i < m; ++i) {
    inv_s[i] = 1.0 / surv[sites[i]];
    for (std::size_t a = 0; a < na; ++a) {
      const auto y = win.forward(sites[i], a);
      nb[i * na + a] = (y >= 0) ? act_of[y] : -1;
    }
  }
  auto matvec = [&](const std::vector<double>& w, std::vector<double>& out) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t a = 0; a < na; ++a) {
        const auto j = nb[i * na + a];
        if (j >= 0) acc += win.step_prob(a) * w[j];
      }
      out[i] = inv_s[i] * w[i] - acc;
    }
  };

  // Right-hand side on the active sites.
  std::vector<double> b(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = static_cast<std::size_t>(sites[i]);
    if (dir == Direction::Backward) {
      double acc = 0.0;  // contributions of masked sites with zero survival (u = f there)
      for (std::size_t a = 0; a < na; ++a) {
        const auto y = win.forward(x, a);
        if (y >= 0 && mask[y] && act_of[y] < 0) acc += win.step_prob(a) * f[y];
      }
      b[i] = inv_s[i] * f[x] + acc;
    } else {
      b[i] = f[x];
    }
  }

  std::vector<double> w(m, 0.0), r = b, z(m), p(m), q(m);
  for (std::size_t i = 0; i < m; ++i) z[i] = r[i] / inv_s[i];
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < m; ++i) rz += r[i] * z[i];
  SolveReport rep;
  const double stop = opt.tol * 0.05;
  auto maxabs = [](const std::vector<double>& v) {
    double mx = 0.0;
    for (double e : v) mx = std::max(mx, std::abs(e));
    return mx;
  };
  if (maxabs(r) <= stop) rep.converged = true;
  for (int it = 1; it <= opt.max_iter && !rep.converged; ++it) {
    matvec(p, q);
    double pq = 0.0;
    for (std::size_t i = 0; i < m; ++i) pq += p[i] * q[i];
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < m; ++i) {
      w[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    rep.iterations = it;
    if (it % 25 == 0) {  // refresh the recursive residual
      matvec(w, q);
      for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - q[i];
    }
    if (maxabs(r) <= stop) {
      matvec(w, q);
      for (std::size_t i = 0; i < m; ++i) r[i] = b[i] - q[i];
      if (maxabs(r) <= stop) {
        rep.converged = true;
        break;
      }
    }
    double rz_new = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = r[i] / inv_s[i];
      rz_new += r[i] * z[i];
    }
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
  }

  std::fill(u.begin(), u.end(), 0.0);
  if (dir == Direction::Backward) {
    for (std::size_t i = 0; i < m; ++i) u[sites[i]] = w[i];
    for (std::size_t x = 0; x < n; ++x)
      if (mask[x] && act_of[x] < 0) u[x] = f[x];
  } else {
    // w = s v on active sites.
    for (std::size_t i = 0; i < m; ++i) u[sites[i]] = w[i] * inv_s[i];
    for (std::size_t x = 0; x < n; ++x) {
      if (!mask[x] || act_of[x] >= 0) continue;
      double acc = 0.0;
      for (std::size_t a = 0; a < na; ++a) {
        const auto y = win.backward(x, a);
        if (y >= 0 && act_of[y] >= 0) acc += win.step_prob(a) * w[act_of[y]];
      }
      u[x] = f[x] + acc;
    }
  }
  rep.residual = k.residual(dir, f, u);
  rep.converged = rep.converged && rep.residual < opt.tol;
  return rep;
}

}  // namespace detail

/// Solves the backward or forward equation. Auto picks CG for symmetric
/// step laws and the Neumann series otherwise.
inline SolveReport solve_killed(const JumpDistribution& theta, const KilledKernel& kernel, Direction dir,
                                std::span<const double> f, std::span<double> u, const SolveOptions& opt = {}) {
  SolverKind kind = opt.kind;
  if (kind == SolverKind::Auto) kind = theta.symmetric() ? SolverKind::ConjugateGradient : SolverKind::Neumann;
  if (kind == SolverKind::ConjugateGradient && !theta.symmetric())
    throw Error(ErrorCode::InvalidArgument, "conjugate gradient needs a symmetric step law");
  SolveReport rep = kind == SolverKind::ConjugateGradient ? detail::solve_cg(kernel, dir, f, u, opt)
                                                          : detail::solve_neumann(kernel, dir, f, u, opt);
  if (!rep.converged)
    throw Error(ErrorCode::NoConvergence,
                "linear solve stalled at residual " + std::to_string(rep.residual) + " after " +
                    std::to_string(rep.iterations) + " iterations");
  return rep;
}

}  // namespace bcrw
