#pragma once

// Branching capacity from the scaling limit ||x||^{d-2} P(snake from x
// visits A) -> a_d BCap(A), by Monte Carlo over probe spheres or by the
// window charge of the deterministic fixpoint, extrapolated in 1/radius.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/green.hpp"
#include "bcrw/lattice.hpp"
#include "bcrw/oracle.hpp"
#include "bcrw/parallel.hpp"
#include "bcrw/rng.hpp"
#include "bcrw/snakes.hpp"
#include "bcrw/target.hpp"
#include "bcrw/trees.hpp"
#include "bcrw/window.hpp"

namespace bcrw {

/// A finite set given by a membership test. Explicit sets also carry their
/// points; implicit ones (large shells) only a count and a radius.
struct PointSet {
  int dim = 0;
  std::function<bool(const Point&)> contains;
  double radius = 0.0;  // Rad = max ||a||
  std::size_t count = 0;
  std::vector<Point> points;  // empty for implicit sets
  Point center{};             // a representative point, used for windows
  /// If positive, A lies in Z^flat x {0}; probes are then indexed by their
  /// remaining coordinates.
  int flat = 0;

  static PointSet from(const JumpDistribution& theta, const TargetSet& a) {
    auto held = std::make_shared<TargetSet>(a);
    PointSet s;
    s.dim = a.dim();
    s.contains = [held](const Point& x) { return held->contains(x); };
    s.radius = set_radius(theta, a);
    s.count = a.size();
    s.points = a.points();
    return s;
  }

  bool is_explicit() const noexcept { return !points.empty(); }
};

enum class CapacityMethod { Mc, Oracle };

inline std::string_view to_string(CapacityMethod m) noexcept { return m == CapacityMethod::Mc ? "mc" : "oracle"; }

struct CapacityOptions {
  CapacityMethod method = CapacityMethod::Mc;
  /// Probe radii (MC) or window radii (oracle). Empty selects 2, 3, 4 times
  /// Rad(A), or 8, 10, 12 windows for small sets.
  std::vector<double> radii;
  /// Random sphere probes per radius on top of the 2d axis probes; 0 means 2d.
  std::size_t probes_per_radius = 0;
  /// Samples shared by all probes, or per probe for the direct estimator.
  std::uint64_t n_samples = 100000;
  /// Kill ball radius as a multiple of the largest probe radius.
  double kill_factor = 4.0;
  std::size_t node_cap = 50'000'000;
  /// Upper limit on the expected number of simulated vertices; 0 disables.
  double budget = 0.0;
  /// Force the per-probe estimator even when the shared one applies.
  bool direct = false;
  std::uint64_t seed = 1;
  std::uint64_t task = 0;
  int workers = 1;
  double tol = 1e-10;
};

struct ProbeEstimate {
  double radius = 0.0;  // nominal radius of the probe's group
  Point point{};
  double norm = 0.0;
  double rescaled = 0.0;  // ||x||^{d-2} p / a_d
  double std_error = 0.0;
  std::uint64_t hits = 0;
};

struct RadiusEstimate {
  double radius = 0.0;
  double rescaled = 0.0;
  double std_error = 0.0;
  double dispersion = 0.0;  // standard deviation across probes
  std::size_t n_probes = 0;
  double bias_bound = 0.0;  // one-sided, rescaled units
};

struct CapacityEstimate {
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<RadiusEstimate> per_radius;
  std::vector<ProbeEstimate> probes;
  CapacityMethod method = CapacityMethod::Mc;
  /// Rescaled value at the innermost radius. When the radii scale with
  /// Rad(A) this is BCap(A) times a factor that does not depend on the
  /// size of A, which is what exponent fits need.
  double scale_proxy = 0.0;
  double scale_proxy_se = 0.0;
  double fit_slope = 0.0;     // coefficient of 1/radius
  double fit_residual = 0.0;  // RMS residual of the affine fit
  std::string correction = "1/radius";
  std::uint64_t n_samples = 0;
  std::uint64_t truncated = 0;
  double kill_radius = 0.0;
  std::uint64_t seed = 0;
  bool shared_samples = false;

  double ci_width() const noexcept { return ci_high - ci_low; }

  /// Spread of the last two radii below the spread of the first two, up to
  /// two combined standard errors.
  bool converging() const {
    if (per_radius.size() < 3) return false;
    const auto& f0 = per_radius[0];
    const auto& f1 = per_radius[1];
    const auto& l0 = per_radius[per_radius.size() - 2];
    const auto& l1 = per_radius.back();
    const double noise = 2.0 * std::sqrt(f0.std_error * f0.std_error + f1.std_error * f1.std_error +
                                         l0.std_error * l0.std_error + l1.std_error * l1.std_error);
    return std::abs(l1.rescaled - l0.rescaled) <= std::abs(f1.rescaled - f0.rescaled) + noise;
  }
};

namespace detail {

struct AffineFit {
  double intercept = 0.0, slope = 0.0, intercept_sd = 0.0, rms = 0.0;
};

// Weighted least squares of y on (1, x). With no usable weights the
// intercept uncertainty comes from the residuals alone.
inline AffineFit affine_fit(std::span<const double> x, std::span<const double> y, std::span<const double> sd) {
  const std::size_t n = x.size();
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd Y(n), W(n);
  const bool weighted = std::all_of(sd.begin(), sd.end(), [](double s) { return s > 0.0; });
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x[i];
    Y(i) = y[i];
    W(i) = weighted ? 1.0 / (sd[i] * sd[i]) : 1.0;
  }
  const Eigen::MatrixXd xtw = X.transpose() * W.asDiagonal();
  const Eigen::Matrix2d m = xtw * X;
  const Eigen::Vector2d beta = m.ldlt().solve(xtw * Y);
  const Eigen::Matrix2d cov = m.inverse();
  AffineFit f;
  f.intercept = beta(0);
  f.slope = beta(1);
  double rss = 0.0, wrss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - beta(0) - beta(1) * x[i];
    rss += e * e;
    wrss += W(i) * e * e;
  }
  f.rms = std::sqrt(rss / static_cast<double>(n));
  const double dof = n > 2 ? static_cast<double>(n - 2) : 1.0;
  if (weighted) f.intercept_sd = std::sqrt(cov(0, 0) * std::max(1.0, wrss / dof));
  else f.intercept_sd = std::sqrt(cov(0, 0) * rss / dof);
  return f;
}

inline CapacityEstimate finish_extrapolation(CapacityEstimate est) {
  std::vector<double> x, y, sd;
  for (const auto& r : est.per_radius) {
    x.push_back(1.0 / r.radius);
    y.push_back(r.rescaled);
    sd.push_back(std::sqrt(r.std_error * r.std_error +
                           r.dispersion * r.dispersion / static_cast<double>(std::max<std::size_t>(1, r.n_probes))));
  }
  const auto fit = affine_fit(x, y, sd);
  est.scale_proxy = est.per_radius.front().rescaled;
  est.scale_proxy_se = sd.front();
  double half = 2.0 * fit.intercept_sd;
  if (x.size() >= 3) {
    // Model uncertainty: the two-largest-radii extrapolation.
    const std::size_t n = x.size();
    const double s2 = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    const double i2 = y[n - 1] - s2 * x[n - 1];
    if (est.method == CapacityMethod::Oracle) half = std::max(half, std::abs(i2 - fit.intercept));
  }
  est.fit_slope = fit.slope;
  est.fit_residual = fit.rms;
  est.value = std::max(0.0, fit.intercept);
  est.ci_low = std::min(est.value, fit.intercept - half);
  est.ci_high = fit.intercept + half;
  return est;
}

struct ProbeSet {
  std::vector<Point> points;
  std::vector<std::size_t> group;  // radius index
  std::vector<double> weight;      // ||x||^{d-2} / a_d
  std::vector<double> norm;
};

// 2d axis points at ||.||-radius rho (rounded), then random sphere points:
// Gaussian vectors with covariance Q scaled to ||.|| = rho and rounded.
inline ProbeSet make_probes(const JumpDistribution& theta, std::span<const double> radii, std::size_t random_per_radius,
                            std::uint64_t seed) {
  const int d = theta.dim();
  const double ad = green_constant(theta);
  const Eigen::MatrixXd chol = theta.covariance().llt().matrixL();
  ProbeSet ps;
  for (std::size_t j = 0; j < radii.size(); ++j) {
    const double rho = radii[j];
    std::unordered_set<Point, PointHash> seen;
    auto add = [&](const Point& p) {
      if (!seen.insert(p).second) return false;
      ps.points.push_back(p);
      ps.group.push_back(j);
      ps.norm.push_back(theta.norm(p));
      ps.weight.push_back(std::pow(ps.norm.back(), d - 2.0) / ad);
      return true;
    };
    for (int i = 0; i < d; ++i) {
      const double unit = theta.norm(unit_point(i));
      const int t = static_cast<int>(std::lround(rho / unit));
      add(unit_point(i, t));
      add(unit_point(i, -t));
    }
    Rng rng = stream_for(seed, task_id("probes") + j, 0);
    std::normal_distribution<double> normal;
    std::size_t made = 0, attempts = 0;
    while (made < random_per_radius && attempts < 50 * random_per_radius + 100) {
      ++attempts;
      Eigen::VectorXd z(d);
      for (int i = 0; i < d; ++i) z(i) = normal(rng);
      const Eigen::VectorXd v = chol * z;
      Point p{};
      // ||v||^2 = z.z / d for v = L z.
      const double scale = rho / std::sqrt(z.squaredNorm() / d);
      for (int i = 0; i < d; ++i) p[i] = static_cast<std::int32_t>(std::lround(v(i) * scale));
      if (add(p)) ++made;
    }
  }
  return ps;
}

inline std::vector<double> default_radii(const PointSet& a) {
  const double base = std::max(2.0 * a.radius, 6.0);
  return {base, 1.5 * base, 2.0 * base};
}

// Green bound on the expected visits to A from a particle at distance gap.
inline double far_visit_bound(const JumpDistribution& theta, std::size_t count, double gap) {
  if (gap <= 1.0) return 1.0;
  return std::min(1.0, static_cast<double>(count) * green_constant(theta) * std::pow(gap, 2.0 - theta.dim()));
}

struct SharedTally {
  std::vector<std::uint64_t> hits;
  std::vector<double> y, y2;  // per radius group: sum over samples of Y and Y^2
  std::uint64_t truncated = 0;
  std::uint64_t nodes = 0;
};

}  // namespace detail

/// Expected number of simulated vertices: the mean exit time of the step
/// walk from a ||.||-ball is about its squared radius.
inline double expected_nodes(double kill_radius, std::uint64_t samples) {
  return kill_radius * kill_radius * static_cast<double>(samples);
}

/// Monte Carlo capacity.
///
/// Shared estimator: one snake from the origin per sample; probe x is hit
/// iff x + s is in A for some label s, so every probe uses every sample.
/// Direct estimator: independent snakes from each probe, stopped at the
/// first visit; used for implicit sets or when forced.
inline CapacityEstimate estimate_bcap_mc(const PointSet& a, const JumpDistribution& theta,
                                         const OffspringDistribution& mu, const CapacityOptions& opt) {
  const int d = theta.dim();
  auto radii = opt.radii.empty() ? detail::default_radii(a) : opt.radii;
  if (radii.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two radii");
  std::sort(radii.begin(), radii.end());
  if (radii.front() < 2.0 * a.radius - 1e-9)
    throw Error(ErrorCode::RadiusTooSmall, "probe radii must be at least 2 Rad(A)");
  const std::size_t random = opt.probes_per_radius == 0 ? static_cast<std::size_t>(2 * d) : opt.probes_per_radius;
  const auto probes = detail::make_probes(theta, radii, random, opt.seed);
  const std::size_t np = probes.points.size(), ng = radii.size();
  const double kill_r = opt.kill_factor * radii.back();
  const KillBall kill{Point{}, kill_r};
  const bool shared = !opt.direct;

  CapacityEstimate est;
  est.method = CapacityMethod::Mc;
  est.kill_radius = kill_r;
  est.seed = opt.seed;
  est.shared_samples = shared;
  std::vector<std::size_t> group_size(ng, 0);
  for (auto g : probes.group) ++group_size[g];

  const SnakeModel model(theta, mu);
  std::vector<double> p_hat(np), p_se(np);
  std::vector<std::uint64_t> hits(np, 0);
  std::vector<double> group_mean(ng, 0.0), group_se(ng, 0.0);

  if (shared) {
    const double cost = expected_nodes(kill_r, opt.n_samples);
    if (opt.budget > 0.0 && cost > opt.budget)
      throw Error(ErrorCode::BudgetExceeded, "expected " + std::to_string(cost) + " vertices exceeds the budget");
    // Per-label work: either look up a - s among the probes for every a, or
    // test x + s in A for every probe with a compatible radius.
    std::unordered_map<Point, std::uint32_t, PointHash> probe_index;
    for (std::size_t i = 0; i < np; ++i) probe_index.emplace(probes.points[i], static_cast<std::uint32_t>(i));
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double nrm : probes.norm) {
      lo = std::min(lo, nrm);
      hi = std::max(hi, nrm);
    }
    const double s_lo = std::max(0.0, lo - a.radius - 1.0), s_hi = hi + a.radius + 1.0;
    const bool by_tail = a.flat > 0 && a.flat < d;
    const bool per_point = !by_tail && a.is_explicit() && a.points.size() <= np;
    auto tail = [&](Point x) {
      for (int i = 0; i < a.flat; ++i) x[i] = 0;
      return x;
    };
    std::unordered_map<Point, std::vector<std::uint32_t>, PointHash> tail_index;
    if (by_tail)
      for (std::size_t i = 0; i < np; ++i) tail_index[tail(probes.points[i])].push_back(static_cast<std::uint32_t>(i));
    std::vector<std::uint32_t> order(np);
    for (std::size_t i = 0; i < np; ++i) order[i] = static_cast<std::uint32_t>(i);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return probes.norm[i] < probes.norm[j]; });
    std::vector<double> sorted_norm(np);
    for (std::size_t i = 0; i < np; ++i) sorted_norm[i] = probes.norm[order[i]];

    const auto blocks = map_blocks<detail::SharedTally>(opt.n_samples, kSampleBlock, opt.workers,
                                                        [&](std::size_t b, std::size_t e) {
      detail::SharedTally t;
      t.hits.assign(np, 0);
      t.y.assign(ng, 0.0);
      t.y2.assign(ng, 0.0);
      std::vector<std::uint64_t> last(np, std::numeric_limits<std::uint64_t>::max());
      std::vector<double> y(ng);
      SnakeWorkspace ws;
      SnakeLimits lim{opt.node_cap, 0, kill};
      for (std::size_t s = b; s < e; ++s) {
        Rng rng = stream_for(opt.seed, opt.task, s);
        std::fill(y.begin(), y.end(), 0.0);
        auto mark = [&](std::uint32_t i) {
          if (last[i] == s) return;
          last[i] = s;
          ++t.hits[i];
          y[probes.group[i]] += probes.weight[i];
        };
        const auto run = run_snake(model, SnakeKind::Snake, Point{}, lim, rng, ws, [&](const Point& lab) {
          const double n = theta.norm(lab);
          if (n < s_lo || n > s_hi) return false;
          if (by_tail) {
            const auto it = tail_index.find(tail(-lab));
            if (it != tail_index.end())
              for (auto i : it->second)
                if (a.contains(probes.points[i] + lab)) mark(i);
          } else if (per_point) {
            for (const auto& pa : a.points) {
              const auto it = probe_index.find(pa - lab);
              if (it != probe_index.end()) mark(it->second);
            }
          } else {
            // ||x + s|| <= Rad forces | ||x|| - ||s|| | <= Rad.
            const auto first = std::lower_bound(sorted_norm.begin(), sorted_norm.end(), n - a.radius - 1.0);
            for (auto it = first; it != sorted_norm.end() && *it <= n + a.radius + 1.0; ++it) {
              const auto i = order[static_cast<std::size_t>(it - sorted_norm.begin())];
              if (a.contains(probes.points[i] + lab)) mark(i);
            }
          }
          return false;
        });
        if (run.capped) ++t.truncated;
        t.nodes += run.nodes;
        for (std::size_t g = 0; g < ng; ++g) {
          const double v = y[g] / static_cast<double>(group_size[g]);
          t.y[g] += v;
          t.y2[g] += v * v;
        }
      }
      return t;
    });
    std::vector<double> ys(ng, 0.0), y2s(ng, 0.0);
    for (const auto& t : blocks) {
      for (std::size_t i = 0; i < np; ++i) hits[i] += t.hits[i];
      for (std::size_t g = 0; g < ng; ++g) {
        ys[g] += t.y[g];
        y2s[g] += t.y2[g];
      }
      est.truncated += t.truncated;
    }
    const double n = static_cast<double>(opt.n_samples);
    for (std::size_t g = 0; g < ng; ++g) {
      group_mean[g] = ys[g] / n;
      const double var = std::max(0.0, y2s[g] / n - group_mean[g] * group_mean[g]);
      group_se[g] = std::sqrt(var / std::max(1.0, n - 1.0));
    }
    for (std::size_t i = 0; i < np; ++i) {
      const auto e = bernoulli_estimate(hits[i], opt.n_samples);
      p_hat[i] = e.value;
      p_se[i] = e.std_error;
    }
    est.n_samples = opt.n_samples;
  } else {
    // Pilot run, then the remaining budget split across radius groups in
    // proportion to their estimated standard deviation.
    const double cost = expected_nodes(kill_r, opt.n_samples * np);
    if (opt.budget > 0.0 && cost > opt.budget)
      throw Error(ErrorCode::BudgetExceeded, "expected " + std::to_string(cost) + " vertices exceeds the budget");
    const std::uint64_t pilot = std::max<std::uint64_t>(64, opt.n_samples / 10);
    std::vector<double> g_sd(ng, 0.0);
    std::vector<std::uint64_t> pilot_hits(np), pilot_n(np, pilot);
    auto run_probe = [&](std::size_t i, std::uint64_t n, std::uint64_t task) {
      McOptions mo{opt.seed, task, opt.workers, opt.node_cap, kill};
      std::uint64_t h = 0, trunc = 0;
      const auto blocks = map_blocks<detail::VisitTally>(n, kSampleBlock, opt.workers, [&](std::size_t b, std::size_t e) {
        detail::VisitTally t;
        SnakeWorkspace ws;
        SnakeLimits lim{mo.node_cap, 0, kill};
        for (std::size_t s = b; s < e; ++s) {
          Rng rng = stream_for(mo.seed, mo.task, s);
          const auto run = run_snake(model, SnakeKind::Snake, probes.points[i], lim, rng, ws,
                                     [&](const Point& p) { return a.contains(p); });
          if (run.stopped) ++t.hits;
          else if (run.capped) ++t.truncated;
        }
        return t;
      });
      for (const auto& t : blocks) {
        h += t.hits;
        trunc += t.truncated;
      }
      est.truncated += trunc;
      return h;
    };
    for (std::size_t i = 0; i < np; ++i) {
      pilot_hits[i] = run_probe(i, pilot, opt.task + 2 * i);
      const double p = (static_cast<double>(pilot_hits[i]) + 0.5) / static_cast<double>(pilot + 1);
      g_sd[probes.group[i]] += probes.weight[i] * std::sqrt(p * (1.0 - p));
    }
    const double total_sd = std::accumulate(g_sd.begin(), g_sd.end(), 0.0);
    const double remaining = static_cast<double>(opt.n_samples - std::min(opt.n_samples, pilot)) * static_cast<double>(np);
    for (std::size_t i = 0; i < np; ++i) {
      const auto g = probes.group[i];
      const double share = total_sd > 0.0 ? g_sd[g] / total_sd : 1.0 / static_cast<double>(ng);
      const auto extra = static_cast<std::uint64_t>(remaining * share / static_cast<double>(group_size[g]));
      const auto h = extra > 0 ? run_probe(i, extra, opt.task + 2 * i + 1) : 0;
      const auto n = pilot + extra;
      hits[i] = pilot_hits[i] + h;
      const auto e = bernoulli_estimate(hits[i], n);
      p_hat[i] = e.value;
      p_se[i] = e.std_error;
      est.n_samples += n;
    }
    for (std::size_t i = 0; i < np; ++i) {
      const auto g = probes.group[i];
      const double k = static_cast<double>(group_size[g]);
      group_mean[g] += probes.weight[i] * p_hat[i] / k;
      group_se[g] += std::pow(probes.weight[i] * p_se[i] / k, 2);
    }
    for (auto& s : group_se) s = std::sqrt(s);
  }

  for (std::size_t i = 0; i < np; ++i)
    est.probes.push_back({radii[probes.group[i]], probes.points[i], probes.norm[i], probes.weight[i] * p_hat[i],
                          probes.weight[i] * p_se[i], hits[i]});
  for (std::size_t g = 0; g < ng; ++g) {
    RadiusEstimate r;
    r.radius = radii[g];
    r.rescaled = group_mean[g];
    r.std_error = group_se[g];
    r.n_probes = group_size[g];
    double ss = 0.0;
    for (std::size_t i = 0; i < np; ++i)
      if (probes.group[i] == g) ss += std::pow(probes.weight[i] * p_hat[i] - group_mean[g], 2);
    r.dispersion = group_size[g] > 1 ? std::sqrt(ss / static_cast<double>(group_size[g] - 1)) : 0.0;
    // Particles leaving the kill ball: one expected exit, each visiting the
    // probe's target with at most the Green bound (or the capacity scaling
    // of the estimate itself, whichever is smaller).
    const double gap = kill_r - radii[g] - a.radius;
    const double scaled = r.rescaled * std::pow(radii[g] / std::max(gap, 1.0), d - 2.0);
    const double green = detail::far_visit_bound(theta, a.count, gap) * std::pow(radii[g], d - 2.0) / green_constant(theta);
    r.bias_bound = std::min(green, scaled) + static_cast<double>(est.truncated) /
                                                 static_cast<double>(std::max<std::uint64_t>(1, est.n_samples)) *
                                                 std::pow(radii[g], d - 2.0) / green_constant(theta);
    est.per_radius.push_back(r);
  }
  return detail::finish_extrapolation(std::move(est));
}

/// Oracle capacity: the charge sum_y (p(y) - P p(y)) of the window
/// fixpoint, extrapolated affinely in 1/W over the window radii.
inline CapacityEstimate estimate_bcap_oracle(const TargetSet& a, const JumpDistribution& theta,
                                             const OffspringDistribution& mu, const CapacityOptions& opt) {
  // Windows are centred on the rounded centroid, so integer translates of
  // A give identical charges.
  Point c{};
  for (int i = 0; i < a.dim(); ++i) {
    double m = 0.0;
    for (const auto& p : a.points()) m += p[i];
    c[i] = static_cast<std::int32_t>(std::lround(m / static_cast<double>(a.size())));
  }
  const auto local = a.translated(-c);
  const double rad = set_radius(theta, local);
  auto windows = opt.radii;
  if (windows.empty()) {
    const double base = std::max(8.0, std::ceil(2.0 * rad));
    windows = {base, base + 2.0, base + 4.0};
  }
  std::sort(windows.begin(), windows.end());
  if (windows.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two windows");
  if (windows.front() < 2.0 * rad - 1e-9) throw Error(ErrorCode::RadiusTooSmall, "window radius below 2 Rad(A)");
  CapacityEstimate est;
  est.method = CapacityMethod::Oracle;
  for (double w : windows) {
    if (opt.budget > 0.0) {
      // Rough site count of the ball.
      const double sites = std::pow(std::numbers::pi, theta.dim() / 2.0) / std::tgamma(theta.dim() / 2.0 + 1.0) *
                           std::pow(w, theta.dim()) * std::sqrt(theta.covariance_det() * std::pow(theta.dim(), theta.dim()));
      if (sites > opt.budget) throw Error(ErrorCode::BudgetExceeded, "window exceeds the site budget");
    }
    const Window win(theta, {Point{}, w});
    const auto fix = solve_visit_fixpoint(local, mu, theta, win, {.tol = opt.tol});
    RadiusEstimate r;
    r.radius = w;
    r.rescaled = window_charge(win, fix);
    r.n_probes = 1;
    est.per_radius.push_back(r);
  }
  return detail::finish_extrapolation(std::move(est));
}

inline CapacityEstimate estimate_bcap(const TargetSet& a, const JumpDistribution& theta,
                                      const OffspringDistribution& mu, const CapacityOptions& opt = {}) {
  if (opt.method == CapacityMethod::Oracle) return estimate_bcap_oracle(a, theta, mu, opt);
  return estimate_bcap_mc(PointSet::from(theta, a), theta, mu, opt);
}

namespace detail {

inline std::string capacity_key(const JumpDistribution& theta, const OffspringDistribution& mu,
                                const CapacityOptions& o) {
  std::ostringstream k;
  k.precision(17);
  k << theta.dim();
  for (const auto& at : theta.atoms()) {
    for (int i = 0; i < theta.dim(); ++i) k << ',' << at.v[i];
    k << ':' << at.p;
  }
  k << '|';
  for (double p : mu.pmf()) k << p << ',';
  k << '|' << static_cast<int>(o.method) << ',' << o.probes_per_radius << ',' << o.n_samples << ',' << o.kill_factor
    << ',' << o.node_cap << ',' << o.direct << ',' << o.seed << ',' << o.task << ',' << o.tol;
  for (double r : o.radii) k << ',' << r;
  return k.str();
}

}  // namespace detail

/// BCap({0}), cached per (theta, mu, options). Worker count does not enter
/// the key because it does not change the result.
inline CapacityEstimate bcap_point(const JumpDistribution& theta, const OffspringDistribution& mu,
                                   const CapacityOptions& opt = {}) {
  static std::mutex mutex;
  static std::map<std::string, CapacityEstimate> cache;
  const auto key = detail::capacity_key(theta, mu, opt);
  {
    std::lock_guard lock(mutex);
    if (const auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto est = estimate_bcap(TargetSet(theta.dim(), {Point{}}), theta, mu, opt);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(est)).first->second;
}

/// B^m(r) = {(z, 0): z in Z^m, |z| <= r}.
inline TargetSet coordinate_ball(int dim, int m, int r) {
  if (m < 1 || m > dim) throw Error(ErrorCode::InvalidArgument, "ball dimension m must be in [1, d]");
  std::vector<Point> pts;
  std::vector<int> c(m, -r);
  const long long r2 = static_cast<long long>(r) * r;
  for (;;) {
    long long s = 0;
    for (int v : c) s += static_cast<long long>(v) * v;
    if (s <= r2) {
      Point p{};
      for (int i = 0; i < m; ++i) p[i] = c[i];
      pts.push_back(p);
    }
    int i = 0;
    while (i < m && ++c[i] > r) c[i++] = -r;
    if (i == m) break;
  }
  return TargetSet(dim, std::move(pts));
}

/// B^m(r) as an implicit set: membership by arithmetic, Rad by enumeration.
inline PointSet coordinate_ball_set(const JumpDistribution& theta, int m, int r) {
  const int dim = theta.dim();
  if (m < 1 || m > dim) throw Error(ErrorCode::InvalidArgument, "ball dimension m must be in [1, d]");
  const long long r2 = static_cast<long long>(r) * r;
  PointSet s;
  s.dim = dim;
  s.flat = m;
  s.contains = [m, dim, r2](const Point& x) {
    long long q = 0;
    for (int i = 0; i < m; ++i) q += static_cast<long long>(x[i]) * x[i];
    if (q > r2) return false;
    for (int i = m; i < dim; ++i)
      if (x[i] != 0) return false;
    return true;
  };
  std::vector<int> c(m, -r);
  for (;;) {
    long long q = 0;
    for (int v : c) q += static_cast<long long>(v) * v;
    if (q <= r2) {
      Point p{};
      for (int i = 0; i < m; ++i) p[i] = c[i];
      s.radius = std::max(s.radius, theta.norm(p));
      ++s.count;
    }
    int i = 0;
    while (i < m && ++c[i] > r) c[i++] = -r;
    if (i == m) break;
  }
  return s;
}

struct LogLogFit {
  double slope = 0.0, slope_se = 0.0, intercept = 0.0, rms = 0.0;
};

inline LogLogFit loglog_fit(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(std::max(y[i], 1e-300)));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) rss += std::pow(ly[i] - f.intercept - f.slope * lx[i], 2);
  f.rms = std::sqrt(rss / n);
  f.slope_se = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

struct BallScalingReport {
  int dim = 0, m = 0;
  std::vector<int> r;
  std::vector<std::size_t> sizes;
  std::vector<CapacityEstimate> capacities;
  LogLogFit plain;      // log proxy on log r
  LogLogFit corrected;  // log(proxy * log(2r+1)) on log r
  LogLogFit extrapolated;  // log of the extrapolated capacities on log r
  double improvement = 0.0;  // 1 - corrected.rms / plain.rms
  double predicted_exponent = 0.0;
  std::string regime;
};

/// Capacity growth of B^m(r) against the three-case exponent table. Probe
/// radii are 2, 3 and 4 times Rad(B^m(r)); fits use the scale proxy.
inline BallScalingReport ball_scaling_study(int m, std::vector<int> r_list, const JumpDistribution& theta,
                                            const OffspringDistribution& mu, const CapacityOptions& opt) {
  const int d = theta.dim();
  if (m < 1 || m > d) throw Error(ErrorCode::InvalidArgument, "ball dimension m must be in [1, d]");
  if (r_list.size() < 3) throw Error(ErrorCode::InvalidArgument, "need at least three radii");
  if (r_list.front() < 1 || std::adjacent_find(r_list.begin(), r_list.end(), std::greater_equal<>()) != r_list.end())
    throw Error(ErrorCode::InvalidArgument, "radii must be positive and strictly increasing");
  BallScalingReport rep;
  rep.dim = d;
  rep.m = m;
  rep.r = r_list;
  if (m <= d - 5) {
    rep.regime = "r^m";
    rep.predicted_exponent = m;
  } else if (m == d - 4) {
    rep.regime = "r^(d-4)/log r";
    rep.predicted_exponent = d - 4;
  } else {
    rep.regime = "r^(d-4)";
    rep.predicted_exponent = d - 4;
  }
  std::vector<PointSet> balls;
  double total = 0.0;
  for (int r : r_list) {
    balls.push_back(coordinate_ball_set(theta, m, r));
    total += expected_nodes(opt.kill_factor * 4.0 * balls.back().radius, opt.n_samples);
  }
  // Check the whole budget before simulating anything.
  if (opt.budget > 0.0 && total > opt.budget)
    throw Error(ErrorCode::BudgetExceeded, "ball study needs about " + std::to_string(total) + " vertices");
  std::vector<double> rs, proxy, corrected, extrap;
  for (std::size_t k = 0; k < r_list.size(); ++k) {
    auto o = opt;
    o.method = CapacityMethod::Mc;
    o.task = opt.task + 1000 * (k + 1);
    o.budget = 0.0;
    const double rad = balls[k].radius;
    o.radii = {2.0 * rad, 3.0 * rad, 4.0 * rad};
    auto est = estimate_bcap_mc(balls[k], theta, mu, o);
    rep.sizes.push_back(balls[k].count);
    rs.push_back(r_list[k]);
    proxy.push_back(est.scale_proxy);
    corrected.push_back(est.scale_proxy * std::log(2.0 * r_list[k] + 1.0));
    extrap.push_back(std::max(est.value, 1e-12));
    rep.capacities.push_back(std::move(est));
  }
  rep.plain = loglog_fit(rs, proxy);
  rep.corrected = loglog_fit(rs, corrected);
  rep.extrapolated = loglog_fit(rs, extrap);
  rep.improvement = rep.plain.rms > 0.0 ? 1.0 - rep.corrected.rms / rep.plain.rms : 0.0;
  return rep;
}

}  // namespace bcrw
