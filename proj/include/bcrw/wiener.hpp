#pragma once

// Dyadic shells of infinite sets, the Wiener series sum_n BCap(K_n) /
// 2^{n(d-4)} with an indicative verdict, and infinite-snake diagnostics for
// shell visits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "bcrw/capacity.hpp"
#include "bcrw/errors.hpp"
#include "bcrw/lattice.hpp"
#include "bcrw/parallel.hpp"
#include "bcrw/rng.hpp"
#include "bcrw/snakes.hpp"
#include "bcrw/target.hpp"
#include "bcrw/trees.hpp"

namespace bcrw {

enum class SetKind { Subspace, AxisPoints, ExplicitShells, Predicate };

inline std::string_view to_string(SetKind k) noexcept {
  switch (k) {
    case SetKind::Subspace: return "subspace";
    case SetKind::AxisPoints: return "axis_points";
    case SetKind::ExplicitShells: return "explicit_shells";
    case SetKind::Predicate: return "predicate";
  }
  return "unknown";
}

inline long long squared_length(const Point& p) noexcept {
  long long s = 0;
  for (int v : p) s += static_cast<long long>(v) * v;
  return s;
}

/// Dyadic shell index of a point: 2^n <= |a| < 2^{n+1}; -1 for the origin.
inline int shell_index(const Point& p) noexcept {
  const long long s = squared_length(p);
  if (s == 0) return -1;
  int n = 0;
  while ((4LL << (2 * n)) <= s) ++n;
  return n;
}

inline bool in_shell(const Point& p, int n) noexcept {
  const long long s = squared_length(p);
  return s >= (1LL << (2 * n)) && s < (1LL << (2 * n + 2));
}

/// A builtin set for the "predicate" kind: membership plus a generator of
/// the points of each shell.
struct NamedSet {
  std::string description;
  std::function<bool(const Point&, int dim)> contains;
  std::function<std::vector<Point>(int n, int dim)> shell;
};

inline const std::map<std::string, NamedSet>& predicate_registry() {
  static const std::map<std::string, NamedSet> registry = [] {
    std::map<std::string, NamedSet> r;
    r["single_point"] = {"the point (5, 0, ..., 0)",
                         [](const Point& p, int) { return p == unit_point(0, 5); },
                         [](int n, int) { return n == 2 ? std::vector<Point>{unit_point(0, 5)} : std::vector<Point>{}; }};
    r["finite_cluster"] = {"the lattice points with |a| <= 3",
                           [](const Point& p, int) { return squared_length(p) <= 9; },
                           [](int n, int dim) {
                             std::vector<Point> out;
                             if (n > 1) return out;
                             std::vector<int> c(dim, -3);
                             for (;;) {
                               Point p{};
                               for (int i = 0; i < dim; ++i) p[i] = c[i];
                               if (squared_length(p) <= 9 && in_shell(p, n)) out.push_back(p);
                               int i = 0;
                               while (i < dim && ++c[i] > 3) c[i++] = -3;
                               if (i == dim) break;
                             }
                             return out;
                           }};
    r["diagonal"] = {"the line {(t, t, 0, ..., 0)}",
                     [](const Point& p, int dim) {
                       if (p[0] != p[1]) return false;
                       for (int i = 2; i < dim; ++i)
                         if (p[i] != 0) return false;
                       return true;
                     },
                     [](int n, int) {
                       std::vector<Point> out;
                       for (int t = 1; 2LL * t * t < (1LL << (2 * n + 2)); ++t) {
                         Point p{};
                         p[0] = p[1] = t;
                         if (in_shell(p, n)) {
                           out.push_back(p);
                           out.push_back(-p);
                         }
                       }
                       std::sort(out.begin(), out.end());
                       return out;
                     }};
    return r;
  }();
  return registry;
}

/// An infinite subset of Z^d described by kind and parameters.
struct InfiniteSetSpec {
  SetKind kind = SetKind::AxisPoints;
  int dim = 5;
  int m = 1;                             // subspace dimension
  std::string stride = "powers_of_2";    // axis_points: "powers_of_2" or "all"
  std::map<int, std::vector<Point>> shells;  // explicit_shells
  std::string predicate;                 // predicate registry name

  static InfiniteSetSpec subspace(int dim, int m) { return {SetKind::Subspace, dim, m, {}, {}, {}}; }
  static InfiniteSetSpec axis_points(int dim, std::string stride = "powers_of_2") {
    return {SetKind::AxisPoints, dim, 1, std::move(stride), {}, {}};
  }
  static InfiniteSetSpec explicit_shells(int dim, std::map<int, std::vector<Point>> s) {
    return {SetKind::ExplicitShells, dim, 1, {}, std::move(s), {}};
  }
  static InfiniteSetSpec named(int dim, std::string name) { return {SetKind::Predicate, dim, 1, {}, {}, std::move(name)}; }

  void validate() const {
    if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::InvalidArgument, "set dimension out of range");
    switch (kind) {
      case SetKind::Subspace:
        if (m < 1 || m > dim) throw Error(ErrorCode::InvalidArgument, "subspace dimension must be in [1, d]");
        break;
      case SetKind::AxisPoints:
        if (stride != "powers_of_2" && stride != "all")
          throw Error(ErrorCode::InvalidArgument, "axis stride must be powers_of_2 or all");
        break;
      case SetKind::ExplicitShells:
        for (const auto& [n, pts] : shells)
          for (const auto& p : pts)
            if (!in_shell(p, n)) throw Error(ErrorCode::InvalidArgument, "point outside its shell " + std::to_string(n));
        break;
      case SetKind::Predicate:
        if (!predicate_registry().contains(predicate))
          throw Error(ErrorCode::InvalidArgument, "unknown predicate '" + predicate + "'");
        break;
    }
  }

  std::string describe() const {
    switch (kind) {
      case SetKind::Subspace: return "subspace m=" + std::to_string(m);
      case SetKind::AxisPoints: return "axis_points stride=" + stride;
      case SetKind::ExplicitShells: return "explicit_shells";
      case SetKind::Predicate: return "predicate " + predicate;
    }
    return "";
  }

  bool contains(const Point& p) const {
    switch (kind) {
      case SetKind::Subspace:
        for (int i = m; i < dim; ++i)
          if (p[i] != 0) return false;
        return true;
      case SetKind::AxisPoints: {
        for (int i = 1; i < dim; ++i)
          if (p[i] != 0) return false;
        if (stride == "all") return true;
        const int t = p[0];
        return t >= 2 && (t & (t - 1)) == 0;
      }
      case SetKind::ExplicitShells: {
        const int n = shell_index(p);
        const auto it = shells.find(n);
        return it != shells.end() && std::find(it->second.begin(), it->second.end(), p) != it->second.end();
      }
      case SetKind::Predicate: return predicate_registry().at(predicate).contains(p, dim);
    }
    return false;
  }
};

namespace detail {

// Calls f(p) for every z in Z^m with lo2 <= |z|^2 < hi2, embedded in Z^d.
template <class F>
void for_each_in_annulus(int m, long long lo2, long long hi2, F&& f) {
  const int r = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(hi2))));
  std::vector<int> c(std::max(0, m - 1), -r);
  for (;;) {
    long long q = 0;
    for (int v : c) q += static_cast<long long>(v) * v;
    if (q < hi2) {
      // Last coordinate: lo2 - q <= t^2 <= hi2 - 1 - q.
      const long long top = hi2 - 1 - q;
      long long tmax = static_cast<long long>(std::sqrt(static_cast<double>(top)));
      while (tmax * tmax > top) --tmax;
      while ((tmax + 1) * (tmax + 1) <= top) ++tmax;
      long long tmin = 0;
      if (lo2 - q > 0) {
        tmin = static_cast<long long>(std::sqrt(static_cast<double>(lo2 - q)));
        while (tmin * tmin < lo2 - q) ++tmin;
        while (tmin > 0 && (tmin - 1) * (tmin - 1) >= lo2 - q) --tmin;
      }
      for (long long t = -tmax; t <= tmax; ++t) {
        if (std::llabs(t) < tmin) continue;
        Point p{};
        for (int i = 0; i + 1 < m; ++i) p[i] = c[i];
        p[m - 1] = static_cast<std::int32_t>(t);
        f(p);
      }
    }
    int i = 0;
    while (i < m - 1 && ++c[i] > r) c[i++] = -r;
    if (i == m - 1) break;
  }
}

inline std::uint64_t annulus_count(int m, long long lo2, long long hi2) {
  const int r = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(hi2))));
  std::uint64_t count = 0;
  std::vector<int> c(std::max(0, m - 1), -r);
  auto isqrt_floor = [](long long v) {
    if (v < 0) return -1LL;
    long long t = static_cast<long long>(std::sqrt(static_cast<double>(v)));
    while (t * t > v) --t;
    while ((t + 1) * (t + 1) <= v) ++t;
    return t;
  };
  for (;;) {
    long long q = 0;
    for (int v : c) q += static_cast<long long>(v) * v;
    // #{t : lo2 <= q + t^2 < hi2} = #{|t| <= a} - #{|t| <= b}.
    const long long a = isqrt_floor(hi2 - 1 - q);
    const long long b = isqrt_floor(lo2 - 1 - q);
    if (a >= 0) count += static_cast<std::uint64_t>(2 * a + 1) - (b >= 0 ? static_cast<std::uint64_t>(2 * b + 1) : 0);
    int i = 0;
    while (i < m - 1 && ++c[i] > r) c[i++] = -r;
    if (i == m - 1) break;
  }
  return count;
}

}  // namespace detail

/// |K_n| without materializing the shell.
inline std::uint64_t shell_count(const InfiniteSetSpec& k, int n) {
  const long long lo2 = 1LL << (2 * n), hi2 = 1LL << (2 * n + 2);
  switch (k.kind) {
    case SetKind::Subspace: return detail::annulus_count(k.m, lo2, hi2);
    case SetKind::AxisPoints: return k.stride == "all" ? 2ULL << n : (n >= 1 ? 1 : 0);
    case SetKind::ExplicitShells: {
      const auto it = k.shells.find(n);
      return it == k.shells.end() ? 0 : it->second.size();
    }
    case SetKind::Predicate: return predicate_registry().at(k.predicate).shell(n, k.dim).size();
  }
  return 0;
}

/// The points of K_n in lexicographic order.
inline std::vector<Point> shell_points(const InfiniteSetSpec& k, int n, std::size_t cap = 20000) {
  if (n < 0 || n > 28) throw Error(ErrorCode::InvalidArgument, "shell index out of range");
  const auto count = shell_count(k, n);
  if (count > cap)
    throw Error(ErrorCode::ShellTooLarge,
                "shell " + std::to_string(n) + " has " + std::to_string(count) + " points (cap " + std::to_string(cap) + ")");
  std::vector<Point> pts;
  pts.reserve(count);
  switch (k.kind) {
    case SetKind::Subspace:
      detail::for_each_in_annulus(k.m, 1LL << (2 * n), 1LL << (2 * n + 2), [&](const Point& p) { pts.push_back(p); });
      break;
    case SetKind::AxisPoints:
      if (k.stride == "all") {
        for (int t = 1 << n; t < (2 << n); ++t) {
          pts.push_back(unit_point(0, t));
          pts.push_back(unit_point(0, -t));
        }
      } else if (n >= 1) {
        pts.push_back(unit_point(0, 1 << n));
      }
      break;
    case SetKind::ExplicitShells:
      if (const auto it = k.shells.find(n); it != k.shells.end()) pts = it->second;
      break;
    case SetKind::Predicate: pts = predicate_registry().at(k.predicate).shell(n, k.dim); break;
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

struct Shell {
  int n = 0;
  std::vector<Point> points;
};

struct ShellDecomposition {
  InfiniteSetSpec spec;
  int n_lo = 0, n_hi = 0;
  std::vector<Shell> shells;
};

inline ShellDecomposition shells(const InfiniteSetSpec& k, int n_lo, int n_hi, std::size_t cap = 20000) {
  k.validate();
  if (n_lo < 0 || n_lo > n_hi) throw Error(ErrorCode::InvalidArgument, "need 0 <= n_lo <= n_hi");
  ShellDecomposition dec{k, n_lo, n_hi, {}};
  for (int n = n_lo; n <= n_hi; ++n) dec.shells.push_back({n, shell_points(k, n, cap)});
  return dec;
}

/// K_n as a PointSet. Subspace shells above the cap become implicit sets
/// when allowed; everything else goes through shell_points.
inline PointSet shell_set(const JumpDistribution& theta, const InfiniteSetSpec& k, int n, std::size_t cap,
                          bool allow_implicit) {
  const auto count = shell_count(k, n);
  if (count <= cap || !allow_implicit || k.kind != SetKind::Subspace) {
    const auto pts = shell_points(k, n, cap);
    if (pts.empty()) {
      PointSet s;
      s.dim = k.dim;
      s.contains = [](const Point&) { return false; };
      return s;
    }
    auto s = PointSet::from(theta, TargetSet(k.dim, pts));
    if (k.kind == SetKind::Subspace) s.flat = k.m;
    return s;
  }
  PointSet s;
  s.dim = k.dim;
  s.flat = k.m;
  s.count = count;
  const long long lo2 = 1LL << (2 * n), hi2 = 1LL << (2 * n + 2);
  const int m = k.m, dim = k.dim;
  s.contains = [m, dim, lo2, hi2](const Point& x) {
    for (int i = m; i < dim; ++i)
      if (x[i] != 0) return false;
    const long long q = squared_length(x);
    return q >= lo2 && q < hi2;
  };
  detail::for_each_in_annulus(m, lo2, hi2, [&](const Point& p) { s.radius = std::max(s.radius, theta.norm(p)); });
  return s;
}

/// Pieces of a shell with Euclidean diameter at most 2^n/32, from a cubic
/// grid with side floor(2^n / (32 sqrt d)) + 1, in lexicographic cell order.
inline std::vector<std::vector<Point>> shell_refinement(const std::vector<Point>& shell, int n, int dim) {
  if (shell.empty()) throw Error(ErrorCode::EmptySet, "cannot refine an empty shell");
  const double limit = std::ldexp(1.0, n) / 32.0;
  const auto side = static_cast<std::int64_t>(std::floor(limit / std::sqrt(static_cast<double>(dim)))) + 1;
  std::map<Point, std::vector<Point>> cells;
  for (const auto& p : shell) {
    Point key{};
    for (int i = 0; i < dim; ++i) {
      const std::int64_t v = p[i];
      key[i] = static_cast<std::int32_t>(v >= 0 ? v / side : -((-v + side - 1) / side));
    }
    cells[key].push_back(p);
  }
  std::vector<std::vector<Point>> pieces;
  pieces.reserve(cells.size());
  for (auto& [key, pts] : cells) pieces.push_back(std::move(pts));
  return pieces;
}

enum class Verdict { IndicativeRecurrent, IndicativeTransient, Indeterminate };

inline std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::IndicativeRecurrent: return "indicative-recurrent";
    case Verdict::IndicativeTransient: return "indicative-transient";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "unknown";
}

/// Which per-shell number enters the series: the extrapolated capacity, or
/// the rescaled value at probe radius 2 Rad(K_n) (see CapacityEstimate).
enum class CapacityBasis { Extrapolated, Proxy };

inline std::string_view to_string(CapacityBasis b) noexcept {
  return b == CapacityBasis::Extrapolated ? "extrapolated" : "proxy";
}

struct SeriesTerm {
  int n = 0;
  std::uint64_t count = 0;
  std::string source;  // "empty", "point" or "mc"
  double capacity = 0.0;
  double capacity_se = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  double term = 0.0;
  double term_se = 0.0;
  std::optional<CapacityEstimate> estimate;
};

struct RatioFit {
  double rho = 0.0;  // fitted term ratio
  double sigma = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  std::size_t points = 0;
};

struct SeriesReport {
  std::string set;
  int dim = 0;
  int n_lo = 0, n_hi = 0;
  CapacityBasis basis = CapacityBasis::Proxy;
  std::vector<SeriesTerm> terms;
  std::vector<double> partial_sums;
  Verdict verdict = Verdict::Indeterminate;
  RatioFit fit;       // all nonzero terms
  RatioFit tail_fit;  // trailing half
  std::string reason;
};

namespace detail {

// log(term) against n by weighted least squares; rho = exp(slope).
inline RatioFit ratio_fit(const std::vector<SeriesTerm>& terms, std::size_t from) {
  std::vector<double> x, y, sd;
  for (std::size_t i = from; i < terms.size(); ++i) {
    if (terms[i].term <= 0.0) continue;
    x.push_back(terms[i].n);
    y.push_back(std::log(terms[i].term));
    sd.push_back(terms[i].term_se / terms[i].term);
  }
  RatioFit f;
  f.points = x.size();
  if (x.size() < 2) return f;
  const auto a = affine_fit(x, y, sd);
  // affine_fit reports the intercept spread; the slope spread follows from
  // the same weighted normal equations.
  const bool weighted = std::all_of(sd.begin(), sd.end(), [](double s) { return s > 0.0; });
  double sw = 0.0, swx = 0.0, swxx = 0.0, rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = weighted ? 1.0 / (sd[i] * sd[i]) : 1.0;
    sw += w;
    swx += w * x[i];
    swxx += w * x[i] * x[i];
    const double e = y[i] - a.intercept - a.slope * x[i];
    rss += w * e * e;
  }
  const double det = sw * swxx - swx * swx;
  const double dof = x.size() > 2 ? static_cast<double>(x.size() - 2) : 1.0;
  double var = det > 0.0 ? sw / det : 0.0;
  var *= weighted ? std::max(1.0, rss / dof) : rss / dof;
  const double se = std::sqrt(std::max(0.0, var));
  f.rho = std::exp(a.slope);
  f.sigma = f.rho * se;
  f.ci_low = std::exp(a.slope - 2.0 * se);
  f.ci_high = std::exp(a.slope + 2.0 * se);
  return f;
}

}  // namespace detail

/// Verdict from the terms alone, so stored reports can be re-classified.
///   transient:  the last two terms vanish, or rho + 3 sigma < 1 both over
///               all terms and over the trailing half;
///   recurrent:  rho + 3 sigma >= 1 on both fits and the last term is at
///               least half the first nonzero term (bounded below);
///   otherwise indeterminate.
inline void classify(SeriesReport& rep) {
  const auto& t = rep.terms;
  rep.partial_sums.clear();
  double s = 0.0;
  for (const auto& term : t) rep.partial_sums.push_back(s += term.term);
  rep.fit = detail::ratio_fit(t, 0);
  rep.tail_fit = detail::ratio_fit(t, t.size() / 2);
  if (t.size() >= 2 && t[t.size() - 1].term == 0.0 && t[t.size() - 2].term == 0.0) {
    rep.verdict = Verdict::IndicativeTransient;
    rep.reason = "shells eventually empty";
    return;
  }
  if (rep.fit.points < 2 || rep.tail_fit.points < 2) {
    rep.verdict = Verdict::Indeterminate;
    rep.reason = "fewer than two nonzero terms";
    return;
  }
  const bool decays = rep.fit.rho + 3.0 * rep.fit.sigma < 1.0 && rep.tail_fit.rho + 3.0 * rep.tail_fit.sigma < 1.0;
  if (decays) {
    rep.verdict = Verdict::IndicativeTransient;
    rep.reason = "term ratio below 1 by more than 3 sigma";
    return;
  }
  const auto first = std::find_if(t.begin(), t.end(), [](const SeriesTerm& x) { return x.term > 0.0; });
  const bool flat = rep.fit.rho + 3.0 * rep.fit.sigma >= 1.0 && rep.tail_fit.rho + 3.0 * rep.tail_fit.sigma >= 1.0;
  if (flat && t.back().term >= 0.5 * first->term) {
    rep.verdict = Verdict::IndicativeRecurrent;
    rep.reason = "terms bounded below";
    return;
  }
  rep.verdict = Verdict::Indeterminate;
  rep.reason = "no significant decay, but terms not bounded below";
}

struct WienerOptions {
  /// Options for extended shells; probe radii default to 2, 3, 4 Rad(K_n).
  CapacityOptions capacity;
  /// Options for the single-point capacity used by one-point shells.
  CapacityOptions point;
  CapacityBasis basis = CapacityBasis::Proxy;
  std::size_t shell_cap = 20000;
  /// Let subspace shells above the cap run as implicit sets.
  bool implicit_large = false;
};

inline SeriesReport wiener_series(const InfiniteSetSpec& k, int n_lo, int n_hi, const JumpDistribution& theta,
                                  const OffspringDistribution& mu, const WienerOptions& opt = {}) {
  k.validate();
  if (k.dim != theta.dim()) throw Error(ErrorCode::InvalidArgument, "set and step distribution dimensions differ");
  if (n_lo < 0 || n_lo > n_hi) throw Error(ErrorCode::InvalidArgument, "need 0 <= n_lo <= n_hi");
  const int d = theta.dim();
  SeriesReport rep;
  rep.set = k.describe();
  rep.dim = d;
  rep.n_lo = n_lo;
  rep.n_hi = n_hi;
  rep.basis = opt.basis;
  auto pick = [&](const CapacityEstimate& e, double& value, double& se) {
    if (opt.basis == CapacityBasis::Proxy) {
      value = e.scale_proxy;
      se = e.scale_proxy_se;
    } else {
      value = e.value;
      se = (e.ci_high - e.ci_low) / 4.0;
    }
  };
  for (int n = n_lo; n <= n_hi; ++n) {
    SeriesTerm term;
    term.n = n;
    term.count = shell_count(k, n);
    const double scale = std::ldexp(1.0, n * (d - 4));
    if (term.count == 0) {
      term.source = "empty";
    } else if (term.count == 1) {
      term.source = "point";
      const auto e = bcap_point(theta, mu, opt.point);
      pick(e, term.capacity, term.capacity_se);
      term.ci_low = e.ci_low;
      term.ci_high = e.ci_high;
      term.estimate = e;
    } else {
      term.source = "mc";
      auto set = shell_set(theta, k, n, opt.shell_cap, opt.implicit_large);
      if (set.is_explicit()) {
        // Shell-local coordinates: move the rounded centroid to the origin.
        Point c{};
        for (int i = 0; i < d; ++i) {
          double s = 0.0;
          for (const auto& p : set.points) s += p[i];
          c[i] = static_cast<std::int32_t>(std::lround(s / static_cast<double>(set.points.size())));
        }
        const int flat = set.flat;
        std::vector<Point> moved;
        for (const auto& p : set.points) moved.push_back(p - c);
        set = PointSet::from(theta, TargetSet(d, std::move(moved)));
        // A translate stays in the coordinate subspace only if c does.
        bool keeps = flat > 0;
        for (int i = flat; keeps && i < d; ++i) keeps = c[i] == 0;
        if (keeps) set.flat = flat;
      }
      auto o = opt.capacity;
      o.method = CapacityMethod::Mc;
      o.task = opt.capacity.task + 7919ULL * static_cast<std::uint64_t>(n + 1);
      if (o.radii.empty()) o.radii = {2.0 * set.radius, 3.0 * set.radius, 4.0 * set.radius};
      const auto e = estimate_bcap_mc(set, theta, mu, o);
      pick(e, term.capacity, term.capacity_se);
      term.ci_low = e.ci_low;
      term.ci_high = e.ci_high;
      term.estimate = e;
    }
    term.term = term.capacity / scale;
    term.term_se = term.capacity_se / scale;
    rep.terms.push_back(std::move(term));
  }
  classify(rep);
  return rep;
}

struct ShellVisitOptions {
  /// Particles are killed outside the ||.||-ball of radius kill_factor * 2^{n+1}.
  /// A sample costs about that radius to the fourth power in vertices.
  double kill_factor = 1.5;
  std::size_t node_cap = 50'000'000;
  std::uint64_t seed = 1;
  std::uint64_t task = 0;
  int workers = 1;
};

/// P(V_n): the infinite snake from 0 visits the shell (or a piece of it).
/// Killing is one-sided, so the estimate is a lower bound up to noise.
inline Estimate estimate_shell_visit(const JumpDistribution& theta, const OffspringDistribution& mu,
                                     const PointSet& shell, int n, std::uint64_t n_samples,
                                     const ShellVisitOptions& opt = {}) {
  if (n_samples == 0) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  if (shell.count == 0) return {0.0, 0.0, n_samples, 0.0, 0, opt.seed, 0};
  const SnakeModel model(theta, mu);
  const SnakeLimits lim{opt.node_cap, 0, KillBall{Point{}, opt.kill_factor * std::ldexp(1.0, n + 1)}};
  const auto blocks = map_blocks<detail::VisitTally>(n_samples, kSampleBlock, opt.workers, [&](std::size_t b, std::size_t e) {
    detail::VisitTally t;
    SnakeWorkspace ws;
    for (std::size_t s = b; s < e; ++s) {
      Rng rng = stream_for(opt.seed, opt.task, s);
      const auto run = run_snake(model, SnakeKind::Infinite, Point{}, lim, rng, ws,
                                 [&](const Point& p) { return shell.contains(p); });
      if (run.stopped) ++t.hits;
      else if (run.capped) ++t.truncated;
    }
    return t;
  });
  const auto t = detail::sum_tallies(blocks);
  auto est = bernoulli_estimate(t.hits, n_samples);
  est.truncated = t.truncated;
  est.truncation_bias_bound = static_cast<double>(t.truncated) / static_cast<double>(n_samples);
  est.seed = opt.seed;
  return est;
}

struct CorrelationReport {
  int n = 0, m = 0;
  double p_n = 0.0, p_m = 0.0, p_nm = 0.0;
  double ratio = 0.0, ratio_se = 0.0;
  double ci_low = 0.0, ci_high = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t truncated = 0;
};

/// P(V_n and V_m) / (P(V_n) P(V_m)) from one pass of infinite snakes killed
/// outside kill_factor * 2^{m+1}. The standard error is the delta method
/// over the multinomial counts.
inline CorrelationReport correlation_check(const JumpDistribution& theta, const OffspringDistribution& mu,
                                           const PointSet& a, int n, const PointSet& b, int m,
                                           std::uint64_t n_samples, const ShellVisitOptions& opt = {}) {
  if (!(n < m)) throw Error(ErrorCode::InvalidArgument, "need n < m");
  if (a.count == 0 || b.count == 0) throw Error(ErrorCode::EmptySet, "both shells must be nonempty");
  const SnakeModel model(theta, mu);
  const SnakeLimits lim{opt.node_cap, 0, KillBall{Point{}, opt.kill_factor * std::ldexp(1.0, m + 1)}};
  struct Tally {
    std::uint64_t only_a = 0, only_b = 0, both = 0, truncated = 0;
  };
  const auto blocks = map_blocks<Tally>(n_samples, kSampleBlock, opt.workers, [&](std::size_t lo, std::size_t hi) {
    Tally t;
    SnakeWorkspace ws;
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng = stream_for(opt.seed, opt.task, s);
      bool sa = false, sb = false;
      const auto run = run_snake(model, SnakeKind::Infinite, Point{}, lim, rng, ws, [&](const Point& p) {
        sa = sa || a.contains(p);
        sb = sb || b.contains(p);
        return sa && sb;
      });
      if (run.capped) ++t.truncated;
      if (sa && sb) ++t.both;
      else if (sa) ++t.only_a;
      else if (sb) ++t.only_b;
    }
    return t;
  });
  Tally t;
  for (const auto& b2 : blocks) {
    t.only_a += b2.only_a;
    t.only_b += b2.only_b;
    t.both += b2.both;
    t.truncated += b2.truncated;
  }
  CorrelationReport r;
  r.n = n;
  r.m = m;
  r.samples = n_samples;
  r.truncated = t.truncated;
  const double N = static_cast<double>(n_samples);
  const double p11 = t.both / N, p10 = t.only_a / N, p01 = t.only_b / N;
  r.p_n = p11 + p10;
  r.p_m = p11 + p01;
  r.p_nm = p11;
  if (r.p_n > 0.0 && r.p_m > 0.0) {
    r.ratio = p11 / (r.p_n * r.p_m);
    // Gradient of log ratio with respect to (p11, p10, p01).
    const double g11 = (p11 > 0.0 ? 1.0 / p11 : 0.0) - 1.0 / r.p_n - 1.0 / r.p_m;
    const double g10 = -1.0 / r.p_n, g01 = -1.0 / r.p_m;
    const double eg = g11 * p11 + g10 * p10 + g01 * p01;
    const double eg2 = g11 * g11 * p11 + g10 * g10 * p10 + g01 * g01 * p01;
    const double var_log = std::max(0.0, eg2 - eg * eg) / N;
    r.ratio_se = r.ratio * std::sqrt(var_log);
    r.ci_low = r.ratio * std::exp(-2.0 * std::sqrt(var_log));
    r.ci_high = r.ratio * std::exp(2.0 * std::sqrt(var_log));
  }
  return r;
}

struct IoHorizon {
  int horizon = 0;
  double mean = 0.0, variance = 0.0, mean_se = 0.0;
  double p_half = 0.0;  // P(I >= mean / 2)
};

struct IoTrace {
  std::vector<IoHorizon> horizons;
  std::uint64_t samples = 0;
  std::uint64_t truncated = 0;
  double kill_radius = 0.0;
};

/// I_h = number of shells n in [n_lo, h] visited by one infinite snake from
/// 0, killed outside kill_factor * 2^{H+1} for the largest horizon H.
inline IoTrace visits_io_trace(const JumpDistribution& theta, const OffspringDistribution& mu,
                               const InfiniteSetSpec& k, int n_lo, std::vector<int> horizons,
                               std::uint64_t n_samples, const ShellVisitOptions& opt = {}) {
  k.validate();
  if (horizons.empty() || n_lo < 0 || horizons.front() < n_lo ||
      std::adjacent_find(horizons.begin(), horizons.end(), std::greater_equal<>()) != horizons.end())
    throw Error(ErrorCode::InvalidArgument, "horizons must be increasing and at least n_lo");
  const int top = horizons.back();
  const SnakeModel model(theta, mu);
  IoTrace out;
  out.samples = n_samples;
  out.kill_radius = opt.kill_factor * std::ldexp(1.0, top + 1);
  const SnakeLimits lim{opt.node_cap, 0, KillBall{Point{}, out.kill_radius}};
  const std::size_t nh = horizons.size();
  struct Tally {
    std::vector<std::vector<std::uint32_t>> counts;  // per horizon, per sample
    std::uint64_t truncated = 0;
  };
  const auto blocks = map_blocks<Tally>(n_samples, kSampleBlock, opt.workers, [&](std::size_t lo, std::size_t hi) {
    Tally t;
    t.counts.assign(nh, {});
    SnakeWorkspace ws;
    std::vector<char> seen(static_cast<std::size_t>(top + 1));
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng = stream_for(opt.seed, opt.task, s);
      std::fill(seen.begin(), seen.end(), 0);
      int remaining = top - n_lo + 1;
      const auto run = run_snake(model, SnakeKind::Infinite, Point{}, lim, rng, ws, [&](const Point& p) {
        const int idx = shell_index(p);
        if (idx < n_lo || idx > top || seen[idx]) return false;
        if (k.contains(p)) {
          seen[idx] = 1;
          --remaining;
        }
        return remaining == 0;
      });
      if (run.capped) ++t.truncated;
      for (std::size_t h = 0; h < nh; ++h) {
        std::uint32_t c = 0;
        for (int i = n_lo; i <= horizons[h]; ++i) c += seen[i];
        t.counts[h].push_back(c);
      }
    }
    return t;
  });
  std::vector<std::vector<std::uint32_t>> all(nh);
  for (const auto& b : blocks) {
    out.truncated += b.truncated;
    for (std::size_t h = 0; h < nh; ++h) all[h].insert(all[h].end(), b.counts[h].begin(), b.counts[h].end());
  }
  const double N = static_cast<double>(n_samples);
  for (std::size_t h = 0; h < nh; ++h) {
    IoHorizon r;
    r.horizon = horizons[h];
    double s = 0.0, s2 = 0.0;
    for (auto c : all[h]) {
      s += c;
      s2 += static_cast<double>(c) * c;
    }
    r.mean = s / N;
    r.variance = std::max(0.0, s2 / N - r.mean * r.mean);
    r.mean_se = std::sqrt(r.variance / std::max(1.0, N - 1.0));
    std::uint64_t big = 0;
    for (auto c : all[h]) big += c >= r.mean / 2.0;
    r.p_half = big / N;
    out.horizons.push_back(r);
  }
  return out;
}

struct VisitGrowth {
  std::size_t spine_len = 0;
  double mean = 0.0, mean_se = 0.0;
  std::uint64_t truncated = 0;
};

struct VisitGrowthReport {
  int dim = 0;
  Point vertex{};
  std::vector<VisitGrowth> horizons;
  std::vector<double> growth;  // mean at horizon i+1 over mean at horizon i
  // Mean and standard error of the per-sample increment between horizons.
  std::vector<double> increment, increment_se;
};

/// Mean number of visits to `vertex` by the incipient infinite snake from 0
/// with spine length L, per L. One pass with the longest spine records the
/// count as each shorter horizon is reached; that count is exactly what a
/// separate run with that spine length and the same stream would give.
inline VisitGrowthReport visit_growth(const JumpDistribution& theta, const OffspringDistribution& mu,
                                      const Point& vertex, std::vector<std::size_t> spine_lengths,
                                      std::uint64_t n_samples, const ShellVisitOptions& opt = {}) {
  if (spine_lengths.empty() || spine_lengths.front() == 0 ||
      std::adjacent_find(spine_lengths.begin(), spine_lengths.end(), std::greater_equal<>()) != spine_lengths.end())
    throw Error(ErrorCode::InvalidArgument, "spine lengths must be positive and increasing");
  if (n_samples < 2) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 2");
  const SnakeModel model(theta, mu);
  const std::size_t nh = spine_lengths.size();
  struct Tally {
    std::vector<double> s, s2, d, d2;
    std::vector<std::uint64_t> truncated;
  };
  const SnakeLimits lim{opt.node_cap, spine_lengths.back(), std::nullopt};
  const auto blocks = map_blocks<Tally>(n_samples, kSampleBlock, opt.workers, [&](std::size_t lo, std::size_t hi) {
    Tally t{std::vector<double>(nh), std::vector<double>(nh), std::vector<double>(nh), std::vector<double>(nh),
            std::vector<std::uint64_t>(nh)};
    SnakeWorkspace ws;
    std::vector<double> snap(nh);
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng = stream_for(opt.seed, opt.task, s);
      double c = 0.0;
      std::size_t reached = 0;
      const auto run = run_snake(
          model, SnakeKind::Incipient, Point{}, lim, rng, ws,
          [&](const Point& p) {
            c += p == vertex;
            return false;
          },
          [&](std::size_t i) {
            if (reached < nh && spine_lengths[reached] == i) snap[reached++] = c;
          });
      for (std::size_t h = reached; h < nh; ++h) {
        snap[h] = c;
        if (run.capped) ++t.truncated[h];
      }
      for (std::size_t h = 0; h < nh; ++h) {
        t.s[h] += snap[h];
        t.s2[h] += snap[h] * snap[h];
        const double inc = h ? snap[h] - snap[h - 1] : 0.0;
        t.d[h] += inc;
        t.d2[h] += inc * inc;
      }
    }
    return t;
  });
  Tally t{std::vector<double>(nh), std::vector<double>(nh), std::vector<double>(nh), std::vector<double>(nh),
          std::vector<std::uint64_t>(nh)};
  for (const auto& b : blocks)
    for (std::size_t h = 0; h < nh; ++h) {
      t.s[h] += b.s[h];
      t.s2[h] += b.s2[h];
      t.d[h] += b.d[h];
      t.d2[h] += b.d2[h];
      t.truncated[h] += b.truncated[h];
    }
  const double N = static_cast<double>(n_samples);
  auto mean_se = [N](double s, double s2) {
    const double m = s / N;
    return std::pair{m, std::sqrt(std::max(0.0, s2 / N - m * m) / (N - 1.0))};
  };
  VisitGrowthReport rep;
  rep.dim = theta.dim();
  rep.vertex = vertex;
  for (std::size_t h = 0; h < nh; ++h) {
    const auto [m, se] = mean_se(t.s[h], t.s2[h]);
    rep.horizons.push_back({spine_lengths[h], m, se, t.truncated[h]});
    if (h == 0) continue;
    rep.growth.push_back(rep.horizons[h - 1].mean > 0.0 ? m / rep.horizons[h - 1].mean : 0.0);
    const auto [dm, dse] = mean_se(t.d[h], t.d2[h]);
    rep.increment.push_back(dm);
    rep.increment_se.push_back(dse);
  }
  return rep;
}

/// Visit growth in dimensions 1 to 4, where every vertex is visited
/// infinitely often.
inline VisitGrowthReport low_dim_io_check(const JumpDistribution& theta, const OffspringDistribution& mu,
                                          const Point& vertex, std::vector<std::size_t> spine_lengths,
                                          std::uint64_t n_samples, const ShellVisitOptions& opt = {}) {
  if (theta.dim() < 1 || theta.dim() > 4) throw Error(ErrorCode::InvalidArgument, "low-dimension check needs d in 1..4");
  return visit_growth(theta, mu, vertex, std::move(spine_lengths), n_samples, opt);
}

}  // namespace bcrw
