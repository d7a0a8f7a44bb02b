#pragma once

// Tree-indexed random walks and Monte Carlo visit estimators.
//
// Estimators never build trees. A sample is generated depth-first and
// labelled on the fly, so it can stop as soon as the target is hit. Each
// sample owns the random stream stream_for(seed, task, index), and
// per-block tallies are reduced in block order, so results do not depend
// on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bcrw/errors.hpp"
#include "bcrw/green.hpp"
#include "bcrw/lattice.hpp"
#include "bcrw/parallel.hpp"
#include "bcrw/rng.hpp"
#include "bcrw/target.hpp"
#include "bcrw/trees.hpp"

namespace bcrw {

struct SnakeRealization {
  PlaneTree tree;
  std::vector<Point> labels;
  Point start{};
};

/// One theta step per edge; labels are path sums from the root.
inline SnakeRealization label_tree(const PlaneTree& t, const JumpDistribution& theta, const Point& x0, Rng& rng) {
  SnakeRealization s{t, std::vector<Point>(t.size()), x0};
  s.labels[0] = x0;
  // Pre-order storage puts every parent before its children.
  for (std::size_t v = 1; v < t.size(); ++v) s.labels[v] = s.labels[t.parent(v)] + theta.draw(rng);
  return s;
}

inline std::size_t count_visits(const SnakeRealization& s, const TargetSet& a) {
  return static_cast<std::size_t>(std::count_if(s.labels.begin(), s.labels.end(), [&](const Point& p) { return a.contains(p); }));
}

/// The root label counts as a visit.
inline bool snake_visits(const SnakeRealization& s, const TargetSet& a) {
  return std::any_of(s.labels.begin(), s.labels.end(), [&](const Point& p) { return a.contains(p); });
}

/// Particles whose label leaves this ||.||-ball are removed together with
/// their descendants. Membership matches Window's site set exactly.
struct KillBall {
  Point center{};
  double radius = 0.0;

  bool contains(const JumpDistribution& theta, const Point& x) const noexcept {
    return theta.norm_sq(x - center) <= radius * radius + 1e-9;
  }
};

enum class SnakeKind { Snake, Adjoint, Infinite, Incipient };

inline std::string_view to_string(SnakeKind k) noexcept {
  switch (k) {
    case SnakeKind::Snake: return "snake";
    case SnakeKind::Adjoint: return "adjoint";
    case SnakeKind::Infinite: return "infinite";
    case SnakeKind::Incipient: return "incipient";
  }
  return "unknown";
}

struct SnakeLimits {
  /// Off-spine vertices per sample before the sample is cut.
  std::size_t node_cap = 1'000'000;
  /// Spine vertices for the infinite kinds; 0 means "until the spine
  /// leaves the kill ball" and needs one.
  std::size_t spine_len = 0;
  std::optional<KillBall> kill{};
};

struct SnakeRun {
  bool stopped = false;       // the visitor asked to stop
  bool capped = false;        // node_cap fired
  bool spine_exited = false;  // spine left the kill ball
  Point spine_end{};
  std::size_t spine_steps = 0;
  std::size_t nodes = 0;
};

class SnakeModel {
 public:
  SnakeModel(const JumpDistribution& theta, const OffspringDistribution& mu) : theta_(theta), mu_(mu), adj_(mu) {}
  const JumpDistribution& theta() const noexcept { return theta_; }
  const OffspringDistribution& mu() const noexcept { return mu_; }
  const AdjointDistribution& adjoint() const noexcept { return adj_; }

 private:
  const JumpDistribution& theta_;
  const OffspringDistribution& mu_;
  AdjointDistribution adj_;
};

struct SnakeWorkspace {
  struct Frame {
    Point pos;
    std::uint32_t left;
  };
  std::vector<Frame> stack;
};

namespace detail {

// Generates k independent mu-GW subtrees hanging off a vertex at `root`,
// which the caller has already visited. Returns true if the visitor stopped.
template <class Visitor>
bool explore_subtrees(const SnakeModel& m, const Point& root, std::uint32_t k, Rng& rng, const KillBall* kill,
                      std::size_t& budget, SnakeRun& run, SnakeWorkspace& ws, Visitor& visit) {
  if (k == 0) return false;
  auto& stack = ws.stack;
  stack.clear();
  stack.push_back({root, k});
  const auto& theta = m.theta();
  const auto& mu = m.mu();
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.left == 0) {
      stack.pop_back();
      continue;
    }
    --top.left;
    const Point child = top.pos + theta.draw(rng);
    if (kill && !kill->contains(theta, child)) continue;
    if (budget == 0) {
      run.capped = true;
      return false;
    }
    --budget;
    ++run.nodes;
    if (visit(child)) {
      run.stopped = true;
      return true;
    }
    if (const auto c = mu.draw(rng); c > 0) stack.push_back({child, c});
  }
  return false;
}

}  // namespace detail

struct NoSpineHook {
  void operator()(std::size_t) const noexcept {}
};

/// Generates one snake of the given kind from x, calling visit(label) for
/// every vertex in a depth-first order. The visitor returns true to stop.
/// Spine vertices are visited before their bushes; on_spine(i) runs just
/// before spine vertex i, so the state it sees is that of a run with
/// spine_len = i.
template <class Visitor, class SpineHook = NoSpineHook>
SnakeRun run_snake(const SnakeModel& m, SnakeKind kind, const Point& x, const SnakeLimits& lim, Rng& rng,
                   SnakeWorkspace& ws, Visitor&& visit, SpineHook&& on_spine = {}) {
  SnakeRun run;
  const KillBall* kill = lim.kill ? &*lim.kill : nullptr;
  const auto& theta = m.theta();
  run.spine_end = x;
  if (kill && !kill->contains(theta, x)) {
    run.spine_exited = true;
    return run;
  }
  std::size_t budget = lim.node_cap;
  if (kind == SnakeKind::Snake || kind == SnakeKind::Adjoint) {
    if (visit(x)) {
      run.stopped = true;
      return run;
    }
    const auto k = kind == SnakeKind::Snake ? m.mu().draw(rng) : m.adjoint().draw(rng);
    detail::explore_subtrees(m, x, k, rng, kill, budget, run, ws, visit);
    return run;
  }
  if (lim.spine_len == 0 && !kill)
    throw Error(ErrorCode::InvalidArgument, "an unbounded spine needs a kill ball");
  const std::size_t spine_len = lim.spine_len == 0 ? std::numeric_limits<std::size_t>::max() : lim.spine_len;
  Point s = x;
  for (std::size_t i = 0; i < spine_len; ++i) {
    on_spine(i);
    run.spine_end = s;
    run.spine_steps = i;
    if (visit(s)) {
      run.stopped = true;
      return run;
    }
    // Bushes on the spine vertex: the adjoint root law for the infinite
    // tree, n - 1 mu-GW subtrees with n size-biased for the Kesten tree.
    const std::uint32_t k = kind == SnakeKind::Infinite ? m.adjoint().draw(rng) : m.mu().draw_size_biased(rng) - 1;
    if (detail::explore_subtrees(m, s, k, rng, kill, budget, run, ws, visit) || run.capped) return run;
    if (i + 1 == spine_len) break;
    s = s + theta.draw(rng);
    if (kill && !kill->contains(theta, s)) {
      run.spine_exited = true;
      return run;
    }
  }
  return run;
}

/// Monte Carlo output. std_error is the binomial standard error for
/// visit-probability estimators; truncation_bias_bound is one-sided (the
/// true value of the estimand can only be larger) and never folded in.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_samples = 0;
  double truncation_bias_bound = 0.0;
  std::uint64_t truncated = 0;
  std::uint64_t seed = 0;
  std::size_t spine_len = 0;
};

inline Estimate bernoulli_estimate(std::uint64_t hits, std::uint64_t n) {
  Estimate e;
  e.n_samples = n;
  if (n == 0) return e;
  e.value = static_cast<double>(hits) / static_cast<double>(n);
  e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(n));
  return e;
}

struct McOptions {
  std::uint64_t seed = 1;
  std::uint64_t task = 0;
  int workers = 1;
  std::size_t node_cap = 1'000'000;
  std::optional<KillBall> kill{};
};

inline constexpr std::size_t kSampleBlock = 256;

namespace detail {

struct VisitTally {
  std::uint64_t hits = 0;
  std::uint64_t truncated = 0;  // capped samples without a hit
  double tail = 0.0;            // sum of spine tail bounds over non-hitting samples
};

inline VisitTally sum_tallies(const std::vector<VisitTally>& blocks) {
  VisitTally t;
  for (const auto& b : blocks) {
    t.hits += b.hits;
    t.truncated += b.truncated;
    t.tail += b.tail;
  }
  return t;
}

}  // namespace detail

/// Upper bound for the expected number of visits to A made by the part of
/// an infinite (or incipient, both_sides) snake beyond a spine vertex at
/// y: sum_a a_d ||y-a||^{2-d} + w sigma^2 c ||y-a||^{4-d}, with w = 1/2 for
/// one-sided bushes and 1 for two-sided ones. Uses the Green asymptotics.
inline double spine_tail_bound(const JumpDistribution& theta, const OffspringDistribution& mu, const TargetSet& a,
                               const Point& y, bool both_sides) {
  const double d = theta.dim();
  const double ad = green_constant(theta);
  const double co = theta.dim() >= 5 ? occupation_constant(theta) : 0.0;
  const double w = (both_sides ? 1.0 : 0.5) * mu.variance();
  auto term = [&](double r) { return ad * std::pow(r, 2.0 - d) + w * co * std::pow(r, 4.0 - d); };
  if (a.size() <= 64) {
    double s = 0.0;
    for (const auto& p : a.points()) s += term(theta.norm(y - p));
    return s;
  }
  return static_cast<double>(a.size()) * term(set_distance(theta, y, a));
}

/// Fraction of samples of the given kind that visit A.
inline Estimate estimate_visit(const TargetSet& a, const Point& x, const JumpDistribution& theta,
                               const OffspringDistribution& mu, SnakeKind kind, std::uint64_t n_samples,
                               const McOptions& opt, std::size_t spine_len = 0) {
  if (n_samples == 0) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  const SnakeModel model(theta, mu);
  SnakeLimits lim{opt.node_cap, spine_len, opt.kill};
  const bool infinite = kind == SnakeKind::Infinite || kind == SnakeKind::Incipient;
  const auto blocks = map_blocks<detail::VisitTally>(n_samples, kSampleBlock, opt.workers, [&](std::size_t b, std::size_t e) {
    detail::VisitTally t;
    SnakeWorkspace ws;
    for (std::size_t s = b; s < e; ++s) {
      Rng rng = stream_for(opt.seed, opt.task, s);
      const auto run = run_snake(model, kind, x, lim, rng, ws, [&](const Point& p) { return a.contains(p); });
      if (run.stopped) {
        ++t.hits;
      } else if (run.capped) {
        ++t.truncated;
      } else if (infinite && !run.spine_exited) {
        t.tail += std::min(1.0, spine_tail_bound(theta, mu, a, run.spine_end, kind == SnakeKind::Incipient));
      }
    }
    return t;
  });
  const auto t = detail::sum_tallies(blocks);
  auto est = bernoulli_estimate(t.hits, n_samples);
  est.truncated = t.truncated;
  est.truncation_bias_bound = (static_cast<double>(t.truncated) + t.tail) / static_cast<double>(n_samples);
  est.seed = opt.seed;
  est.spine_len = spine_len;
  return est;
}

/// p_A(x): snake from x visits A.
inline Estimate estimate_p(const TargetSet& a, const Point& x, const JumpDistribution& theta,
                           const OffspringDistribution& mu, std::uint64_t n_samples, const McOptions& opt = {}) {
  if (a.contains(x)) return {1.0, 0.0, n_samples, 0.0, 0, opt.seed, 0};
  return estimate_visit(a, x, theta, mu, SnakeKind::Snake, n_samples, opt);
}

/// r_A(x): adjoint snake from x visits A.
inline Estimate estimate_r(const TargetSet& a, const Point& x, const JumpDistribution& theta,
                           const OffspringDistribution& mu, std::uint64_t n_samples, const McOptions& opt = {}) {
  if (a.contains(x)) return {1.0, 0.0, n_samples, 0.0, 0, opt.seed, 0};
  return estimate_visit(a, x, theta, mu, SnakeKind::Adjoint, n_samples, opt);
}

struct SpineOptions {
  /// Fixed spine length; 0 selects it adaptively (or, with a kill ball,
  /// runs every spine until it leaves the ball).
  std::size_t spine_len = 0;
  std::size_t initial_spine = 64;
  std::size_t max_spine = 4096;
  std::uint64_t pilot_samples = 2000;
  std::uint64_t tail_walks = 512;
};

namespace detail {

// Mean spine tail bound at spine length L over independent backbone walks.
inline double mean_spine_tail(const JumpDistribution& theta, const OffspringDistribution& mu, const TargetSet& a,
                              const Point& x, std::size_t len, bool both_sides, std::uint64_t walks,
                              std::uint64_t seed, std::uint64_t task) {
  double total = 0.0;
  for (std::uint64_t w = 0; w < walks; ++w) {
    Rng rng = stream_for(seed, task ^ 0x5a5a5a5a5a5a5a5aULL, w);
    Point s = x;
    for (std::size_t i = 1; i < len; ++i) s = s + theta.draw(rng);
    total += spine_tail_bound(theta, mu, a, s, both_sides);
  }
  return total / static_cast<double>(walks);
}

inline Estimate estimate_spine_visit(const TargetSet& a, const Point& x, const JumpDistribution& theta,
                                     const OffspringDistribution& mu, SnakeKind kind, std::uint64_t n_samples,
                                     const McOptions& opt, const SpineOptions& sp) {
  if (a.contains(x)) return {1.0, 0.0, n_samples, 0.0, 0, opt.seed, 0};
  if (sp.spine_len > 0 || opt.kill) return estimate_visit(a, x, theta, mu, kind, n_samples, opt, sp.spine_len);
  // Adaptive doubling: grow the spine until the mean tail bound at its end
  // falls below half the pilot standard error.
  const bool both = kind == SnakeKind::Incipient;
  std::size_t len = std::max<std::size_t>(1, sp.initial_spine);
  McOptions pilot_opt = opt;
  pilot_opt.task = opt.task ^ 0xa5a5a5a5a5a5a5a5ULL;
  for (;;) {
    const auto pilot = estimate_visit(a, x, theta, mu, kind, std::min(n_samples, sp.pilot_samples), pilot_opt, len);
    const double q = std::max(pilot.value, 1.0 / static_cast<double>(n_samples));
    const double target = 0.5 * std::sqrt(q * (1.0 - q) / static_cast<double>(n_samples));
    const double tail = mean_spine_tail(theta, mu, a, x, len, both, sp.tail_walks, opt.seed, opt.task);
    if (tail <= target || len >= sp.max_spine) break;
    len = std::min(2 * len, sp.max_spine);
  }
  return estimate_visit(a, x, theta, mu, kind, n_samples, opt, len);
}

}  // namespace detail

/// q_A(x): infinite snake from x visits A.
inline Estimate estimate_q(const TargetSet& a, const Point& x, const JumpDistribution& theta,
                           const OffspringDistribution& mu, std::uint64_t n_samples, const McOptions& opt = {},
                           const SpineOptions& sp = {}) {
  return detail::estimate_spine_visit(a, x, theta, mu, SnakeKind::Infinite, n_samples, opt, sp);
}

/// Incipient infinite snake (Kesten tree) from x visits A.
inline Estimate estimate_q_incipient(const TargetSet& a, const Point& x, const JumpDistribution& theta,
                                     const OffspringDistribution& mu, std::uint64_t n_samples,
                                     const McOptions& opt = {}, const SpineOptions& sp = {}) {
  return detail::estimate_spine_visit(a, x, theta, mu, SnakeKind::Incipient, n_samples, opt, sp);
}

/// Probability that one snake (or infinite snake) from x visits both A and B.
inline Estimate estimate_joint(const TargetSet& a, const TargetSet& b, const Point& x, const JumpDistribution& theta,
                               const OffspringDistribution& mu, SnakeKind mode, std::uint64_t n_samples,
                               const McOptions& opt = {}, std::size_t spine_len = 0) {
  if (a.intersects(b)) throw Error(ErrorCode::OverlappingSets, "joint-visit sets must be disjoint");
  if (n_samples == 0) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  if (mode != SnakeKind::Snake && mode != SnakeKind::Infinite)
    throw Error(ErrorCode::InvalidArgument, "joint visits support snake and infinite modes");
  const SnakeModel model(theta, mu);
  const SnakeLimits lim{opt.node_cap, spine_len, opt.kill};
  const auto blocks = map_blocks<detail::VisitTally>(n_samples, kSampleBlock, opt.workers, [&](std::size_t lo, std::size_t hi) {
    detail::VisitTally t;
    SnakeWorkspace ws;
    for (std::size_t s = lo; s < hi; ++s) {
      Rng rng = stream_for(opt.seed, opt.task, s);
      bool seen_a = false, seen_b = false;
      const auto run = run_snake(model, mode, x, lim, rng, ws, [&](const Point& p) {
        seen_a = seen_a || a.contains(p);
        seen_b = seen_b || b.contains(p);
        return seen_a && seen_b;
      });
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
  est.spine_len = spine_len;
  return est;
}

}  // namespace bcrw
