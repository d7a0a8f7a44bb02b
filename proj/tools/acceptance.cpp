// Runs the acceptance criteria AC1..AC8 and prints one PASS/FAIL line each.
// Usage: acceptance <path-to-bcrw> [--only AC1,AC4] [--workers N]
// The exit status is 0 whenever every criterion ran to a verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include "bcrw/capacity.hpp"
#include "bcrw/io.hpp"
#include "bcrw/validate.hpp"
#include "bcrw/wiener.hpp"

namespace fs = std::filesystem;
using namespace bcrw;
using io::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_workers = 1;
std::string g_cli;

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  ValidateOptions o;
  o.radius = 8.0;
  o.bridge = false;
  o.workers = g_workers;
  const auto rep = identity_suite(simple_random_walk(5), binary_offspring(), o);
  double worst = 0.0;
  std::string failed;
  for (const auto& c : rep.checks) {
    if (c.kind != CheckKind::Identity) continue;
    worst = std::max(worst, c.value);
    if (!c.pass) failed += " " + c.name;
  }
  const double t = seconds_since(t0);
  const bool pass = rep.passed(CheckKind::Identity) && t < 15 * 60;
  return {pass, std::to_string(rep.count(CheckKind::Identity)) + " identities, max residual " + num(worst) +
                    " (< 1e-6), " + num(t, 3) + " s" + (failed.empty() ? "" : ", failed:" + failed)};
}

Outcome ac2() {
  const auto t0 = std::chrono::steady_clock::now();
  ValidateOptions o;
  o.bridge_radius = 6.0;
  o.bridge_samples = 100000;
  o.seed = 2024;
  o.workers = g_workers;
  const auto rep = bridge_suite(simple_random_walk(5), binary_offspring(), o);
  std::size_t np = 0, nq = 0;
  double worst = 0.0;
  std::string failed;
  for (const auto& c : rep.checks) {
    (c.name[0] == 'p' ? np : nq) += 1;
    worst = std::max(worst, c.value / c.hi);
    if (!c.pass) failed += " " + c.name;
  }
  const double t = seconds_since(t0);
  const bool pass = rep.passed(CheckKind::Bridge) && np >= 6 && nq >= 6 && t < 20 * 60;
  return {pass, std::to_string(np) + " p probes, " + std::to_string(nq) + " q probes, worst |mc-oracle|/allowance " +
                    num(worst) + ", " + num(t, 3) + " s" + (failed.empty() ? "" : ", failed:" + failed)};
}

Outcome ac3() {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  CapacityOptions mc;
  mc.radii = {6.0, 9.0, 12.0};
  mc.n_samples = 100000;
  mc.probes_per_radius = 500;
  mc.seed = 31;
  mc.workers = g_workers;
  const auto m = estimate_bcap(TargetSet(5, {Point{}}), theta, mu, mc);
  CapacityOptions oc;
  oc.method = CapacityMethod::Oracle;
  oc.radii = {8.0, 10.0, 12.0};
  const auto o = estimate_bcap(TargetSet(5, {Point{}}), theta, mu, oc);

  std::vector<double> v;
  for (const auto& r : m.per_radius) v.push_back(r.rescaled);
  // Monotone up to two standard errors per step.
  bool up = true, down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double noise =
        2.0 * std::hypot(m.per_radius[i].std_error, m.per_radius[i - 1].std_error);
    up = up && v[i] >= v[i - 1] - noise;
    down = down && v[i] <= v[i - 1] + noise;
  }
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double spread = (*hi - *lo) / *hi;
  const double allowance = 0.5 * (m.ci_width() + o.ci_width());
  const bool agree = std::abs(m.value - o.value) <= allowance;
  const bool pass = (up || down) && m.converging() && spread < 0.2 && agree;
  return {pass, "rescaled " + num(v[0]) + ", " + num(v[1]) + ", " + num(v[2]) + " (spread " + num(100 * spread, 3) +
                    "%, converging " + (m.converging() ? "yes" : "no") + "); BCap mc " + num(m.value) + " [" +
                    num(m.ci_low) + ", " + num(m.ci_high) + "] vs oracle " + num(o.value) + " [" + num(o.ci_low) +
                    ", " + num(o.ci_high) + "]"};
}

Outcome ac4() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto mu = binary_offspring();
  auto study = [&](int d, int m, std::vector<int> r, std::uint64_t samples, std::size_t probes) {
    CapacityOptions o;
    o.n_samples = samples;
    o.kill_factor = 2.0;
    o.probes_per_radius = probes;
    o.seed = 4;
    o.workers = g_workers;
    return ball_scaling_study(m, std::move(r), simple_random_walk(d), mu, o);
  };
  const auto a = study(5, 5, {8, 16, 32}, 40000, 0);
  const auto b = study(6, 1, {2, 4, 8, 16}, 100000, 2000);
  const auto c = study(5, 1, {2, 4, 8, 16}, 100000, 2000);
  const double t = seconds_since(t0);
  const bool pa = std::abs(a.plain.slope - 1.0) <= 0.3, pb = std::abs(b.plain.slope - 1.0) <= 0.3;
  const bool pc = c.improvement >= 0.2;
  return {pa && pb && pc && t < 60 * 60,
          "(5,5) slope " + num(a.plain.slope) + " +- " + num(a.plain.slope_se, 2) + (pa ? " ok" : " out") +
              "; (6,1) slope " + num(b.plain.slope) + " +- " + num(b.plain.slope_se, 2) + (pb ? " ok" : " out") +
              "; (5,1) log-corrected residual gain " + num(100 * c.improvement, 3) + "% (plain rms " +
              num(c.plain.rms, 3) + ", corrected rms " + num(c.corrected.rms, 3) + ", corrected slope " +
              num(c.corrected.slope, 3) + ")" + (pc ? " ok" : " short") + "; " + num(t, 4) + " s"};
}

Outcome ac5() {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  WienerOptions w;
  w.capacity.n_samples = 5000;
  w.capacity.kill_factor = 2.0;
  w.capacity.seed = 5;
  w.capacity.workers = g_workers;
  w.point.radii = {6.0, 9.0, 12.0};
  w.point.n_samples = 30000;
  w.point.seed = 5;
  w.point.workers = g_workers;
  w.implicit_large = true;
  const auto hyper = wiener_series(InfiniteSetSpec::subspace(5, 4), 2, 5, theta, mu, w);
  const auto axis = InfiniteSetSpec::axis_points(5, "powers_of_2");
  const auto pow2 = wiener_series(axis, 1, 6, theta, mu, w);
  const bool ph = hyper.verdict == Verdict::IndicativeRecurrent;
  const bool pp = pow2.verdict == Verdict::IndicativeTransient && std::abs(pow2.fit.rho - 0.5) <= 0.15;

  std::string terms;
  for (const auto& t : hyper.terms) terms += (terms.empty() ? "" : ", ") + num(t.term, 3);
  std::string bands;
  bool pv = true;
  for (int n : {2, 3, 4}) {
    const auto shell = shell_set(theta, axis, n, 20000, false);
    const ShellVisitOptions so{.kill_factor = 1.0, .seed = 5, .task = 50 + static_cast<std::uint64_t>(n), .workers = g_workers};
    const auto e = estimate_shell_visit(theta, mu, shell, n, 1500, so);
    const double cap = pow2.terms[static_cast<std::size_t>(n - 1)].capacity;
    const double ratio = e.value * std::ldexp(1.0, n) / cap;
    pv = pv && ratio >= 0.1 && ratio <= 10.0;
    bands += (bands.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) + ":" + num(ratio, 3);
  }
  return {ph && pp && pv, "hyperplane terms [" + terms + "] " + std::string(to_string(hyper.verdict)) + " (rho " +
                              num(hyper.fit.rho, 3) + " +- " + num(hyper.fit.sigma, 2) + "); powers of 2 " +
                              std::string(to_string(pow2.verdict)) + " rho " + num(pow2.fit.rho, 3) +
                              "; visit ratios " + bands};
}

Outcome ac6() {
  const auto theta = simple_random_walk(5);
  const auto mu = binary_offspring();
  const auto axis = InfiniteSetSpec::axis_points(5, "all");
  std::string out;
  bool pass = true;
  for (auto [n, m] : {std::pair{1, 2}, std::pair{1, 3}, std::pair{2, 3}}) {
    const ShellVisitOptions so{.kill_factor = 1.0, .seed = 6, .task = 10ULL * n + m, .workers = g_workers};
    const auto r = correlation_check(theta, mu, shell_set(theta, axis, n, 20000, false), n,
                                     shell_set(theta, axis, m, 20000, false), m, 10000, so);
    pass = pass && r.ratio > 0.0 && r.ratio <= 20.0;
    out += (out.empty() ? "" : "; ") + std::string("(") + std::to_string(n) + "," + std::to_string(m) + ") " +
           num(r.ratio, 3) + " [" + num(r.ci_low, 3) + ", " + num(r.ci_high, 3) + "]";
  }
  return {pass, out};
}

Outcome ac7() {
  const auto mu = binary_offspring();
  const ShellVisitOptions o{.node_cap = 4'000'000, .seed = 7, .workers = g_workers};
  const auto d4 = visit_growth(simple_random_walk(4), mu, Point{}, {256, 512}, 10000, o);
  const auto d5 = visit_growth(simple_random_walk(5), mu, Point{}, {256, 512}, 10000, o);
  const auto& a = d5.horizons[0];
  const auto& b = d5.horizons[1];
  const double sigma = std::hypot(a.mean_se, b.mean_se);
  const bool grows = d4.growth[0] >= 1.2;
  const bool plateau = std::abs(b.mean - a.mean) <= 3.0 * sigma;
  return {grows && plateau,
          "d=4 mean visits " + num(d4.horizons[0].mean) + " -> " + num(d4.horizons[1].mean) + ", factor " +
              num(d4.growth[0]) + (grows ? " >= 1.2" : " < 1.2") + " (truncated " +
              std::to_string(d4.horizons[1].truncated) + "/10000); d=5 " + num(a.mean) + " -> " + num(b.mean) +
              ", change " + num(b.mean - a.mean, 3) + " vs 3 sigma " + num(3 * sigma, 3) +
              (plateau ? " plateau" : " no plateau")};
}

// ---- determinism of the command-line tool

int run_cli(const fs::path& dir, const fs::path& cfg, const std::string& cmd, int workers) {
  const std::string line = "\"" + g_cli + "\" --config \"" + cfg.string() + "\" --workers " + std::to_string(workers) +
                           " --out \"" + dir.string() + "\" " + cmd + " > /dev/null 2>&1";
  return std::system(line.c_str());
}

std::map<std::string, std::string> outputs(const fs::path& dir) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") m[e.path().filename().string()] = io::read_file(e.path().string());
  return m;
}

Outcome ac8() {
  if (g_cli.empty()) return {false, "no bcrw executable given"};
  const fs::path root = fs::temp_directory_path() / ("bcrw_ac8_" + std::to_string(::getpid()));
  fs::create_directories(root);
  const std::vector<std::pair<std::string, json>> runs = {
      {"bcap", {{"seed", 3}, {"bcap", {{"samples", 3000}}}}},
      {"wiener",
       {{"seed", 3},
        {"wiener",
         {{"set", {{"kind", "subspace"}, {"m", 2}}},
          {"n_lo", 1},
          {"n_hi", 2},
          {"samples", 600},
          {"point_samples", 2000},
          {"visit_samples", 200}}}}},
      {"oracle",
       {{"oracle",
         {{"set", {{0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}}},
          {"window", 4.0},
          {"green_columns", {{0, 2, 0, 0, 0}}},
          {"harmonic_ball", 2.0},
          {"harmonic_targets", {{3, 0, 0, 0, 0}}}}}}},
      {"validate", {{"validate", {{"radius", 4.0}, {"bridge_radius", 3.0}, {"bridge_samples", 2000}}}}},
      {"simulate", {{"seed", 9}, {"simulate", {{"estimator", "q"}, {"samples", 2000}, {"spine_len", 32}}}}}};
  std::string detail;
  bool pass = true;
  for (const auto& [cmd, cfg] : runs) {
    const fs::path cfg_path = root / (cmd + ".json");
    io::write_file(cfg_path.string(), cfg.dump());
    const fs::path a = root / (cmd + "_a"), b = root / (cmd + "_b"), c = root / (cmd + "_c");
    const int ra = run_cli(a, cfg_path, cmd, 1), rb = run_cli(b, cfg_path, cmd, 1), rc = run_cli(c, cfg_path, cmd, 3);
    bool ok = ra == 0 && rb == 0 && rc == 0;
    const auto oa = outputs(a);
    ok = ok && oa.size() >= 2 && oa == outputs(b) && oa == outputs(c);
    // Manifest checksums must match the files on disk.
    const auto manifest = json::parse(io::read_file((a / "manifest.json").string()));
    for (const auto& [name, bytes] : oa) ok = ok && manifest["outputs"].value(name, std::string()) == io::sha256_hex(bytes);
    pass = pass && ok;
    detail += (detail.empty() ? "" : ", ") + cmd + (ok ? " identical" : " DIFFERS") + " (" + std::to_string(oa.size()) +
              " files)";
  }
  fs::remove_all(root);
  return {pass, detail + "; workers 1, 1, 3"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(item);
    } else if (arg == "--workers" && i + 1 < argc) {
      g_workers = std::atoi(argv[++i]);
    } else {
      g_cli = arg;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5}, {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}};
  int passed = 0, ran = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    ++ran;
    passed += v.pass;
    std::cout << name << ' ' << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "  [" << num(seconds_since(t0), 4)
              << " s]" << std::endl;
  }
  std::cout << passed << "/" << ran << " criteria passed" << std::endl;
  return 0;
}
