// bcrw: command-line front end. Every run writes results.json (a pure
// function of the config minus worker count), command-specific CSV or field
// files, and manifest.json with checksums.

#include <openssl/opensslv.h>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include "bcrw/capacity.hpp"
#include "bcrw/config.hpp"
#include "bcrw/io.hpp"
#include "bcrw/oracle.hpp"
#include "bcrw/snakes.hpp"
#include "bcrw/validate.hpp"
#include "bcrw/wiener.hpp"

#ifndef BCRW_VERSION
#define BCRW_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace bcrw;
using io::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kConvergence = 3, kIdentity = 4 };

struct Outputs {
  fs::path dir;
  std::map<std::string, std::string> sha;  // file name -> sha256

  void put(const std::string& name, std::string_view bytes) {
    io::write_file((dir / name).string(), bytes);
    sha[name] = io::sha256_hex(bytes);
  }
};

struct Run {
  json cfg;
  JumpDistribution theta;
  OffspringDistribution mu;
  std::uint64_t seed = 1;
  int workers = 1;
  Outputs out;
  const json& sec() const { return cfg[cfg["command"].get_ref<const std::string&>()]; }
};

std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }

std::vector<Point> points(const json& j, int dim) {
  std::vector<Point> v;
  for (const auto& p : j) v.push_back(io::point_from_json(p, dim));
  return v;
}

CapacityOptions capacity_options(const Run& r, const json& s) {
  CapacityOptions o;
  const auto method = s.at("method").get<std::string>();
  if (method != "mc" && method != "oracle") throw Error(ErrorCode::InvalidArgument, "bcap.method must be mc or oracle");
  o.method = method == "oracle" ? CapacityMethod::Oracle : CapacityMethod::Mc;
  o.radii = doubles(s.at("radii"));
  o.probes_per_radius = s.at("probes_per_radius").get<std::size_t>();
  o.n_samples = s.at("samples").get<std::uint64_t>();
  o.kill_factor = s.at("kill_factor").get<double>();
  o.node_cap = s.at("node_cap").get<std::size_t>();
  o.budget = s.at("budget").get<double>();
  o.tol = s.at("tol").get<double>();
  o.seed = r.seed;
  o.workers = r.workers;
  return o;
}

json cmd_bcap(Run& r) {
  const auto& s = r.sec();
  const auto opt = capacity_options(r, s);
  if (!s.at("study").is_null()) {
    const auto& st = s.at("study");
    const auto rep = ball_scaling_study(st.at("m").get<int>(), st.at("r").get<std::vector<int>>(), r.theta, r.mu, opt);
    for (std::size_t i = 0; i < rep.r.size(); ++i)
      r.out.put("probes_r" + std::to_string(rep.r[i]) + ".csv", io::probes_csv(rep.capacities[i], r.theta.dim()));
    return {{"ball_study", io::to_json(rep)}};
  }
  const auto a = io::target_from_json(s.at("set"), r.theta.dim());
  const auto est = estimate_bcap(a, r.theta, r.mu, opt);
  r.out.put("probes.csv", io::probes_csv(est, r.theta.dim()));
  return {{"set_size", a.size()}, {"set_radius", set_radius(r.theta, a)}, {"capacity", io::to_json(est)}};
}

json cmd_wiener(Run& r) {
  const auto& s = r.sec();
  const int d = r.theta.dim();
  const auto k = io::set_spec_from_json(s.at("set"), d);
  const int n_lo = s.at("n_lo").get<int>(), n_hi = s.at("n_hi").get<int>();
  WienerOptions w;
  w.capacity.n_samples = s.at("samples").get<std::uint64_t>();
  w.capacity.kill_factor = s.at("kill_factor").get<double>();
  w.capacity.probes_per_radius = s.at("probes_per_radius").get<std::size_t>();
  w.capacity.seed = r.seed;
  w.capacity.workers = r.workers;
  w.point.radii = doubles(s.at("point_radii"));
  w.point.n_samples = s.at("point_samples").get<std::uint64_t>();
  w.point.seed = r.seed;
  w.point.workers = r.workers;
  const auto basis = s.at("basis").get<std::string>();
  if (basis != "proxy" && basis != "extrapolated") throw Error(ErrorCode::InvalidArgument, "wiener.basis must be proxy or extrapolated");
  w.basis = basis == "proxy" ? CapacityBasis::Proxy : CapacityBasis::Extrapolated;
  w.shell_cap = s.at("shell_cap").get<std::size_t>();
  w.implicit_large = s.at("implicit_large").get<bool>();
  const auto rep = wiener_series(k, n_lo, n_hi, r.theta, r.mu, w);
  r.out.put("terms.csv", io::terms_csv(rep));
  json res = {{"series", io::to_json(rep)}};

  const auto visits = s.at("visit_samples").get<std::uint64_t>();
  if (visits > 0) {
    json list = json::array();
    for (const auto& t : rep.terms) {
      if (t.count == 0 || t.capacity <= 0.0) continue;
      const auto shell = shell_set(r.theta, k, t.n, w.shell_cap, w.implicit_large);
      ShellVisitOptions so{.kill_factor = s.at("visit_kill_factor").get<double>(),
                           .seed = r.seed,
                           .task = 500 + static_cast<std::uint64_t>(t.n),
                           .workers = r.workers};
      const auto e = estimate_shell_visit(r.theta, r.mu, shell, t.n, visits, so);
      const double scale = std::ldexp(1.0, t.n * (d - 4));
      list.push_back({{"n", t.n}, {"visit", io::to_json(e)}, {"ratio", e.value * scale / t.capacity}});
    }
    res["shell_visits"] = std::move(list);
  }
  return res;
}

json cmd_oracle(Run& r) {
  const auto& s = r.sec();
  const int d = r.theta.dim();
  const auto a = io::target_from_json(s.at("set"), d);
  const double tol = s.at("tol").get<double>();
  const Window win(r.theta, {Point{}, s.at("window").get<double>()});
  const auto fix = solve_visit_fixpoint(a, r.mu, r.theta, win, {.tol = tol});
  const auto killing = s.at("killing").get<std::string>();
  if (killing != "visit" && killing != "zero") throw Error(ErrorCode::InvalidArgument, "oracle.killing must be visit or zero");
  const std::vector<double> k = killing == "visit" ? fix.r.values : std::vector<double>(win.size(), 0.0);

  std::vector<std::pair<std::string, LatticeField>> fields;
  fields.emplace_back("killing", LatticeField{FieldTag::Killing, win.spec(), d, k});
  fields.emplace_back("p", fix.p);
  fields.emplace_back("r", fix.r);
  fields.emplace_back("q", LatticeField{FieldTag::VisitQ, win.spec(), d, killed_green_apply(r.theta, win, k, k, tol)});
  const auto cols = points(s.at("green_columns"), d);
  for (std::size_t i = 0; i < cols.size(); ++i)
    fields.emplace_back("green_" + std::to_string(i),
                        LatticeField{FieldTag::GreenColumn, win.spec(), d, killed_green_column(r.theta, win, k, cols[i], tol)});
  const double hb = s.at("harmonic_ball").get<double>();
  const auto targets = points(s.at("harmonic_targets"), d);
  if (hb > 0.0) {
    const auto b = ball_mask(r.theta, win, Point{}, hb);
    for (std::size_t i = 0; i < targets.size(); ++i)
      fields.emplace_back("harmonic_" + std::to_string(i),
                          LatticeField{FieldTag::Harmonic, win.spec(), d, harmonic_to(r.theta, win, k, b, targets[i], tol)});
  }

  json files = json::object(), probes = json::array();
  for (const auto& [name, f] : fields) {
    r.out.put(name + ".bin", io::encode_field(f, win));
    files[name] = {{"file", name + ".bin"}, {"tag", std::string(to_string(f.tag))}};
  }
  for (const auto& x : points(s.at("probes"), d)) {
    json v = {{"x", io::point_json(x, d)}};
    for (const auto& [name, f] : fields) v[name] = f.at(win, x);
    probes.push_back(std::move(v));
  }
  return {{"window", {{"radius", win.spec().radius}, {"sites", win.size()}}},
          {"fixpoint", {{"iterations", fix.iterations}, {"residual", fix.residual}, {"deficit_bound", fix.deficit_bound}}},
          {"charge", window_charge(win, fix)},
          {"fields", std::move(files)},
          {"probes", std::move(probes)}};
}

json check_json(const Check& c) {
  return {{"name", c.name},   {"kind", std::string(to_string(c.kind))},
          {"value", c.value}, {"lo", c.lo},
          {"hi", c.hi},       {"pass", c.pass}};
}

json cmd_validate(Run& r, int& code) {
  const auto& s = r.sec();
  ValidateOptions o;
  o.radius = s.at("radius").get<double>();
  o.tol = s.at("tol").get<double>();
  o.identity_threshold = s.at("threshold").get<double>();
  o.bridge = s.at("bridge").get<bool>();
  o.bridge_radius = s.at("bridge_radius").get<double>();
  o.bridge_samples = s.at("bridge_samples").get<std::uint64_t>();
  o.seed = r.seed;
  o.workers = r.workers;
  const auto rep = validate_all(r.theta, r.mu, o);
  json checks = json::array();
  std::string csv = "name,kind,value,lo,hi,pass\n";
  for (const auto& c : rep.checks) {
    checks.push_back(check_json(c));
    csv += c.name + ',' + std::string(to_string(c.kind)) + ',' + io::fmt(c.value) + ',' + io::fmt(c.lo) + ',' +
           io::fmt(c.hi) + ',' + (c.pass ? "1" : "0") + '\n';
  }
  r.out.put("checks.csv", csv);
  if (!rep.passed(CheckKind::Identity)) code = kIdentity;
  return {{"identities_pass", rep.passed(CheckKind::Identity)},
          {"bands_pass", rep.passed(CheckKind::Band)},
          {"bridge_pass", rep.passed(CheckKind::Bridge)},
          {"checks", std::move(checks)}};
}

json cmd_simulate(Run& r) {
  const auto& s = r.sec();
  const int d = r.theta.dim();
  const auto a = io::target_from_json(s.at("set"), d);
  const auto est = s.at("estimator").get<std::string>();
  const auto n = s.at("samples").get<std::uint64_t>();
  McOptions mc;
  mc.seed = r.seed;
  mc.workers = r.workers;
  mc.node_cap = s.at("node_cap").get<std::size_t>();
  const double kill = s.at("kill").get<double>();
  if (kill > 0.0) mc.kill = KillBall{Point{}, kill};
  SpineOptions sp;
  sp.spine_len = s.at("spine_len").get<std::size_t>();
  json list = json::array();
  std::string csv = "start,estimator,value,stderr,n,bias_bound\n";
  std::uint64_t task = 0;
  for (const auto& x : points(s.at("starts"), d)) {
    mc.task = ++task;
    Estimate e;
    if (est == "p")
      e = estimate_p(a, x, r.theta, r.mu, n, mc);
    else if (est == "r")
      e = estimate_r(a, x, r.theta, r.mu, n, mc);
    else if (est == "q")
      e = estimate_q(a, x, r.theta, r.mu, n, mc, sp);
    else if (est == "q_incipient")
      e = estimate_q_incipient(a, x, r.theta, r.mu, n, mc, sp);
    else if (est == "joint") {
      if (s.at("set_b").is_null()) throw Error(ErrorCode::InvalidArgument, "joint estimator needs simulate.set_b");
      e = estimate_joint(a, io::target_from_json(s.at("set_b"), d), x, r.theta, r.mu, SnakeKind::Snake, n, mc);
    } else
      throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + est + "'");
    list.push_back(io::to_json(e, {{"estimator", est}, {"start", io::point_json(x, d)}}));
    csv += io::point_text(x, d) + ',' + est + ',' + io::fmt(e.value) + ',' + io::fmt(e.std_error) + ',' +
           std::to_string(e.n_samples) + ',' + io::fmt(e.truncation_bias_bound) + '\n';
  }
  r.out.put("estimates.csv", csv);
  return {{"estimates", std::move(list)}};
}

json versions() {
  return {{"bcrw", BCRW_VERSION},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"openssl", OPENSSL_VERSION_TEXT}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical branching random walks: capacities, Wiener series and oracles"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = "bcrw_out";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool quick = false;
  app.add_option("--config", config_path, "RunConfig JSON file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--workers", workers, "worker threads (0 = all cores); results do not depend on it");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_flag("--quick", quick, "reduced desk-scale settings");

  std::map<std::string, std::string> presets;
  const std::pair<const char*, const char*> commands[] = {
      {"bcap", "branching capacity of a finite set, or the ball scaling study"},
      {"wiener", "Wiener series over dyadic shells of an infinite set"},
      {"oracle", "exact window fields: visit probabilities, Green columns, harmonic measure"},
      {"validate", "oracle identities, comparability bands and the Monte Carlo bridge"},
      {"simulate", "raw snake estimators p, r, q, q_incipient and joint"}};
  for (const auto& [name, about] : commands) {
    auto* sub = app.add_subcommand(name, about);
    sub->add_option("--preset", presets[name], "named configuration");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const std::string command = app.get_subcommands().front()->get_name();
  Run run;
  json manifest = {{"command", command}};
  int code = kOk;
  std::string error;
  try {
    config::Sources src;
    src.command = command;
    src.quick = quick;
    src.preset = presets[command];
    if (!config_path.empty()) {
      try {
        src.file = json::parse(io::read_file(config_path));
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
      }
      if (!src.file.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
      if (src.file.contains("out") && app.get_option("--out")->count() == 0) out_dir = src.file["out"].get<std::string>();
      src.file.erase("out");
    }
    if (seed) src.flags["seed"] = *seed;
    if (workers) src.flags["workers"] = *workers;
    run.cfg = config::resolve(src);
    manifest["config"] = run.cfg;
    run.theta = io::theta_from_json(run.cfg["theta"]);
    run.mu = io::mu_from_json(run.cfg["mu"]);
    run.seed = run.cfg["seed"].get<std::uint64_t>();
    run.workers = run.cfg["workers"].get<int>();
    if (run.workers < 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 0");
    run.out.dir = out_dir;
    fs::create_directories(run.out.dir);

    json result;
    if (command == "bcap")
      result = cmd_bcap(run);
    else if (command == "wiener")
      result = cmd_wiener(run);
    else if (command == "oracle")
      result = cmd_oracle(run);
    else if (command == "validate")
      result = cmd_validate(run, code);
    else
      result = cmd_simulate(run);
    const json results = {{"config", config::result_key(run.cfg)}, {"result", std::move(result)}};
    run.out.put("results.json", results.dump(2) + "\n");
  } catch (const Error& e) {
    code = e.code() == ErrorCode::NoConvergence ? kConvergence : kConfig;
    error = e.what();
  } catch (const json::exception& e) {
    code = kConfig;
    error = std::string("config: ") + e.what();
  } catch (const std::exception& e) {
    code = kFailure;
    error = e.what();
  }

  manifest["versions"] = versions();
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["exit_code"] = code;
  if (!error.empty()) manifest["error"] = error;
  manifest["outputs"] = run.out.sha;
  if (!error.empty()) std::cerr << "bcrw " << command << ": " << error << "\n";
  try {
    fs::create_directories(out_dir);
    io::write_file((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "bcrw: cannot write manifest: " << e.what() << "\n";
  }
  if (code == kOk) std::cout << "bcrw " << command << ": wrote " << out_dir << "\n";
  return code;
}
