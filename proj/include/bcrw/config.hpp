#pragma once

// RunConfig: one JSON document drives every command. Values are resolved in
// order defaults -> quick overrides -> preset -> config file -> flags.
//
// Defaults table (--quick value in brackets where it differs)
//
//   key                          default           meaning
//   theta                        "srw5"            step law preset or {"dim","atoms"}
//   mu                           "binary"          offspring preset or pmf list
//   seed                         1
//   workers                      1                 never changes results
//   bcap.set                     [[0,...,0]]       target points, or {"ball":{"m","r"}}
//   bcap.method                  "mc"              "mc" or "oracle"
//   bcap.radii                   [6, 9, 12]        probe radii (mc) or windows (oracle); [] = from Rad(A)
//   bcap.samples                 100000 [10000]
//   bcap.kill_factor             4.0
//   bcap.probes_per_radius       0                 0 = the 2d axis probes
//   bcap.node_cap                5e7
//   bcap.budget                  0                 expected-vertex limit, 0 = none
//   bcap.tol                     1e-10
//   bcap.study                   null              {"m": m, "r": [..]} runs the ball scaling study
//   wiener.set                   {"kind":"subspace","m":4}
//   wiener.n_lo, n_hi            2, 5 [2, 4]
//   wiener.samples               20000 [2000]      per extended shell
//   wiener.kill_factor           2.0
//   wiener.probes_per_radius     0
//   wiener.point_samples         30000 [5000]      single-point capacity
//   wiener.point_radii           [6, 9, 12]
//   wiener.basis                 "proxy"           "proxy" or "extrapolated"
//   wiener.shell_cap             20000
//   wiener.implicit_large        true
//   wiener.visit_samples         0                 > 0 adds shell-visit ratios
//   wiener.visit_kill_factor     1.5
//   oracle.set                   [[0,...,0]]
//   oracle.window                8 [5]
//   oracle.tol                   1e-10
//   oracle.killing               "visit"           "visit" (k = r_A) or "zero"
//   oracle.green_columns         []                targets y of x -> G(x, y)
//   oracle.harmonic_ball         0                 radius of B for harmonic exports, 0 = none
//   oracle.harmonic_targets      []
//   oracle.probes                [[1,0,...]]       sites echoed in results.json
//   validate.radius              8 [5]
//   validate.tol                 1e-12
//   validate.threshold           1e-6
//   validate.bridge              true
//   validate.bridge_radius       6 [4]
//   validate.bridge_samples      100000 [10000]
//   simulate.estimator           "p"               p, r, q, q_incipient, joint
//   simulate.set                 [[0,...,0]]
//   simulate.set_b               null              second set for joint
//   simulate.starts              [[2,0,...]]
//   simulate.samples             100000 [10000]
//   simulate.node_cap            1e6
//   simulate.kill                0                 kill-ball radius about 0, 0 = none
//   simulate.spine_len           0                 0 = adaptive

#include <string>
#include <string_view>

#include "bcrw/errors.hpp"
#include "bcrw/io.hpp"

namespace bcrw::config {

using io::json;

inline json origin(int dim) { return json::array({json(std::vector<int>(dim, 0))}); }

inline json unit(int dim, int s) {
  std::vector<int> v(dim, 0);
  v[0] = s;
  return v;
}

inline json defaults(int dim = 5) {
  return {{"theta", "srw5"},
          {"mu", "binary"},
          {"seed", 1},
          {"workers", 1},
          {"bcap",
           {{"set", origin(dim)},
            {"method", "mc"},
            {"radii", {6.0, 9.0, 12.0}},
            {"samples", 100000},
            {"kill_factor", 4.0},
            {"probes_per_radius", 0},
            {"node_cap", 50000000},
            {"budget", 0.0},
            {"tol", 1e-10},
            {"study", nullptr}}},
          {"wiener",
           {{"set", {{"kind", "subspace"}, {"m", 4}}},
            {"n_lo", 2},
            {"n_hi", 5},
            {"samples", 20000},
            {"kill_factor", 2.0},
            {"probes_per_radius", 0},
            {"point_samples", 30000},
            {"point_radii", {6.0, 9.0, 12.0}},
            {"basis", "proxy"},
            {"shell_cap", 20000},
            {"implicit_large", true},
            {"visit_samples", 0},
            {"visit_kill_factor", 1.5}}},
          {"oracle",
           {{"set", origin(dim)},
            {"window", 8.0},
            {"tol", 1e-10},
            {"killing", "visit"},
            {"green_columns", json::array()},
            {"harmonic_ball", 0.0},
            {"harmonic_targets", json::array()},
            {"probes", json::array({unit(dim, 1)})}}},
          {"validate",
           {{"radius", 8.0},
            {"tol", 1e-12},
            {"threshold", 1e-6},
            {"bridge", true},
            {"bridge_radius", 6.0},
            {"bridge_samples", 100000}}},
          {"simulate",
           {{"estimator", "p"},
            {"set", origin(dim)},
            {"set_b", nullptr},
            {"starts", json::array({unit(dim, 2)})},
            {"samples", 100000},
            {"node_cap", 1000000},
            {"kill", 0.0},
            {"spine_len", 0}}}};
}

inline json quick_overrides() {
  return {{"bcap", {{"samples", 10000}}},
          {"wiener", {{"n_hi", 4}, {"samples", 2000}, {"point_samples", 5000}}},
          {"oracle", {{"window", 5.0}}},
          {"validate", {{"radius", 5.0}, {"bridge_radius", 4.0}, {"bridge_samples", 10000}}},
          {"simulate", {{"samples", 10000}}}};
}

/// Named configurations for the documented desk-scale runs.
inline json preset(std::string_view command, std::string_view name) {
  if (command == "bcap") {
    if (name == "point") return json::object();
    if (name == "ball55")
      return {{"bcap", {{"study", {{"m", 5}, {"r", {8, 16, 32}}}}, {"samples", 40000}, {"kill_factor", 2.0}}}};
    if (name == "ball61")
      return {{"theta", "srw6"},
              {"bcap",
               {{"study", {{"m", 1}, {"r", {2, 4, 8, 16}}}},
                {"samples", 100000},
                {"kill_factor", 2.0},
                {"probes_per_radius", 2000}}}};
    if (name == "ball51")
      return {{"bcap",
               {{"study", {{"m", 1}, {"r", {2, 4, 8, 16}}}},
                {"samples", 100000},
                {"kill_factor", 2.0},
                {"probes_per_radius", 2000}}}};
  } else if (command == "wiener") {
    if (name == "hyperplane") return {{"wiener", {{"set", {{"kind", "subspace"}, {"m", 4}}}}}};
    if (name == "powers_of_2")
      return {{"wiener", {{"set", {{"kind", "axis_points"}, {"stride", "powers_of_2"}}}, {"n_lo", 1}, {"n_hi", 6}}}};
    if (name == "finite_set") return {{"wiener", {{"set", {{"kind", "predicate"}, {"name", "finite_cluster"}}}, {"n_lo", 0}}}};
    if (name == "axis")
      return {{"wiener", {{"set", {{"kind", "axis_points"}, {"stride", "all"}}}, {"n_hi", 4}}}};
  } else if (command == "oracle") {
    if (name == "point") return json::object();
    if (name == "free") return {{"oracle", {{"killing", "zero"}, {"green_columns", json::array({std::vector<int>(5, 0)})}}}};
  } else if (command == "simulate") {
    if (name == "point_p") return json::object();
    if (name == "point_q") return {{"simulate", {{"estimator", "q"}}}};
  } else if (command == "validate") {
    if (name == "default") return json::object();
  }
  throw Error(ErrorCode::InvalidArgument, "unknown preset '" + std::string(name) + "' for " + std::string(command));
}

/// Recursive object merge; arrays and scalars in `patch` replace.
inline void merge(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [k, v] : patch.items()) {
    if (base.contains(k) && base[k].is_object() && v.is_object())
      merge(base[k], v);
    else
      base[k] = v;
  }
}

struct Sources {
  std::string command;
  bool quick = false;
  std::string preset;
  json file = json::object();
  json flags = json::object();  // seed / workers given on the command line
};

/// The effective RunConfig. Default points follow the dimension of the
/// final step law.
inline json resolve(const Sources& s) {
  const bool quick = s.quick || (s.file.contains("quick") && s.file["quick"].get<bool>());
  json layered = json::object();
  if (quick) merge(layered, quick_overrides());
  if (!s.preset.empty()) merge(layered, preset(s.command, s.preset));
  merge(layered, s.file);
  merge(layered, s.flags);
  const json theta_spec = layered.contains("theta") ? layered["theta"] : json("srw5");
  const int dim = io::theta_from_json(theta_spec).dim();
  json cfg = defaults(dim);
  merge(cfg, layered);
  cfg["quick"] = quick;
  cfg["command"] = s.command;
  return cfg;
}

/// The part of the config that determines results: everything except the
/// worker count, output location and the other commands' sections.
inline json result_key(const json& cfg) {
  json k = {{"command", cfg["command"]}, {"theta", cfg["theta"]}, {"mu", cfg["mu"]}, {"seed", cfg["seed"]},
            {"quick", cfg["quick"]}};
  const auto& c = cfg["command"].get_ref<const std::string&>();
  k[c] = cfg[c];
  return k;
}

}  // namespace bcrw::config
