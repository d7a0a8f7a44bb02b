#pragma once

// JSON, CSV and flat-binary serialization for the library's value types.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcrw/capacity.hpp"
#include "bcrw/errors.hpp"
#include "bcrw/lattice.hpp"
#include "bcrw/oracle.hpp"
#include "bcrw/snakes.hpp"
#include "bcrw/target.hpp"
#include "bcrw/trees.hpp"
#include "bcrw/wiener.hpp"
#include "bcrw/window.hpp"

namespace bcrw::io {

using json = nlohmann::ordered_json;

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

inline Point point_from_json(const json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw Error(ErrorCode::InvalidArgument, "point must be an array of " + std::to_string(dim) + " integers");
  Point p{};
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_number_integer()) throw Error(ErrorCode::InvalidArgument, "point coordinates must be integers");
    p[i] = j[i].get<std::int32_t>();
  }
  return p;
}

/// "a;b;c" for CSV cells.
inline std::string point_text(const Point& p, int dim) {
  std::string s;
  for (int i = 0; i < dim; ++i) {
    if (i) s += ';';
    s += std::to_string(p[i]);
  }
  return s;
}

// ---- step and offspring laws

inline json to_json(const JumpDistribution& theta) {
  json atoms = json::array();
  for (const auto& a : theta.atoms()) atoms.push_back({{"v", point_json(a.v, theta.dim())}, {"p", a.p}});
  return {{"dim", theta.dim()}, {"atoms", std::move(atoms)}};
}

/// A preset name ("srw5", "srw6", any "srwN") or {"dim": d, "atoms": [{"v": [...], "p": x}]}.
inline JumpDistribution theta_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name.size() == 4 && name.starts_with("srw") && name[3] >= '1' && name[3] <= '0' + kMaxDim)
      return simple_random_walk(name[3] - '0');
    throw Error(ErrorCode::InvalidArgument, "unknown step preset '" + name + "'");
  }
  if (!j.is_object() || !j.contains("dim") || !j.contains("atoms"))
    throw Error(ErrorCode::InvalidArgument, "step law needs 'dim' and 'atoms'");
  const int dim = j.at("dim").get<int>();
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::InvalidArgument, "dimension out of range");
  std::vector<Atom> atoms;
  for (const auto& a : j.at("atoms")) atoms.push_back({point_from_json(a.at("v"), dim), a.at("p").get<double>()});
  return build_jump_distribution(dim, std::move(atoms));
}

inline json to_json(const OffspringDistribution& mu) { return mu.pmf(); }

/// "binary", "geometric" or a pmf list.
inline OffspringDistribution mu_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "binary") return binary_offspring();
    if (name == "geometric") return geometric_offspring();
    throw Error(ErrorCode::InvalidArgument, "unknown offspring preset '" + name + "'");
  }
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "offspring law must be a preset name or a pmf list");
  return validate_offspring(j.get<std::vector<double>>());
}

// ---- sets

inline json to_json(const TargetSet& a) {
  json pts = json::array();
  for (const auto& p : a.points()) pts.push_back(point_json(p, a.dim()));
  return pts;
}

/// A list of points, or {"ball": {"m": m, "r": r}} for a coordinate ball.
inline TargetSet target_from_json(const json& j, int dim) {
  if (j.is_object() && j.contains("ball")) {
    const auto& b = j.at("ball");
    return coordinate_ball(dim, b.at("m").get<int>(), b.at("r").get<int>());
  }
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "target set must be a list of points");
  std::vector<Point> pts;
  for (const auto& p : j) pts.push_back(point_from_json(p, dim));
  return TargetSet(dim, std::move(pts));
}

inline json to_json(const InfiniteSetSpec& k) {
  json j = {{"kind", std::string(to_string(k.kind))}};
  switch (k.kind) {
    case SetKind::Subspace: j["m"] = k.m; break;
    case SetKind::AxisPoints: j["stride"] = k.stride; break;
    case SetKind::ExplicitShells: {
      json s = json::object();
      for (const auto& [n, pts] : k.shells) {
        json list = json::array();
        for (const auto& p : pts) list.push_back(point_json(p, k.dim));
        s[std::to_string(n)] = std::move(list);
      }
      j["shells"] = std::move(s);
      break;
    }
    case SetKind::Predicate: j["name"] = k.predicate; break;
  }
  return j;
}

/// {"kind":"subspace","m":4}, {"kind":"axis_points","stride":"powers_of_2"},
/// {"kind":"explicit_shells","shells":{"3":[[...]]}}, {"kind":"predicate","name":"diagonal"}.
inline InfiniteSetSpec set_spec_from_json(const json& j, int dim) {
  if (!j.is_object() || !j.contains("kind")) throw Error(ErrorCode::InvalidArgument, "set spec needs a 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  InfiniteSetSpec k;
  if (kind == "subspace") {
    k = InfiniteSetSpec::subspace(dim, j.value("m", 1));
  } else if (kind == "axis_points") {
    k = InfiniteSetSpec::axis_points(dim, j.value("stride", std::string("powers_of_2")));
  } else if (kind == "explicit_shells") {
    std::map<int, std::vector<Point>> shells;
    for (const auto& [key, list] : j.at("shells").items()) {
      std::size_t used = 0;
      int n = 0;
      try {
        n = std::stoi(key, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != key.size()) throw Error(ErrorCode::InvalidArgument, "shell keys must be integers");
      auto& v = shells[n];
      for (const auto& p : list) v.push_back(point_from_json(p, dim));
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    k = InfiniteSetSpec::explicit_shells(dim, std::move(shells));
  } else if (kind == "predicate") {
    k = InfiniteSetSpec::named(dim, j.value("name", std::string()));
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown set kind '" + kind + "'");
  }
  k.validate();
  return k;
}

// ---- estimates

inline json to_json(const Estimate& e, json params = json::object()) {
  return {{"value", e.value},
          {"stderr", e.std_error},
          {"n", e.n_samples},
          {"bias_bound", e.truncation_bias_bound},
          {"truncated", e.truncated},
          {"spine_len", e.spine_len},
          {"seed", e.seed},
          {"params", std::move(params)}};
}

inline json to_json(const CapacityEstimate& c) {
  json radii = json::array();
  for (const auto& r : c.per_radius)
    radii.push_back({{"radius", r.radius},
                     {"rescaled", r.rescaled},
                     {"stderr", r.std_error},
                     {"dispersion", r.dispersion},
                     {"probes", r.n_probes},
                     {"bias_bound", r.bias_bound}});
  return {{"value", c.value},
          {"ci", {c.ci_low, c.ci_high}},
          {"method", std::string(to_string(c.method))},
          {"correction", c.correction},
          {"fit_slope", c.fit_slope},
          {"fit_residual", c.fit_residual},
          {"scale_proxy", c.scale_proxy},
          {"scale_proxy_stderr", c.scale_proxy_se},
          {"n_samples", c.n_samples},
          {"truncated", c.truncated},
          {"kill_radius", c.kill_radius},
          {"shared_samples", c.shared_samples},
          {"converging", c.converging()},
          {"seed", c.seed},
          {"per_radius", std::move(radii)}};
}

inline std::string probes_csv(const CapacityEstimate& c, int dim) {
  std::string s = "radius,probe,point,norm,estimate,stderr,hits\n";
  for (std::size_t i = 0; i < c.probes.size(); ++i) {
    const auto& p = c.probes[i];
    s += fmt(p.radius) + ',' + std::to_string(i) + ',' + point_text(p.point, dim) + ',' + fmt(p.norm) + ',' +
         fmt(p.rescaled) + ',' + fmt(p.std_error) + ',' + std::to_string(p.hits) + '\n';
  }
  return s;
}

inline json to_json(const LogLogFit& f) {
  return {{"slope", f.slope}, {"slope_stderr", f.slope_se}, {"intercept", f.intercept}, {"rms", f.rms}};
}

inline json to_json(const BallScalingReport& r) {
  json caps = json::array();
  for (std::size_t i = 0; i < r.capacities.size(); ++i)
    caps.push_back({{"r", r.r[i]}, {"size", r.sizes[i]}, {"capacity", to_json(r.capacities[i])}});
  return {{"dim", r.dim},
          {"m", r.m},
          {"regime", r.regime},
          {"predicted_exponent", r.predicted_exponent},
          {"plain", to_json(r.plain)},
          {"log_corrected", to_json(r.corrected)},
          {"extrapolated", to_json(r.extrapolated)},
          {"improvement", r.improvement},
          {"balls", std::move(caps)}};
}

inline json to_json(const RatioFit& f) {
  return {{"rho", f.rho}, {"sigma", f.sigma}, {"ci", {f.ci_low, f.ci_high}}, {"points", f.points}};
}

inline json to_json(const SeriesReport& r) {
  json terms = json::array();
  for (const auto& t : r.terms) {
    json e = {{"n", t.n},
              {"count", t.count},
              {"source", t.source},
              {"capacity", t.capacity},
              {"capacity_stderr", t.capacity_se},
              {"capacity_ci", {t.ci_low, t.ci_high}},
              {"term", t.term},
              {"term_stderr", t.term_se}};
    if (t.estimate) e["estimate"] = to_json(*t.estimate);
    terms.push_back(std::move(e));
  }
  return {{"set", r.set},
          {"dim", r.dim},
          {"n_lo", r.n_lo},
          {"n_hi", r.n_hi},
          {"basis", std::string(to_string(r.basis))},
          {"verdict", std::string(to_string(r.verdict))},
          {"reason", r.reason},
          {"fit", to_json(r.fit)},
          {"tail_fit", to_json(r.tail_fit)},
          {"partial_sums", r.partial_sums},
          {"terms", std::move(terms)}};
}

inline std::string terms_csv(const SeriesReport& r) {
  std::string s = "n,count,source,capacity,capacity_stderr,term,term_stderr,partial_sum\n";
  for (std::size_t i = 0; i < r.terms.size(); ++i) {
    const auto& t = r.terms[i];
    s += std::to_string(t.n) + ',' + std::to_string(t.count) + ',' + t.source + ',' + fmt(t.capacity) + ',' +
         fmt(t.capacity_se) + ',' + fmt(t.term) + ',' + fmt(t.term_se) + ',' + fmt(r.partial_sums[i]) + '\n';
  }
  return s;
}

// ---- field binaries
//
// Layout, little-endian:
//   char[8]  "BCRWFLD1"
//   uint32   dim
//   double   radius
//   uint32   tag
//   int32    center[dim]
//   uint64   count
//   double   values[count]
// Values run over the window's sites in lexicographic order of their
// coordinates (the last coordinate varies fastest).

inline constexpr char kFieldMagic[8] = {'B', 'C', 'R', 'W', 'F', 'L', 'D', '1'};

namespace detail {

template <class T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw Error(ErrorCode::InvalidArgument, "truncated field file");
  T v;
  std::memcpy(&v, in.data(), sizeof v);
  in.remove_prefix(sizeof v);
  return v;
}

inline std::vector<std::size_t> lexicographic_order(const Window& win) {
  std::vector<std::size_t> idx(win.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return win.site(a) < win.site(b); });
  return idx;
}

}  // namespace detail

inline std::string encode_field(const LatticeField& f, const Window& win) {
  if (f.values.size() != win.size()) throw Error(ErrorCode::InvalidArgument, "field does not match window");
  std::string out(kFieldMagic, sizeof kFieldMagic);
  detail::put(out, static_cast<std::uint32_t>(f.dim));
  detail::put(out, f.spec.radius);
  detail::put(out, static_cast<std::uint32_t>(f.tag));
  for (int i = 0; i < f.dim; ++i) detail::put(out, static_cast<std::int32_t>(f.spec.center[i]));
  detail::put(out, static_cast<std::uint64_t>(f.values.size()));
  for (auto i : detail::lexicographic_order(win)) detail::put(out, f.values[i]);
  return out;
}

/// Inverse of encode_field; the window is rebuilt from theta and the header.
inline LatticeField decode_field(std::string_view in, const JumpDistribution& theta) {
  if (in.size() < sizeof kFieldMagic || std::memcmp(in.data(), kFieldMagic, sizeof kFieldMagic) != 0)
    throw Error(ErrorCode::InvalidArgument, "not a field file");
  in.remove_prefix(sizeof kFieldMagic);
  LatticeField f;
  f.dim = static_cast<int>(detail::take<std::uint32_t>(in));
  if (f.dim != theta.dim()) throw Error(ErrorCode::InvalidArgument, "field dimension differs from the step law");
  f.spec.radius = detail::take<double>(in);
  f.tag = static_cast<FieldTag>(detail::take<std::uint32_t>(in));
  for (int i = 0; i < f.dim; ++i) f.spec.center[i] = detail::take<std::int32_t>(in);
  const auto count = detail::take<std::uint64_t>(in);
  const Window win(theta, f.spec);
  if (count != win.size() || in.size() != count * sizeof(double))
    throw Error(ErrorCode::InvalidArgument, "field size does not match its window");
  f.values.assign(count, 0.0);
  for (auto i : detail::lexicographic_order(win)) f.values[i] = detail::take<double>(in);
  return f;
}

// ---- files and checksums

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::InvalidArgument, "sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace bcrw::io
