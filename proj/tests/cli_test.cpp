#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "bcrw/config.hpp"
#include "bcrw/io.hpp"
#include "bcrw/oracle.hpp"

using namespace bcrw;
using io::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bcrw_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const fs::path& out, const std::string& args, const json& cfg = json::object()) {
  const auto cfg_path = out.parent_path() / (out.filename().string() + ".json");
  io::write_file(cfg_path.string(), cfg.dump());
  const std::string cmd = std::string("\"") + BCRW_CLI + "\" --config \"" + cfg_path.string() + "\" --out \"" +
                          out.string() + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, LayersInOrder) {
  config::Sources s;
  s.command = "wiener";
  s.quick = true;
  s.preset = "powers_of_2";
  s.file = {{"wiener", {{"n_hi", 3}}}};
  s.flags = {{"seed", 9}};
  const auto cfg = config::resolve(s);
  EXPECT_EQ(cfg["wiener"]["samples"], 2000);   // quick
  EXPECT_EQ(cfg["wiener"]["n_lo"], 1);         // preset
  EXPECT_EQ(cfg["wiener"]["n_hi"], 3);         // file beats preset and quick
  EXPECT_EQ(cfg["wiener"]["kill_factor"], 2.0);  // default
  EXPECT_EQ(cfg["seed"], 9);
  EXPECT_EQ(cfg["wiener"]["set"]["kind"], "axis_points");
}

TEST(Config, QuickFromFileAndDimensionFollowsTheta) {
  config::Sources s;
  s.command = "bcap";
  s.file = {{"quick", true}, {"theta", "srw6"}};
  const auto cfg = config::resolve(s);
  EXPECT_TRUE(cfg["quick"].get<bool>());
  EXPECT_EQ(cfg["bcap"]["samples"], 10000);
  EXPECT_EQ(cfg["bcap"]["set"][0].size(), 6u);
}

TEST(Config, UnknownPresetThrows) {
  EXPECT_THROW(config::preset("bcap", "nope"), Error);
  EXPECT_THROW(config::preset("frobnicate", "point"), Error);
}

TEST(Config, ResultKeyIgnoresWorkersAndOtherSections) {
  config::Sources a, b;
  a.command = b.command = "oracle";
  a.flags = {{"workers", 1}};
  b.flags = {{"workers", 4}};
  b.file = {{"bcap", {{"samples", 7}}}};
  EXPECT_EQ(config::result_key(config::resolve(a)).dump(), config::result_key(config::resolve(b)).dump());
  EXPECT_FALSE(config::result_key(config::resolve(a)).contains("bcap"));
}

TEST(Io, NumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) EXPECT_EQ(std::strtod(io::fmt(v).c_str(), nullptr), v);
  EXPECT_EQ(io::fmt(0.5), "0.5");
}

TEST(Io, LawsAndSetsRoundTrip) {
  const auto theta = io::theta_from_json(io::to_json(simple_random_walk(4)));
  EXPECT_EQ(theta.dim(), 4);
  EXPECT_EQ(theta.atoms().size(), 8u);
  const auto mu = io::mu_from_json(io::to_json(geometric_offspring()));
  EXPECT_NEAR(mu.mean(), 1.0, 1e-12);
  const TargetSet a(5, {Point{}, make_point({1, 2})});
  EXPECT_EQ(io::to_json(io::target_from_json(io::to_json(a), 5)).dump(), io::to_json(a).dump());
  const auto k = InfiniteSetSpec::axis_points(5, "all");
  EXPECT_EQ(io::set_spec_from_json(io::to_json(k), 5).describe(), k.describe());
  EXPECT_THROW(io::target_from_json(json::array(), 5), Error);
}

TEST(Io, FieldRoundTrip) {
  const auto theta = simple_random_walk(3);
  const Window win(theta, {make_point({1, 0, -1}), 3.0});
  const auto fix = solve_visit_fixpoint(TargetSet(3, {make_point({1, 0, -1})}), binary_offspring(), theta, win);
  const auto bytes = io::encode_field(fix.p, win);
  EXPECT_EQ(bytes.substr(0, 8), "BCRWFLD1");
  const auto back = io::decode_field(bytes, theta);
  EXPECT_EQ(back.tag, fix.p.tag);
  EXPECT_EQ(back.spec.radius, 3.0);
  EXPECT_EQ(back.spec.center, fix.p.spec.center);
  EXPECT_EQ(back.values, fix.p.values);
  EXPECT_THROW(io::decode_field(bytes.substr(0, bytes.size() - 1), theta), Error);
  EXPECT_THROW(io::decode_field(bytes, simple_random_walk(4)), Error);
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, FreePresetExportsFreeGreenColumn) {
  const auto out = scratch("free");
  ASSERT_EQ(run(out, "--quick oracle --preset free"), 0);
  const auto theta = simple_random_walk(5);
  const auto f = io::decode_field(io::read_file((out / "green_0.bin").string()), theta);
  const Window win(theta, f.spec);
  const auto col = free_green_column(theta, win, Point{}, 1e-12);
  ASSERT_EQ(col.size(), f.values.size());
  for (std::size_t i = 0; i < col.size(); ++i) EXPECT_NEAR(f.values[i], col[i], 1e-8);
  const auto killing = io::decode_field(io::read_file((out / "killing.bin").string()), theta);
  for (double v : killing.values) EXPECT_EQ(v, 0.0);
}

TEST(Cli, ManifestChecksumsMatchOutputs) {
  const auto out = scratch("manifest");
  ASSERT_EQ(run(out, "--quick simulate", {{"simulate", {{"samples", 500}}}}), 0);
  const auto manifest = json::parse(io::read_file((out / "manifest.json").string()));
  EXPECT_EQ(manifest["exit_code"], 0);
  ASSERT_FALSE(manifest["outputs"].empty());
  for (const auto& [name, sha] : manifest["outputs"].items())
    EXPECT_EQ(sha.get<std::string>(), io::sha256_hex(io::read_file((out / name).string()))) << name;
}

TEST(Cli, BadInputsExitWithConfigCode) {
  EXPECT_EQ(run(scratch("empty"), "bcap", {{"bcap", {{"set", json::array()}}}}), 2);
  EXPECT_EQ(run(scratch("preset"), "bcap --preset nope"), 2);
  const auto out = scratch("theta");
  EXPECT_EQ(run(out, "oracle", {{"theta", "srw99"}}), 2);
  const auto manifest = json::parse(io::read_file((out / "manifest.json").string()));
  EXPECT_EQ(manifest["exit_code"], 2);
  EXPECT_TRUE(manifest.contains("error"));
}

TEST(Cli, WorkersDoNotChangeResults) {
  const json cfg = {{"bcap", {{"samples", 1500}}}};
  const auto a = scratch("w1"), b = scratch("w3");
  ASSERT_EQ(run(a, "--workers 1 bcap", cfg), 0);
  ASSERT_EQ(run(b, "--workers 3 bcap", cfg), 0);
  for (const char* f : {"results.json", "probes.csv"})
    EXPECT_EQ(io::read_file((a / f).string()), io::read_file((b / f).string())) << f;
}
