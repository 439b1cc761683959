#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "topobound/cli.hpp"

using namespace tb;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "tb_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kPlateBase = R"({
  "problem": "plate", "task": "topopt",
  "mesh": {"nx": 6, "ny": 6},
  "objective": {"kind": "overlap_magnitude"},
  "topopt": {"max_iters": 15},
  "sdp": {"max_iters": 80},
  "out": "OUT", "seed": 3
})";

// small converter whose relaxation certifies quickly
const char* kConverterBase = R"({
  "problem": "mode_converter", "task": "topopt",
  "mesh": {"nx": 24, "ny": 12},
  "objective": {"kind": "normalized_overlap", "mode": 2},
  "topopt": {"max_iters": 40},
  "sdp": {"max_iters": 400},
  "out": "OUT", "seed": 3
})";

RunConfig base_config(const char* base, const fs::path& out, const std::string& task) {
  std::string text = base;
  text.replace(text.find("OUT"), 3, out.string());
  RunConfig cfg = parse_run_config(text);
  cfg.task = task;
  cfg.validate();
  return cfg;
}

RunConfig plate_config(const fs::path& out, const std::string& task) {
  return base_config(kPlateBase, out, task);
}

RunConfig converter_config(const fs::path& out, const std::string& task) {
  return base_config(kConverterBase, out, task);
}

}  // namespace

TEST_CASE("defaults survive an empty config and keys land in the right fields") {
  RunConfig cfg = parse_run_config(R"({
    "problem": "mode_converter",
    "mesh": {"nx": 24, "ny": 12},
    "physics": {"wavelength": 0.7, "eps_r": 9.0, "L_d": 0.4, "H_c": 0.2},
    "objective": {"kind": "overlap_magnitude", "mode": 3},
    "seed": 11
  })");
  CHECK(cfg.problem == "mode_converter");
  CHECK(cfg.task == "topopt");  // default
  CHECK(cfg.nx == 24);
  CHECK(cfg.wavelength == 0.7);
  CHECK(cfg.eps_r == 9.0);
  CHECK(cfg.L_d == 0.4);
  CHECK(cfg.H_c == 0.2);
  CHECK(cfg.objective == "overlap_magnitude");
  CHECK(cfg.target_mode == 3);
  CHECK(cfg.seed == 11);
  CHECK(cfg.cross_correlation);
  CHECK(parse_run_config("{}").problem == "mode_converter");
}

TEST_CASE("unknown or ill-typed keys are rejected with the offending name") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"wavelenght": 0.8})"),
                       doctest::Contains("wavelenght"), InvalidArgument);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"physics": {"epsr": 10}})"),
                       doctest::Contains("physics.epsr"), InvalidArgument);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"mesh": {"nx": "many"}})"), doctest::Contains("nx"),
                       InvalidArgument);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"task": "optimize"})"), doctest::Contains("task"),
                       InvalidArgument);
  CHECK_THROWS_AS(parse_run_config("not json"), InvalidArgument);
  CHECK_THROWS_AS(parse_run_config(R"({"physics": {"eps_r": 0.5}})"), InvalidArgument);
  // the plate has no normalized-overlap objective
  CHECK_THROWS_AS(parse_run_config(R"({"problem": "plate"})"), InvalidArgument);
}

TEST_CASE("command-line overrides take precedence over the file") {
  RunConfig cfg = parse_run_config(R"({"task": "topopt", "seed": 1})");
  RunOverrides ov;
  ov.task = "bound";
  ov.out_dir = "elsewhere";
  ov.has_seed = true;
  ov.seed = 42;
  ov.no_cross_correlation = true;
  ov.rank = 3;
  apply_overrides(cfg, ov);
  CHECK(cfg.task == "bound");
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.seed == 42);
  CHECK_FALSE(cfg.cross_correlation);
  CHECK(cfg.rank == 3);
}

TEST_CASE("grid CSV round-trips bit-identically") {
  const fs::path dir = scratch("csv");
  GridFile g;
  g.nx = 3;
  g.ny = 2;
  g.n_per_node = 2;
  g.values.resize(24);
  for (Index i = 0; i < 24; ++i) g.values(i) = std::sin(double(i)) * 1e3 / 7.0;
  const std::string p1 = (dir / "a.csv").string(), p2 = (dir / "b.csv").string();
  write_grid_csv(p1, g);
  GridFile back = read_grid_csv(p1);
  CHECK(back.nx == g.nx);
  CHECK(back.ny == g.ny);
  CHECK(back.n_per_node == g.n_per_node);
  CHECK((back.values - g.values).norm() == 0.0);
  write_grid_csv(p2, back);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(p1).rfind("# 3 2 2\n", 0) == 0);
}

TEST_CASE("flat json stores and finds typed fields") {
  const fs::path dir = scratch("json");
  FlatJson doc;
  doc.set("task", std::string("bound"));
  doc.set("bound", 0.123456789012345);
  doc.set("converged", true);
  RealVector spec(3);
  spec << 3.0, 2.0, 1.0;
  doc.set("rank_spectrum", spec);
  const std::string path = (dir / "result.json").string();
  write_flat_json(path, doc);
  FlatJson back = read_flat_json(path);
  REQUIRE(back.find("bound") != nullptr);
  CHECK(std::strtod(back.find("bound")->c_str(), nullptr) == 0.123456789012345);
  CHECK(*back.find("converged") == "true");
  CHECK(back.find("missing") == nullptr);
}

TEST_CASE("svg writers emit well-formed headers") {
  const fs::path dir = scratch("svg");
  RealVector v(6);
  v << -1, 0, 1, 0.5, -0.5, 0;
  write_svg_heatmap((dir / "h.svg").string(), v, 1, 2, -1.0, 1.0);
  RealVector x(3), s(3);
  x << 1, 2, 3;
  s << 0.5, 0.7, 0.9;
  write_svg_line_chart((dir / "l.svg").string(), x, {s}, {"obj"});
  CHECK(slurp(dir / "h.svg").rfind("<svg", 0) == 0);
  CHECK(slurp(dir / "l.svg").rfind("<svg", 0) == 0);
  CHECK(slurp(dir / "l.svg").find("polyline") != std::string::npos);
}

TEST_CASE("topopt task writes artifacts; gap appears only once a bound exists") {
  const fs::path dir = scratch("gap");
  RunConfig cfg = converter_config(dir, "topopt");
  REQUIRE(run_task(cfg) == 0);
  for (const char* f : {"result.json", "design.csv", "field_re.csv", "field_im.csv",
                        "design.svg", "field.svg"})
    CHECK(fs::exists(dir / f));
  FlatJson first = read_flat_json((dir / "result.json").string());
  CHECK(first.find("objective") != nullptr);
  CHECK(first.find("gap_percent") == nullptr);  // no bound yet

  RunConfig bcfg = converter_config(dir, "bound");
  REQUIRE(run_task(bcfg) == 0);
  REQUIRE(run_task(cfg) == 0);
  FlatJson second = read_flat_json((dir / "result.json").string());
  REQUIRE(second.find("gap_percent") != nullptr);
  const double obj = std::strtod(second.find("objective")->c_str(), nullptr);
  const double bound = std::strtod(second.find("bound")->c_str(), nullptr);
  const double gap = std::strtod(second.find("gap_percent")->c_str(), nullptr);
  CHECK(gap == doctest::Approx(100.0 * (bound - obj) / bound).epsilon(1e-12));
  CHECK(bound >= obj - 1e-9 * std::abs(bound));
  CHECK(read_grid_csv((dir / "field_re.csv").string()).n_per_node == 1);
  CHECK(read_grid_csv((dir / "design.csv").string()).n_per_node == 1);
}

TEST_CASE("identical config and seed reproduce the result bit for bit") {
  const fs::path d1 = scratch("det1"), d2 = scratch("det2");
  RunConfig a = plate_config(d1, "topopt"), b = plate_config(d2, "topopt");
  REQUIRE(run_task(a) == 0);
  REQUIRE(run_task(b) == 0);
  FlatJson r1 = read_flat_json((d1 / "result.json").string());
  FlatJson r2 = read_flat_json((d2 / "result.json").string());
  REQUIRE(r1.fields.size() == r2.fields.size());
  for (size_t i = 0; i < r1.fields.size(); ++i) {
    CHECK(r1.fields[i].first == r2.fields[i].first);
    if (r1.fields[i].first == "cpu_seconds") continue;  // wall-clock, excluded
    CHECK(r1.fields[i].second == r2.fields[i].second);
  }
  CHECK(slurp(d1 / "design.csv") == slurp(d2 / "design.csv"));
  // plate fields carry all three Kirchhoff dofs per node
  CHECK(read_grid_csv((d1 / "field_re.csv").string()).n_per_node == 3);
}

TEST_CASE("bound task records the certificate and the rank spectrum") {
  const fs::path dir = scratch("bound");
  RunConfig cfg = converter_config(dir, "bound");
  REQUIRE(run_task(cfg) == 0);
  FlatJson r = read_flat_json((dir / "result.json").string());
  REQUIRE(r.find("bound") != nullptr);
  CHECK(r.find("rank") != nullptr);
  CHECK(r.find("rank_spectrum") != nullptr);
  CHECK(r.find("dual_feasible") != nullptr);
  CHECK(fs::exists(dir / "bound.json"));
  CHECK(slurp(dir / "sdp_export.txt").rfind("# sparse-triple SDP export", 0) == 0);
}

TEST_CASE("recover task re-analyzes both halves below the bound") {
  const fs::path dir = scratch("recover");
  RunConfig cfg = converter_config(dir, "recover");
  cfg.rank = 1;
  REQUIRE(run_task(cfg) == 0);
  FlatJson r = read_flat_json((dir / "result.json").string());
  const double bound = std::strtod(r.find("bound")->c_str(), nullptr);
  for (const char* key : {"recovered_a", "recovered_b", "seeded_objective"}) {
    REQUIRE(r.find(key) != nullptr);
    CHECK(std::strtod(r.find(key)->c_str(), nullptr) <= bound + 1e-6 * (1.0 + std::abs(bound)));
  }
}

TEST_CASE("ablation task reports both bounds with the looser one unconstrained") {
  const fs::path dir = scratch("ablation");
  RunConfig cfg = converter_config(dir, "ablation");
  REQUIRE(run_task(cfg) == 0);
  FlatJson r = read_flat_json((dir / "result.json").string());
  const double full = std::strtod(r.find("bound")->c_str(), nullptr);
  const double ablated =
      std::strtod(r.find("bound_without_cross_correlation")->c_str(), nullptr);
  CHECK(ablated >= full - 1e-6 * (1.0 + std::abs(full)));
}

TEST_CASE("sweep task emits one row per size plus a chart") {
  const fs::path dir = scratch("sweep");
  RunConfig cfg = parse_run_config(R"({
    "problem": "mode_converter", "task": "sweep",
    "mesh": {"nx": 24, "ny": 12},
    "objective": {"kind": "overlap_magnitude"},
    "topopt": {"max_iters": 20},
    "sdp": {"max_iters": 120},
    "sweep": {"values": [0.3333, 0.5]},
    "seed": 5
  })");
  cfg.out_dir = dir.string();
  REQUIRE(run_task(cfg) == 0);
  const std::string csv = slurp(dir / "sweep.csv");
  CHECK(csv.rfind("# L_d,objective,bound,transmittance,cpu_seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 points
  CHECK(fs::exists(dir / "sweep.svg"));
  CHECK(fs::exists(dir / "L_0.3333" / "design.csv"));
  CHECK(fs::exists(dir / "L_0.5000" / "field.svg"));
  FlatJson r = read_flat_json((dir / "result.json").string());
  CHECK(r.find("bound") != nullptr);
}

TEST_CASE("report prints the gap, or says that no bound exists") {
  const fs::path dir = scratch("report");
  FlatJson r;
  r.set("task", std::string("topopt"));
  r.set("objective", 0.5);
  write_flat_json((dir / "result.json").string(), r);
  CHECK(report_run(dir.string()).find("no bound computed") != std::string::npos);

  r.set("bound", 1.0);
  write_flat_json((dir / "result.json").string(), r);
  const std::string text = report_run(dir.string());
  CHECK(text.find("relative gap 50%") != std::string::npos);

  FlatJson eq;
  eq.set("objective", 2.0);
  eq.set("bound", 2.0);
  write_flat_json((dir / "result.json").string(), eq);
  CHECK(report_run(dir.string()).find("relative gap 0%") != std::string::npos);
}

TEST_CASE("exit codes distinguish config errors from numerical failures") {
  const fs::path dir = scratch("exit");
  std::ostringstream err;
  CHECK(run_from_file((dir / "missing.json").string(), {}, err) == 2);

  spit(dir / "bad.json", R"({"physics": {"epsilon": 10}})");
  CHECK(run_from_file((dir / "bad.json").string(), {}, err) == 2);
  CHECK(err.str().find("epsilon") != std::string::npos);

  // more guided output modes requested than the cross-section supports
  spit(dir / "hard.json", R"({
    "problem": "mode_converter", "task": "topopt",
    "mesh": {"nx": 24, "ny": 12},
    "objective": {"kind": "normalized_overlap", "mode": 40},
    "out": ")" + (dir / "hard_out").string() + R"("
  })");
  CHECK(run_from_file((dir / "hard.json").string(), {}, err) == 3);
}
