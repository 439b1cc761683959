#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "topobound/sdp.hpp"
#include "topobound/topopt.hpp"
#include "topobound/types.hpp"

namespace tb {

/// One batch run, deserialized from a JSON config file. Unknown keys anywhere
/// in the document are rejected before any compute starts.
struct RunConfig {
  std::string problem = "mode_converter";  // mode_converter | plate
  std::string task = "topopt";             // topopt | bound | recover | sweep | ablation

  int nx = 56, ny = 28;

  // mode-converter physics
  double wavelength = 0.8;  // um
  double eps_r = 10.0;
  double L_d = 0.5;  // um
  double H_c = 1.0 / 6.0;

  // plate physics
  double E = 1.0;  // kPa
  double nu = 0.4;
  double rho_min = 10.0, rho_max = 100.0;  // kg/m^3
  double spring_s = 1e-2;
  double gamma = 50.0;
  double omega = 10.0;  // rad/s

  std::string objective = "normalized_overlap";  // normalized_overlap | overlap_magnitude
  int target_mode = 2;   // mode converter: output mode order
  int target_dof = -1;   // plate: translational dof index, -1 = center

  TopoptConfig topopt;

  double sdp_tol = 1e-7;
  int sdp_max_iters = 300;
  bool cross_correlation = true;

  // regularized topopt (mode converter only); filter_radius in element lengths
  bool regularize = false;
  double filter_radius = 3.0;
  std::vector<double> beta_schedule = {1.0, 8.0, 50.0};  // beta0, beta_max, iters per step
  double eta = 1.0;

  std::vector<double> sweep_values = {0.1667, 0.2381, 0.3333, 0.4286, 0.5};

  int rank = 1;  // recovery task
  std::string out_dir = "run";
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidArgument with the offending key
};

/// Parse + schema-validate a config document. Throws InvalidArgument naming
/// the first unknown or ill-typed key.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Command-line overrides applied on top of the file.
struct RunOverrides {
  std::string task;     // empty = keep
  std::string out_dir;  // empty = keep
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool no_cross_correlation = false;
  int rank = 0;  // 0 = keep
};
void apply_overrides(RunConfig& cfg, const RunOverrides& ov);

/// Execute one run: writes result.json plus the task's data files and SVG
/// plots under cfg.out_dir. Returns 0 on success, 3 on numerical failure
/// (config errors throw InvalidArgument before any artifact is written).
int run_task(const RunConfig& cfg);

/// Entry point used by the binary: load, override, validate, run.
/// Returns 0 (success), 2 (config error), 3 (numerical failure).
int run_from_file(const std::string& config_path, const RunOverrides& ov, std::ostream& err);

/// Human-readable summary of a finished run directory: objective, bound and
/// the relative gap (bound - objective) / bound when both are present.
std::string report_run(const std::string& run_dir);

// ---- data files ----------------------------------------------------------

/// Row-major values over a structured grid, `# nx ny n_per_node` header.
struct GridFile {
  int nx = 0, ny = 0, n_per_node = 1;
  RealVector values;  // (nx+1)*(ny+1)*n_per_node
};
void write_grid_csv(const std::string& path, const GridFile& grid);
GridFile read_grid_csv(const std::string& path);

/// Flat key/value JSON document (numbers, bools, strings, numeric arrays).
struct FlatJson {
  std::vector<std::pair<std::string, std::string>> fields;  // value pre-serialized

  void set(const std::string& key, double v);
  void set(const std::string& key, int v) { set(key, double(v)); }
  void set(const std::string& key, bool v);
  void set(const std::string& key, const std::string& v);
  void set(const std::string& key, const RealVector& v);
  const std::string* find(const std::string& key) const;
};
void write_flat_json(const std::string& path, const FlatJson& doc);
FlatJson read_flat_json(const std::string& path);

// ---- plots ---------------------------------------------------------------

/// Gray-scale heatmap of nodal values on the structured grid (pure SVG text).
void write_svg_heatmap(const std::string& path, const RealVector& values, int nx, int ny,
                       double lo, double hi);

/// Line chart with one polyline per series over shared x values.
void write_svg_line_chart(const std::string& path, const RealVector& x,
                          const std::vector<RealVector>& series,
                          const std::vector<std::string>& labels);

}  // namespace tb
