#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "topobound/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"topology optimization with certified performance bounds"};
  app.require_subcommand(0, 1);

  std::string config_path, report_dir;
  tb::RunOverrides ov;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--task", ov.task, "override the config task");
  app.add_option("--out", ov.out_dir, "override the output directory");
  auto* seed_opt = app.add_option("--seed", ov.seed, "override the random seed");
  app.add_flag("--no-cross-correlation", ov.no_cross_correlation,
               "drop the cross-correlation constraints (ablation studies)");
  app.add_option("--rank", ov.rank, "recovery rank");

  CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
  report->add_option("dir", report_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (report->parsed()) {
    try {
      std::cout << tb::report_run(report_dir);
      return 0;
    } catch (const tb::InvalidArgument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  if (config_path.empty()) {
    std::cerr << "error: --config is required\n";
    return 2;
  }
  ov.has_seed = seed_opt->count() > 0;
  return tb::run_from_file(config_path, ov, std::cerr);
}
