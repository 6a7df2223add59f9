#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "amsim/metrics.hpp"
#include "amsim/runner.hpp"
#include "amsim/scenario.hpp"

namespace {

std::string default_out_dir(const std::string& name, bool ablation) {
  return "out/" + name + (ablation ? "_ablation" : "");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic closed-loop bench for contact-rich aerial manipulation"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string out_dir;
  bool quiet = false;
  std::uint64_t seed_override = 0;
  auto* seed_opt =
      app.add_option("--seed-override", seed_override, "replace the scenario's seed");
  app.add_option("--out-dir", out_dir, "output directory (default out/<scenario-name>)");
  app.add_flag("--quiet", quiet, "suppress summaries and warnings");

  std::string scenario_path, log_dir;
  auto* run_cmd = app.add_subcommand("run", "execute one scenario");
  run_cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
  auto* ablate_cmd =
      app.add_subcommand("ablate", "paired runs with contact factors on vs off");
  ablate_cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
  auto* metrics_cmd =
      app.add_subcommand("metrics", "recompute the metrics of a finished run");
  metrics_cmd->add_option("logdir", log_dir, "log directory of a finished run")->required();
  auto* plots_cmd = app.add_subcommand("plots", "rewrite the plot-ready CSV panels");
  plots_cmd->add_option("logdir", log_dir, "log directory of a finished run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // malformed invocation is a configuration error
  }

  try {
    if (run_cmd->parsed() || ablate_cmd->parsed()) {
      amsim::Scenario scn = amsim::load_scenario(scenario_path);
      if (seed_opt->count() > 0) scn.seed = seed_override;
      amsim::RunOptions opt;
      opt.out_dir = out_dir.empty() ? default_out_dir(scn.name, ablate_cmd->parsed()) : out_dir;
      opt.quiet = quiet;
      if (run_cmd->parsed()) {
        const amsim::RunResult rr = amsim::run_scenario(scn, opt);
        if (!quiet) {
          std::cout << amsim::render_metrics_text(rr.metrics);
          std::cout << "logs: " << opt.out_dir << "\n";
          if (rr.diverged) std::cout << "diverged: " << rr.diagnostic << "\n";
        }
        return rr.exit_code;
      }
      const amsim::AblationResult ar = amsim::run_ablation(scn, opt);
      if (!quiet) {
        std::ifstream table(opt.out_dir + "/ablation.txt");
        std::cout << table.rdbuf();
        std::cout << "logs: " << opt.out_dir << "\n";
      }
      return ar.exit_code;
    }
    if (metrics_cmd->parsed()) {
      const amsim::RunMetrics m = amsim::compute_metrics(log_dir);
      amsim::write_metrics(m, log_dir);
      if (!quiet) std::cout << amsim::render_metrics_text(m);
      return m.success ? 0 : 1;
    }
    if (plots_cmd->parsed()) {
      const int n = amsim::emit_plots(log_dir, quiet);
      if (!quiet) std::cout << "plots: " << n << " panels under " << log_dir << "/plots\n";
      return 0;
    }
  } catch (const amsim::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const amsim::NumericalDivergence& e) {
    std::cerr << "numerical divergence: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
