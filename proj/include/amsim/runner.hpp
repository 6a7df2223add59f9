#pragma once

#include <optional>
#include <string>

#include "amsim/metrics.hpp"
#include "amsim/scenario.hpp"

namespace amsim {

struct RunOptions {
  std::string out_dir;  // log directory, created if needed
  bool quiet = false;   // suppress stderr warnings
};

struct RunResult {
  RunMetrics metrics;
  bool diverged = false;
  std::string diagnostic;  // non-empty when the run was cut short
  int exit_code = 0;       // 0 success, 1 task failure, 3 numerical divergence
};

/// Executes one scenario end to end: simulator, sensors, estimator, visual
/// servo, hybrid controller and allocation in a single deterministic loop.
/// Leaves the full log bundle plus metrics and plot CSVs in opt.out_dir. A
/// numerical divergence stops the loop, keeps the partial logs and is
/// reported in the result instead of escaping.
RunResult run_scenario(const Scenario& scn, const RunOptions& opt);

struct AblationResult {
  RunResult a, b;
  std::optional<double> improvement_pct;  // relative rmse reduction of a vs b
  int exit_code = 0;
};

/// Paired runs of the same scenario and seed with the contact factors forced
/// to the two given settings (defaults: on vs off). The toggle touches no
/// random stream, so with truth feedback the sensor logs of both runs are
/// byte-identical. Logs go to <out_dir>/contact_on and <out_dir>/contact_off
/// with the comparison table at the top level.
AblationResult run_ablation(const Scenario& scn, const RunOptions& opt, bool variant_a_on = true,
                            bool variant_b_on = false);

}  // namespace amsim
