#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace amsim {

/// Error-series summary in the table style used throughout: RMSE over the
/// signed errors, then mean, max and population standard deviation of the
/// absolute errors. No ordering between rmse and mean_abs is implied.
struct SeriesStats {
  std::size_t n = 0;
  double rmse = 0;
  double mean_abs = 0;
  double max_abs = 0;
  double std_abs = 0;
};

SeriesStats series_stats(const std::vector<double>& errors);

/// Pairs each query time with the nearest reference sample, dropping queries
/// whose nearest neighbour is further than half the reference sample period.
/// Returns, per query index, the matched reference index or -1.
std::vector<int> align_nearest(const std::vector<double>& query_t,
                               const std::vector<double>& ref_t);

/// Everything the bench reports about one run. Optional blocks are absent
/// when their underlying interval is empty (no contact, estimator disabled).
struct RunMetrics {
  std::string scenario;
  std::uint64_t seed = 0;
  double duration_s = 0;
  double reference_force_N = 0;

  bool contact_achieved = false;
  double first_contact_t = -1;     // s, -1 when the wall was never touched
  double insertion_offset_m = -1;  // tip offset from the hole axis at first touch
  bool insertion_hit = false;      // offset within the hole radius

  double hold_start_t = -1;  // first ForceHold entry, -1 when never reached
  double hold_duration_s = 0;
  // over [hold_start_t, end): fraction of samples with |F - F_r| <= 1 N
  double force_in_band_fraction = -1;
  // mean measured force over the final 10 s, present only when the hold
  // started at least 10 s before the end of the run
  std::optional<double> force_final10_mean_N;
  SeriesStats force_err_N;  // F - F_r over the hold interval
  bool force_held = false;

  double max_roll_deg = 0;  // during ForceHold rows only
  double max_pitch_deg = 0;

  // estimator velocity error (estimate - truth) along the inward contact
  // axis, at keyframes with the contact detector ON
  std::optional<SeriesStats> vel_contact;
  // per-axis world-frame velocity error over all keyframes
  std::optional<SeriesStats> vel_axis[3];

  std::optional<SeriesStats> align_err_m;  // lateral target offset, metres
  std::optional<SeriesStats> scale_err_px; // radius feature error, pixels

  bool diverged = false;
  bool success = false;
};

/// Recomputes the metrics of a finished (possibly partial) run from its log
/// directory. Needs run_info.csv; the other streams degrade to absent blocks.
RunMetrics compute_metrics(const std::string& log_dir);

/// metrics.csv (one machine-readable row, "n/a" for absent values) and
/// metrics.txt (human-readable table) next to the logs.
void write_metrics(const RunMetrics& m, const std::string& log_dir);

std::string render_metrics_text(const RunMetrics& m);

/// Tidy one-file-per-panel CSVs under <log_dir>/plots. Missing source streams
/// skip their panel with a warning on stderr (unless quiet). Returns the
/// number of panels written.
int emit_plots(const std::string& log_dir, bool quiet = false);

/// Relative RMSE reduction of `on` vs `off` along the contact axis, in
/// percent. Absent when either side has no contact-interval stats; exactly 0
/// for bitwise-equal RMSEs (including the degenerate identical-run case).
std::optional<double> ablation_improvement(const RunMetrics& on, const RunMetrics& off);

/// ablation.csv + ablation.txt comparing two runs of the same scenario.
void write_ablation(const RunMetrics& on, const RunMetrics& off, const std::string& out_dir);

}  // namespace amsim
