#include "amsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "amsim/csv.hpp"
#include "amsim/geometry.hpp"

namespace amsim {

namespace fs = std::filesystem;

SeriesStats series_stats(const std::vector<double>& errors) {
  SeriesStats s;
  s.n = errors.size();
  if (errors.empty()) return s;
  double sum_sq = 0, sum_abs = 0;
  for (double e : errors) {
    sum_sq += e * e;
    sum_abs += std::abs(e);
    s.max_abs = std::max(s.max_abs, std::abs(e));
  }
  const double n = static_cast<double>(errors.size());
  s.rmse = std::sqrt(sum_sq / n);
  s.mean_abs = sum_abs / n;
  double var = 0;
  for (double e : errors) {
    const double d = std::abs(e) - s.mean_abs;
    var += d * d;
  }
  s.std_abs = std::sqrt(var / n);
  return s;
}

std::vector<int> align_nearest(const std::vector<double>& query_t,
                               const std::vector<double>& ref_t) {
  std::vector<int> match(query_t.size(), -1);
  if (ref_t.empty()) return match;
  double period = 0;
  if (ref_t.size() > 1) {
    period = (ref_t.back() - ref_t.front()) / static_cast<double>(ref_t.size() - 1);
  }
  const double tol = period > 0 ? 0.5 * period : 0.0;
  for (size_t i = 0; i < query_t.size(); ++i) {
    const auto it = std::lower_bound(ref_t.begin(), ref_t.end(), query_t[i]);
    int best = -1;
    double best_d = tol;
    if (it != ref_t.end()) {
      best = static_cast<int>(it - ref_t.begin());
      best_d = std::abs(*it - query_t[i]);
    }
    if (it != ref_t.begin()) {
      const int prev = static_cast<int>(it - ref_t.begin()) - 1;
      const double d = std::abs(query_t[i] - ref_t[prev]);
      if (best < 0 || d < best_d) {
        best = prev;
        best_d = d;
      }
    }
    if (best >= 0 && best_d <= tol) match[i] = best;
  }
  return match;
}

namespace {

std::optional<CsvTable> load_optional(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  return read_csv(p.string());
}

std::string fmt4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) {
  return v ? csv_num(*v) : std::string("n/a");
}

/// Closed ForceHold spans [enter, exit] from the control log, the last one
/// running to the final row when the run ends while holding.
std::vector<std::pair<double, double>> hold_intervals(const CsvTable& control) {
  std::vector<std::pair<double, double>> spans;
  const int c_t = control.col("t");
  const int c_phase = control.col("phase");
  bool in_hold = false;
  double t_last = 0;
  for (size_t i = 0; i < control.rows.size(); ++i) {
    const double t = control.num(i, c_t);
    const bool hold = control.cell(i, c_phase) == "force_hold";
    if (hold && !in_hold) spans.emplace_back(t, t);
    if (!hold && in_hold) spans.back().second = t;
    if (hold) t_last = t;
    in_hold = hold;
  }
  if (in_hold && !spans.empty()) spans.back().second = t_last;
  return spans;
}

bool inside_any(const std::vector<std::pair<double, double>>& spans, double t) {
  for (const auto& s : spans) {
    if (t >= s.first && t <= s.second) return true;
  }
  return false;
}

void txt_stats_row(std::string& out, const char* label, const std::optional<SeriesStats>& s) {
  out += "  ";
  out += label;
  if (s) {
    out += fmt4(s->rmse) + "  " + fmt4(s->mean_abs) + "  " + fmt4(s->max_abs) + "  " +
           fmt4(s->std_abs) + "  (n=" + std::to_string(s->n) + ")";
  } else {
    out += "n/a";
  }
  out += '\n';
}

}  // namespace

RunMetrics compute_metrics(const std::string& log_dir) {
  const fs::path dir(log_dir);
  RunMetrics m;

  const CsvTable info = read_csv((dir / "run_info.csv").string());
  if (info.rows.empty()) throw ConfigError("metrics: run_info.csv has no data row");
  m.scenario = info.cell(0, info.col("name"));
  m.seed = static_cast<std::uint64_t>(info.num(0, info.col("seed")));
  m.duration_s = info.num(0, info.col("duration_s"));
  m.reference_force_N = info.num(0, info.col("reference_force_N"));
  const Vec3 contact_axis = -Vec3(info.num(0, info.col("wall_nx")),
                                  info.num(0, info.col("wall_ny")),
                                  info.num(0, info.col("wall_nz")));

  if (const auto events = load_optional(dir / "events.csv")) {
    const int c_t = events->col("t");
    const int c_ev = events->col("event");
    const int c_v1 = events->col("value1");
    const int c_v2 = events->col("value2");
    for (size_t i = 0; i < events->rows.size(); ++i) {
      const std::string& ev = events->cell(i, c_ev);
      if (ev == "first_contact" && !m.contact_achieved) {
        m.contact_achieved = true;
        m.first_contact_t = events->num(i, c_t);
        m.insertion_offset_m = events->num(i, c_v1);
        m.insertion_hit = events->num(i, c_v2) != 0;
      } else if (ev == "diverged") {
        m.diverged = true;
      }
    }
  }

  std::vector<std::pair<double, double>> spans;
  if (const auto control = load_optional(dir / "control.csv")) {
    spans = hold_intervals(*control);
    if (!spans.empty()) {
      m.hold_start_t = spans.front().first;
      for (const auto& s : spans) m.hold_duration_s += s.second - s.first;
    }
  }

  if (const auto ft = load_optional(dir / "ft.csv"); ft && m.hold_start_t >= 0) {
    const int c_t = ft->col("t");
    const int c_f = ft->col("normal_N");
    std::vector<double> err;
    size_t in_band = 0;
    double final_sum = 0;
    size_t final_n = 0;
    const double final_t0 = m.duration_s - 10.0;
    for (size_t i = 0; i < ft->rows.size(); ++i) {
      const double t = ft->num(i, c_t);
      if (t < m.hold_start_t) continue;
      const double f = ft->num(i, c_f);
      err.push_back(f - m.reference_force_N);
      if (std::abs(err.back()) <= 1.0) ++in_band;
      if (t >= final_t0) {
        final_sum += f;
        ++final_n;
      }
    }
    if (!err.empty()) {
      m.force_err_N = series_stats(err);
      m.force_in_band_fraction = static_cast<double>(in_band) / static_cast<double>(err.size());
    }
    if (m.hold_start_t <= final_t0 && final_n > 0) {
      m.force_final10_mean_N = final_sum / static_cast<double>(final_n);
    }
  }

  if (const auto truth = load_optional(dir / "truth.csv"); truth && !spans.empty()) {
    const int c_t = truth->col("t");
    const int c_roll = truth->col("roll_deg");
    const int c_pitch = truth->col("pitch_deg");
    for (size_t i = 0; i < truth->rows.size(); ++i) {
      if (!inside_any(spans, truth->num(i, c_t))) continue;
      m.max_roll_deg = std::max(m.max_roll_deg, std::abs(truth->num(i, c_roll)));
      m.max_pitch_deg = std::max(m.max_pitch_deg, std::abs(truth->num(i, c_pitch)));
    }
  }

  if (const auto est = load_optional(dir / "estimate.csv"); est && !est->rows.empty()) {
    const int c_v[3] = {est->col("vx"), est->col("vy"), est->col("vz")};
    const int c_tv[3] = {est->col("truth_vx"), est->col("truth_vy"), est->col("truth_vz")};
    const int c_contact = est->col("contact");
    std::vector<double> per_axis[3], along_contact;
    for (size_t i = 0; i < est->rows.size(); ++i) {
      Vec3 e;
      for (int a = 0; a < 3; ++a) {
        e[a] = est->num(i, c_v[a]) - est->num(i, c_tv[a]);
        per_axis[a].push_back(e[a]);
      }
      if (est->num(i, c_contact) != 0) along_contact.push_back(contact_axis.dot(e));
    }
    for (int a = 0; a < 3; ++a) m.vel_axis[a] = series_stats(per_axis[a]);
    if (!along_contact.empty()) m.vel_contact = series_stats(along_contact);
  }

  if (const auto servo = load_optional(dir / "servo.csv"); servo && !servo->rows.empty()) {
    const int c_valid = servo->col("valid");
    const int c_align = servo->col("align_err_m");
    const int c_er = servo->col("e_r_px");
    std::vector<double> align, scale;
    for (size_t i = 0; i < servo->rows.size(); ++i) {
      if (servo->num(i, c_valid) == 0) continue;
      align.push_back(servo->num(i, c_align));
      scale.push_back(servo->num(i, c_er));
    }
    if (!align.empty()) {
      m.align_err_m = series_stats(align);
      m.scale_err_px = series_stats(scale);
    }
  }

  m.force_held = m.hold_start_t >= 0 && m.force_in_band_fraction >= 0.95 &&
                 m.force_final10_mean_N &&
                 std::abs(*m.force_final10_mean_N - m.reference_force_N) <= 0.3;
  m.success = !m.diverged && m.contact_achieved && m.insertion_hit && m.force_held;
  return m;
}

void write_metrics(const RunMetrics& m, const std::string& log_dir) {
  const fs::path dir(log_dir);
  CsvWriter out((dir / "metrics.csv").string(),
                {"scenario", "seed", "duration_s", "reference_force_N", "success", "diverged",
                 "contact_achieved", "first_contact_t", "insertion_hit", "insertion_offset_m",
                 "hold_start_t", "hold_duration_s", "force_in_band_fraction",
                 "force_final10_mean_N", "force_rmse_N", "force_mean_abs_N", "force_max_abs_N",
                 "force_std_abs_N", "max_roll_deg", "max_pitch_deg", "vel_contact_n",
                 "vel_contact_rmse", "vel_contact_mean_abs", "vel_contact_max_abs",
                 "vel_contact_std_abs", "vel_x_rmse", "vel_y_rmse", "vel_z_rmse", "align_rmse_m",
                 "scale_rmse_px"});
  std::vector<std::string> cells{
      m.scenario,
      std::to_string(m.seed),
      csv_num(m.duration_s),
      csv_num(m.reference_force_N),
      m.success ? "1" : "0",
      m.diverged ? "1" : "0",
      m.contact_achieved ? "1" : "0",
      csv_num(m.first_contact_t),
      m.insertion_hit ? "1" : "0",
      csv_num(m.insertion_offset_m),
      csv_num(m.hold_start_t),
      csv_num(m.hold_duration_s),
      csv_num(m.force_in_band_fraction),
      opt_num(m.force_final10_mean_N),
      csv_num(m.force_err_N.rmse),
      csv_num(m.force_err_N.mean_abs),
      csv_num(m.force_err_N.max_abs),
      csv_num(m.force_err_N.std_abs),
      csv_num(m.max_roll_deg),
      csv_num(m.max_pitch_deg),
  };
  if (m.vel_contact) {
    cells.push_back(std::to_string(m.vel_contact->n));
    cells.push_back(csv_num(m.vel_contact->rmse));
    cells.push_back(csv_num(m.vel_contact->mean_abs));
    cells.push_back(csv_num(m.vel_contact->max_abs));
    cells.push_back(csv_num(m.vel_contact->std_abs));
  } else {
    for (int i = 0; i < 5; ++i) cells.emplace_back("n/a");
  }
  for (int a = 0; a < 3; ++a) {
    cells.push_back(m.vel_axis[a] ? csv_num(m.vel_axis[a]->rmse) : std::string("n/a"));
  }
  cells.push_back(m.align_err_m ? csv_num(m.align_err_m->rmse) : std::string("n/a"));
  cells.push_back(m.scale_err_px ? csv_num(m.scale_err_px->rmse) : std::string("n/a"));
  out.row(cells);
  out.close();

  std::ofstream txt(dir / "metrics.txt");
  if (!txt) throw ConfigError("metrics: cannot write metrics.txt under " + log_dir);
  txt << render_metrics_text(m);
}

std::string render_metrics_text(const RunMetrics& m) {
  std::string s;
  s += "scenario: " + m.scenario + "  seed: " + std::to_string(m.seed) +
       "  duration: " + fmt4(m.duration_s) + " s\n";
  s += "outcome: ";
  s += m.success ? "SUCCESS" : "FAILURE";
  if (m.diverged) s += " (numerical divergence)";
  s += '\n';
  if (m.contact_achieved) {
    char line[160];
    std::snprintf(line, sizeof(line),
                  "contact: first at %.3f s, tip offset %.1f mm (%s the hole radius)\n",
                  m.first_contact_t, m.insertion_offset_m * 1e3,
                  m.insertion_hit ? "inside" : "outside");
    s += line;
  } else {
    s += "contact: never touched the wall\n";
  }
  if (m.hold_start_t >= 0) {
    char line[200];
    std::snprintf(line, sizeof(line),
                  "force hold: start %.3f s, %.3f s in hold, in-band(+/-1 N) %.2f%%\n",
                  m.hold_start_t, m.hold_duration_s, 100.0 * m.force_in_band_fraction);
    s += line;
    if (m.force_final10_mean_N) {
      std::snprintf(line, sizeof(line), "final-10s mean force: %.4f N (reference %.4f N)\n",
                    *m.force_final10_mean_N, m.reference_force_N);
      s += line;
    } else {
      s += "final-10s mean force: n/a (hold shorter than 10 s)\n";
    }
    s += "force error [N]:             rmse    mean     max     std\n";
    std::optional<SeriesStats> fe = m.force_err_N;
    txt_stats_row(s, "                         ", fe);
    std::snprintf(line, sizeof(line), "attitude during hold: |roll| <= %.4f deg, |pitch| <= %.4f deg\n",
                  m.max_roll_deg, m.max_pitch_deg);
    s += line;
  } else {
    s += "force hold: never entered\n";
  }
  s += "velocity estimation error during contact, contact axis [m/s]:\n";
  s += "                             rmse    mean     max     std\n";
  txt_stats_row(s, "                         ", m.vel_contact);
  s += "velocity rmse per world axis [m/s]: ";
  for (int a = 0; a < 3; ++a) {
    s += m.vel_axis[a] ? fmt4(m.vel_axis[a]->rmse) : std::string("n/a");
    s += a < 2 ? "  " : "\n";
  }
  s += "visual alignment rmse [m]: ";
  s += m.align_err_m ? fmt4(m.align_err_m->rmse) : std::string("n/a");
  s += "   scaling rmse [px]: ";
  s += m.scale_err_px ? fmt4(m.scale_err_px->rmse) : std::string("n/a");
  s += '\n';
  return s;
}

int emit_plots(const std::string& log_dir, bool quiet) {
  const fs::path dir(log_dir);
  const fs::path pdir = dir / "plots";
  fs::create_directories(pdir);
  int written = 0;
  const auto skip = [&](const char* src, const char* panel) {
    if (!quiet) std::fprintf(stderr, "plots: %s missing, skipping %s\n", src, panel);
  };

  if (const auto ft = load_optional(dir / "ft.csv")) {
    double f_ref = 0;
    if (const auto info = load_optional(dir / "run_info.csv"); info && !info->rows.empty()) {
      f_ref = info->num(0, info->col("reference_force_N"));
    }
    CsvWriter w((pdir / "force.csv").string(), {"t", "F_measured_N", "F_reference_N"});
    const int c_t = ft->col("t"), c_f = ft->col("normal_N");
    for (size_t i = 0; i < ft->rows.size(); ++i) {
      w.num_row(ft->num(i, c_t), {ft->num(i, c_f), f_ref});
    }
    ++written;
  } else {
    skip("ft.csv", "force");
  }

  if (const auto servo = load_optional(dir / "servo.csv")) {
    CsvWriter a((pdir / "alignment.csv").string(), {"t", "e_u_px", "e_v_px", "align_err_m"});
    CsvWriter sc((pdir / "scaling.csv").string(), {"t", "e_r_px", "depth_m"});
    const int c_t = servo->col("t"), c_valid = servo->col("valid");
    const int c_eu = servo->col("e_u_px"), c_ev = servo->col("e_v_px");
    const int c_er = servo->col("e_r_px"), c_d = servo->col("depth_m");
    const int c_al = servo->col("align_err_m");
    for (size_t i = 0; i < servo->rows.size(); ++i) {
      if (servo->num(i, c_valid) == 0) continue;
      const double t = servo->num(i, c_t);
      a.num_row(t, {servo->num(i, c_eu), servo->num(i, c_ev), servo->num(i, c_al)});
      sc.num_row(t, {servo->num(i, c_er), servo->num(i, c_d)});
    }
    written += 2;
  } else {
    skip("servo.csv", "alignment+scaling");
  }

  if (const auto truth = load_optional(dir / "truth.csv")) {
    CsvWriter w((pdir / "attitude.csv").string(), {"t", "roll_deg", "pitch_deg", "yaw_deg"});
    const int c_t = truth->col("t");
    const int c_r = truth->col("roll_deg"), c_p = truth->col("pitch_deg"),
              c_y = truth->col("yaw_deg");
    for (size_t i = 0; i < truth->rows.size(); ++i) {
      w.num_row(truth->num(i, c_t), {truth->num(i, c_r), truth->num(i, c_p), truth->num(i, c_y)});
    }
    ++written;
  } else {
    skip("truth.csv", "attitude");
  }

  if (const auto est = load_optional(dir / "estimate.csv")) {
    CsvWriter w((pdir / "velocity.csv").string(),
                {"t", "truth_vx", "truth_vy", "truth_vz", "est_vx", "est_vy", "est_vz"});
    const int c_t = est->col("t");
    const int c_v[3] = {est->col("vx"), est->col("vy"), est->col("vz")};
    const int c_tv[3] = {est->col("truth_vx"), est->col("truth_vy"), est->col("truth_vz")};
    for (size_t i = 0; i < est->rows.size(); ++i) {
      w.num_row(est->num(i, c_t),
                {est->num(i, c_tv[0]), est->num(i, c_tv[1]), est->num(i, c_tv[2]),
                 est->num(i, c_v[0]), est->num(i, c_v[1]), est->num(i, c_v[2])});
    }
    ++written;
  } else {
    skip("estimate.csv", "velocity");
  }

  if (const auto fb = load_optional(dir / "feedback.csv")) {
    CsvWriter w((pdir / "velocity_feedback.csv").string(),
                {"t", "fb_vx", "fb_vy", "fb_vz", "truth_vx", "truth_vy", "truth_vz"});
    const int c_t = fb->col("t");
    const int c_f[3] = {fb->col("fb_vx"), fb->col("fb_vy"), fb->col("fb_vz")};
    const int c_v[3] = {fb->col("truth_vx"), fb->col("truth_vy"), fb->col("truth_vz")};
    for (size_t i = 0; i < fb->rows.size(); ++i) {
      w.num_row(fb->num(i, c_t), {fb->num(i, c_f[0]), fb->num(i, c_f[1]), fb->num(i, c_f[2]),
                                  fb->num(i, c_v[0]), fb->num(i, c_v[1]), fb->num(i, c_v[2])});
    }
    ++written;
  } else {
    skip("feedback.csv", "velocity_feedback");
  }

  if (const auto control = load_optional(dir / "control.csv")) {
    CsvWriter w((pdir / "phase.csv").string(), {"t", "phase", "phase_id", "lambda"});
    const int c_t = control->col("t"), c_ph = control->col("phase"),
              c_l = control->col("lambda");
    for (size_t i = 0; i < control->rows.size(); ++i) {
      const std::string& ph = control->cell(i, c_ph);
      const int id = ph == "approach" ? 0 : (ph == "transition" ? 1 : 2);
      w.row({csv_time(control->num(i, c_t)), ph, std::to_string(id),
             csv_num(control->num(i, c_l))});
    }
    ++written;
  } else {
    skip("control.csv", "phase");
  }
  return written;
}

std::optional<double> ablation_improvement(const RunMetrics& on, const RunMetrics& off) {
  if (!on.vel_contact || !off.vel_contact) return std::nullopt;
  const double a = on.vel_contact->rmse, b = off.vel_contact->rmse;
  if (a == b) return 0.0;  // covers identical runs, including rmse 0 vs 0
  if (b == 0) return std::nullopt;
  return (1.0 - a / b) * 100.0;
}

void write_ablation(const RunMetrics& on, const RunMetrics& off, const std::string& out_dir) {
  const fs::path dir(out_dir);
  const std::optional<double> imp = ablation_improvement(on, off);

  CsvWriter out((dir / "ablation.csv").string(),
                {"scenario", "seed", "on_n", "on_rmse", "on_mean_abs", "on_max_abs", "on_std_abs",
                 "off_n", "off_rmse", "off_mean_abs", "off_max_abs", "off_std_abs",
                 "improvement_pct"});
  const auto block = [](const std::optional<SeriesStats>& s) {
    std::vector<std::string> cells;
    if (s) {
      cells = {std::to_string(s->n), csv_num(s->rmse), csv_num(s->mean_abs), csv_num(s->max_abs),
               csv_num(s->std_abs)};
    } else {
      cells = {"n/a", "n/a", "n/a", "n/a", "n/a"};
    }
    return cells;
  };
  std::vector<std::string> cells{on.scenario, std::to_string(on.seed)};
  for (const auto& c : block(on.vel_contact)) cells.push_back(c);
  for (const auto& c : block(off.vel_contact)) cells.push_back(c);
  cells.push_back(opt_num(imp));
  out.row(cells);
  out.close();

  std::string s;
  s += "scenario: " + on.scenario + "  seed: " + std::to_string(on.seed) + "\n";
  s += "velocity estimation error during contact, contact axis [m/s]\n";
  s += "  variant                    rmse    mean     max     std\n";
  txt_stats_row(s, "contact factors on   ", on.vel_contact);
  txt_stats_row(s, "contact factors off  ", off.vel_contact);
  if (imp) {
    s += "  rmse improvement on vs off: " + fmt4(*imp) + "%\n";
  } else {
    s += "  rmse improvement on vs off: n/a\n";
  }
  std::ofstream txt(dir / "ablation.txt");
  if (!txt) throw ConfigError("metrics: cannot write ablation.txt under " + out_dir);
  txt << s;
}

}  // namespace amsim
