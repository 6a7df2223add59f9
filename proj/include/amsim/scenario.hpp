#pragma once

#include <cstdint>
#include <string>

#include "amsim/control.hpp"
#include "amsim/estimator.hpp"
#include "amsim/ibvs.hpp"
#include "amsim/sim.hpp"

namespace amsim {

/// Velocity signal handed to the controller: simulator truth (optionally with
/// injected uniform noise, mirroring the robustness protocol) or the
/// propagated estimator state.
enum class FeedbackSource { Truth, Estimator };

struct ScenarioRates {
  int physics_hz = 1000;
  int imu_hz = 200;
  int ft_hz = 200;
  int camera_hz = 10;
  int control_hz = 250;
};

/// Complete description of one closed-loop experiment. Field defaults form a
/// flyable configuration; the JSON files override them and anything they do
/// not mention stays at these values.
struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  double duration_s = 60.0;

  ScenarioRates rates;

  Vec3 start_position_W = Vec3(0.35, 0.0, 1.5);
  double start_yaw_rad = 0.0;
  // hover on a zero twist command while the estimator bootstraps; feedback
  // falls back to truth until both this hold and the bootstrap have finished
  double init_hold_s = 0.6;

  FeedbackSource feedback = FeedbackSource::Truth;
  Vec3 velocity_noise_bounds = Vec3::Zero();  // uniform +/- per axis [m/s]

  VehicleParams vehicle;
  SimOptions sim;
  WallModel wall;
  LandmarkFieldParams landmarks;

  ImuNoiseParams imu_noise;
  FtNoiseParams ft_noise;
  CameraNoiseParams camera_noise;

  bool estimator_enabled = true;
  EstimatorConfig estimator;
  ServoConfig servo;
  HybridConfig control;

  Scenario();

  /// Scenario-level consistency (rates divide evenly, names present, bounds
  /// non-negative, sub-configs coherent). Throws ConfigError.
  void validate() const;
};

/// Parses a scenario JSON file. Fail-closed: any key the schema does not
/// define is rejected with its path, and schema_version must match.
Scenario load_scenario(const std::string& path);

/// Same, from an already-loaded JSON text (origin only labels errors).
Scenario parse_scenario_text(const std::string& text, const std::string& origin);

}  // namespace amsim
