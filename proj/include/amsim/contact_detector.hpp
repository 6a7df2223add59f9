#pragma once

#include "amsim/geometry.hpp"
#include "amsim/sensors.hpp"

namespace amsim {

struct ContactDetectorConfig {
  Vec3 axis_S = Vec3(-1, 0, 0);  // direction the wall reaction takes in the sensor frame
  double f_on = 2.0;             // N, must be exceeded for `dwell_s` to switch on
  double f_off = 0.5;            // N, must be undershot for `dwell_s` to switch off
  double dwell_s = 0.05;
};

/// Threshold detector with hysteresis and dwell. Between f_off and f_on the
/// state holds; short spikes are absorbed by the dwell requirement.
class ContactDetector {
 public:
  explicit ContactDetector(const ContactDetectorConfig& cfg);

  double scalar_force(const FtSample& s) const { return cfg_.axis_S.dot(s.force_S); }

  /// Feed one sample; returns the (possibly new) contact state.
  bool update(const FtSample& s);

  bool active() const { return active_; }

 private:
  ContactDetectorConfig cfg_;
  bool active_ = false;
  double above_since_ = -1;  // start of the current >= f_on streak, -1 when broken
  double below_since_ = -1;
};

}  // namespace amsim
