#include "amsim/contact_detector.hpp"

#include "amsim/errors.hpp"

namespace amsim {

ContactDetector::ContactDetector(const ContactDetectorConfig& cfg) : cfg_(cfg) {
  if (!(cfg.f_on > cfg.f_off) || cfg.f_off < 0) {
    throw ConfigError("contact detector: need f_on > f_off >= 0");
  }
  if (cfg.dwell_s < 0) throw ConfigError("contact detector: dwell must be >= 0");
}

bool ContactDetector::update(const FtSample& s) {
  const double f = scalar_force(s);
  const double t = s.t;

  if (f >= cfg_.f_on) {
    if (above_since_ < 0) above_since_ = t;
  } else {
    above_since_ = -1;
  }
  if (f <= cfg_.f_off) {
    if (below_since_ < 0) below_since_ = t;
  } else {
    below_since_ = -1;
  }

  if (!active_ && above_since_ >= 0 && t - above_since_ >= cfg_.dwell_s - 1e-9) {
    active_ = true;
  } else if (active_ && below_since_ >= 0 && t - below_since_ >= cfg_.dwell_s - 1e-9) {
    active_ = false;
  }
  return active_;
}

}  // namespace amsim
