#pragma once

#include <vector>

#include "amsim/geometry.hpp"

namespace amsim {

struct ImuSample {
  double t = 0;
  Vec3 specific_force_B = Vec3::Zero();  // accelerometer, m/s^2
  Vec3 angular_rate_B = Vec3::Zero();    // gyro, rad/s
};

struct FtSample {
  double t = 0;
  Vec3 force_S = Vec3::Zero();   // N, sensor frame
  Vec3 torque_S = Vec3::Zero();  // N m, sensor frame
};

struct LandmarkPixel {
  long id = -1;
  double u = 0, v = 0;  // absolute pixels
  bool valid = false;
};

/// Projection of the circular visual target (outer ring of the hole fixture).
struct CircleObservation {
  double u = 0, v = 0;      // centroid, absolute pixels
  double radius_px = 0;     // equivalent radius sqrt(area/pi)
  double area_px2 = 0;
  bool valid = false;
};

struct CameraObservation {
  double t = 0;
  std::vector<LandmarkPixel> landmarks;
  CircleObservation circle;
};

struct PinholeIntrinsics {
  double fx = 500, fy = 500;
  double cx = 320, cy = 240;
  int width = 640, height = 480;
};

struct ImuNoiseParams {
  double acc_sigma = 0.02;        // m/s^2 per sample
  double gyro_sigma = 0.002;      // rad/s per sample
  double acc_bias_walk = 0.0005;  // m/s^2 / sqrt(s)
  double gyro_bias_walk = 5e-5;   // rad/s / sqrt(s)
  Vec3 acc_bias0 = Vec3::Zero();
  Vec3 gyro_bias0 = Vec3::Zero();
};

struct FtNoiseParams {
  double force_sigma = 0.1;    // N per axis per sample
  double torque_sigma = 0.01;  // N m per axis per sample
};

struct CameraNoiseParams {
  double pixel_sigma = 1.0;        // landmark centroids, px
  double circle_px_sigma = 0.3;    // circle centroid, px
  double circle_area_rel_sigma = 0.01;
};

}  // namespace amsim
