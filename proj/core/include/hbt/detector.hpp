#pragma once

#include <array>
#include <vector>

#include "hbt/model.hpp"

namespace hbt {

struct detector_spec {
  Vec3 d;                   // rms Gaussian resolution per axis, 0 = ideal
  double plane_height = 0.0;

  void validate() const;
};

struct gaussian_profile {
  double amplitude = 0.0;
  double width = 0.0;  // rms
};

struct gaussian_profile_3d {
  double amplitude = 0.0;
  Vec3 width;
};

// Convolution of a Gaussian profile with the Gaussian resolution kernel.
gaussian_profile observed_density(const gaussian_profile& ideal, double d);
gaussian_profile_3d observed_density(const gaussian_profile_3d& ideal, const detector_spec& det);

struct observed_bunching_result {
  double amplitude = 2.0;        // observed g2(0, 0)
  Vec3 lengths;                  // sqrt(l^2 + 4 d^2)
  double approximate_contrast = 1.0;  // prod over axes with l < 2d of l / (2d)
};

observed_bunching_result observed_bunching(const Vec3& cloud_widths, const Vec3& corr_lengths,
                                           const detector_spec& det);

struct detector_report {
  Vec3 cloud_widths;        // ideal rms widths at the detection time
  Vec3 observed_widths;
  Vec3 corr_lengths;        // ideal 1/e correlation lengths at the detection time
  observed_bunching_result bunching;
  bool extrapolated = false;  // z > 0.5: Gaussian model used outside its regime
};

// Widths and correlation lengths of a non-degenerate cloud after time t, seen
// through the detector.
detector_report detector_response(const thermal_state& state, const trap& tr, double t,
                                  const detector_spec& det);

// Cloud-averaged g2 along a unit direction e at scaled separation r~:
// int dR G2(R + r~ e, R) / int dR rho(R + r~ e) rho(R), term by term over the
// Bose double series.
double averaged_g2(const thermal_state& state, const trap& tr, double separation, const Vec3& direction,
                   series_report* report = nullptr);

// Many separations at once; shares the node tables.
std::vector<double> averaged_g2_scan(const thermal_state& state, const trap& tr,
                                     const std::vector<double>& separations, const Vec3& direction,
                                     int threads = 1, series_report* report = nullptr);

}  // namespace hbt
