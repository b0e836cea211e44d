#pragma once

#include <functional>
#include <vector>

#include "hbt/model.hpp"

namespace hbt {

struct pair_point {
  Vec3 r;
  Vec3 r_prime;
};

// psi_0(r) psi_0(r'), the l -> infinity limit of every one-body kernel.
double ground_mode_product(const trap& tr, const Vec3& r, const Vec3& r_prime);

// sum_l z^l [G_B(r, r', l tau) - psi_0(r) psi_0(r')], i.e. G1 minus its condensate part.
series_result<double> excited_g1(const thermal_state& state, const trap& tr, const Vec3& r,
                                 const Vec3& r_prime);

double density_eq(const thermal_state& state, const trap& tr, const Vec3& r,
                  series_report* report = nullptr);

double g1_eq(const thermal_state& state, const trap& tr, const pair_point& pair,
             series_report* report = nullptr);

double ground_state_density(const thermal_state& state, const trap& tr, const Vec3& r);

// Normalized rho rho' + |G1|^2 - rho0 rho0' over rho rho'. Shot noise excluded.
double g2_eq(const thermal_state& state, const trap& tr, const pair_point& pair,
             series_report* report = nullptr);

// Unnormalized G2 and the densities entering its normalization.
struct g2_parts {
  double g2_unnormalized;
  double density;
  double density_prime;
};

g2_parts g2_eq_parts(const thermal_state& state, const trap& tr, const pair_point& pair,
                     series_report* report = nullptr);

struct decay_extraction {
  std::vector<double> separations;
  std::vector<double> values;
  double peak_amplitude = 0.0;
  double corr_length = 0.0;
  bool monotone = true;
};

// 1/e length of g2(s) - 1 on [0, span] sampled at `samples` points; the crossing
// is refined by bisection. Throws flat_profile_error when g2(0) <= 1 + 1e-6.
decay_extraction extract_decay_length(const std::function<double(double)>& g2_of_separation,
                                      double span, int samples = 81, int threads = 1);

struct correlation_profile {
  Vec3 center;
  Vec3 direction;
  std::vector<double> separations;
  std::vector<double> values;
  double peak_amplitude = 0.0;
  double corr_length = 0.0;
  bool monotone = true;
  series_report report;
};

// g2_eq(center + s e, center) for s in [0, span].
correlation_profile make_correlation_profile(const thermal_state& state, const trap& tr,
                                             const Vec3& center, const Vec3& direction,
                                             double span, int samples = 81, int threads = 1);

}  // namespace hbt
