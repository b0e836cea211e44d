#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "hbt/equilibrium.hpp"

namespace hbt {

inline constexpr int hermite_max_order = 5000;

// Normalized oscillator eigenfunction psi0_n(x) of width sigma, evaluated with the
// normalized three-term recurrence and a running exponent so that neither H_n
// nor the Gaussian factor overflows or underflows.
double hermite_fn(int n, double x, double sigma = 1.0);

// psi0_0(x) ... psi0_n(x).
std::vector<double> hermite_table(int n, double x, double sigma = 1.0);

namespace oracle {

struct truncation_spec {
  std::array<int, 3> n_max{};  // highest quantum number kept per axis
  double tail_bound = 0.0;     // bound on the omitted occupation weight

  // Smallest per-axis cutoffs whose tail bound is below `tolerance`.
  static truncation_spec for_tolerance(const thermal_state& state, double tolerance);
};

// sum over modes outside the box of z e^{-eps_j} / (1 - z), an upper bound on the
// omitted occupation.
double occupation_tail_bound(const thermal_state& state, const std::array<int, 3>& n_max);

double bose_occupation(const thermal_state& state, const mode_index& j);

using occupation_fn = std::function<double(const mode_index&)>;

double brute_g1(const thermal_state& state, const trap& tr, const pair_point& pair,
                const truncation_spec& trunc, const occupation_fn& occupation = {});
double brute_density(const thermal_state& state, const trap& tr, const Vec3& r,
                     const truncation_spec& trunc);
double brute_ground_density(const thermal_state& state, const trap& tr, const Vec3& r);
double brute_g2(const thermal_state& state, const trap& tr, const pair_point& pair,
                const truncation_spec& trunc);

// One-dimensional Hermite series summed mode by mode up to n_max.
complex brute_kernel_gu(double x, double x_prime, complex u, double sigma, int n_max);
complex brute_sqrt_series_lower(double x, double x_prime, complex u, double sigma, int n_max);
complex brute_sqrt_series_upper(double x, double x_prime, complex u, double sigma, int n_max);
complex brute_n_series(double x, double x_prime, complex u, double sigma, int n_max);
complex brute_g1b_3d(const trap& tr, const pair_point& scaled, const std::array<complex, 3>& u,
                     int n_max);

struct brute_flux_terms_result {
  std::array<complex, 5> t{};
  double mean_flux = 0.0;
  double mean_flux_prime = 0.0;
  double ground_correction = 0.0;
};

// The five pieces of the flux-flux Wick contraction from mode sums of propagated
// eigenfunctions (one-body sums G, S1, S2, N with the velocity prefactors).
brute_flux_terms_result brute_flux_terms(const thermal_state& state, const trap& tr, double t,
                                         double t_prime, const pair_point& pair,
                                         const truncation_spec& trunc);

struct flux_corr_options {
  bool drop_v3 = false;  // keep only the v2 part of the flux matrix elements
};

struct brute_flux_corr_result {
  double correlator = 0.0;  // <I I'> without the shot-noise delta
  double mean_flux = 0.0;
  double mean_flux_prime = 0.0;
  double g2() const { return correlator / (mean_flux * mean_flux_prime); }
};

// Literal double sum over modes of n_j n_k F_jk F'_kj with the flux matrix elements
// F_jk = Im-part of psi_j* d_z psi_k built from propagated modes and their
// derivatives; the ground-state double counting n_0^2 F_00 F'_00 is removed.
brute_flux_corr_result brute_flux_corr(const thermal_state& state, const trap& tr, double t,
                                       double t_prime, const pair_point& pair,
                                       const truncation_spec& trunc,
                                       const flux_corr_options& options = {});

// Mode sum of n_j Im(psi_j* d_z psi_j): the mean flux without using the cancellation.
double brute_mean_flux(const thermal_state& state, const trap& tr, double t, const Vec3& r,
                       const truncation_spec& trunc);

struct propagation_result {
  std::vector<complex> values;
  std::vector<double> error_estimates;
  double max_error = 0.0;
};

// Numerical propagation of the 1D eigenfunction n with the free-fall propagator
// K = (2 pi i t)^{-1/2} e^{i (x - x0)^2 / 2t} e^{i g t (x + x0) / 2} e^{-i g^2 t^3 / 24}.
propagation_result quad_propagate(double omega, double gravity, int n, double t,
                                  const std::vector<double>& grid);

struct mc_estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
};

// Monte Carlo version of the cloud-averaged g2: importance sampling of R from a
// Gaussian as wide as the l = 1 density term, ratio estimator with a
// delta-method standard error. Deterministic for a given seed and any thread count.
mc_estimate mc_averaged_g2(const thermal_state& state, const trap& tr, double separation,
                           const Vec3& direction, std::int64_t samples, std::uint64_t seed,
                           int threads = 1);

}  // namespace oracle
}  // namespace hbt
