#pragma once

#include <array>
#include <string>

#include "hbt/expansion.hpp"

namespace hbt {

// sum_n psi0_n(x) psi0_n(x') e^{-n u}, Re(u) > 0.
complex kernel_gu(double x, double x_prime, complex u, double sigma = 1.0);

enum class sqrt_variant {
  lower,  // sum sqrt(n) psi0_{n-1}(x) psi0_n(x') e^{-n u}
  upper,  // sum sqrt(n) psi0_n(x) psi0_{n-1}(x') e^{-n u}
};

complex sqrt_series(double x, double x_prime, complex u, sqrt_variant variant, double sigma = 1.0);

// sum n psi0_{n-1}(x) psi0_{n-1}(x') e^{-n u} = e^{-u} (g_u - d g_u / du)
complex n_series(double x, double x_prime, complex u, double sigma = 1.0);

// Product of the three one-dimensional kernels.
complex g1b_3d(const trap& tr, const pair_point& scaled, const std::array<complex, 3>& u);

// sum_l z^l G_B(r, r', l tau - i Delta) including its condensate asymptote.
series_result<complex> bose_g1b_sum(const thermal_state& state, const trap& tr,
                                    const pair_point& scaled, const Vec3& delta);

struct flux_options {
  bool conjugate_path = false;  // build the l-sums at l tau + i Delta and conjugate
  bool single_term = false;     // keep only l = 1 (non-degenerate shortcut)
};

struct flux_terms {
  std::array<complex, 5> t{};
  double mean_flux = 0.0;
  double mean_flux_prime = 0.0;
  double ground_correction = 0.0;  // v2 v2' Pi rho0 rho0'
  double total = 0.0;              // Re(T1 + ... + T5)
  double excess = 0.0;             // (Re sum T - ground) / (<I><I'>), evaluated without cancellation
  series_report report;
};

flux_terms compute_flux_terms(const thermal_state& state, const trap& tr, double t, double t_prime,
                              const pair_point& pair, const flux_options& options = {});

struct shot_noise_record {
  double weight = 0.0;  // coefficient of delta(r~ - r~') at equal times
  Vec3 location;        // scaled support point r~
  bool equal_time = true;
};

shot_noise_record shot_noise_expanded(const thermal_state& state, const trap& tr, double t,
                                      const pair_point& pair);

struct flux_correlation {
  double g2 = 0.0;
  double leading = 0.0;             // T1-only correlator
  double deviation_from_two = 0.0;  // g2 - 2
  double higher_order = 0.0;        // Re(T2 + ... + T5) / (<I><I'>)
  flux_terms terms;
  shot_noise_record shot_noise;
};

flux_correlation g2_flux_exact(const thermal_state& state, const trap& tr, double t,
                               double t_prime, const pair_point& pair,
                               const flux_options& options = {});

struct epsilon_estimate {
  double value = 0.0;
  double coincident_part = 0.0;  // (1/8)(s_z/H)^2 [1 - (t + t' - 2 t0)/t0](1 - tau_z^2/6)
  double separation_part = 0.0;  // 3/(2 (omega_z t0 tau_z)^2) ((t - t')/t0)^2 (1 + tau_z/3)
  double envelope_factor = 1.0;  // effective t_coh over l^(t) omega_z / g
  bool valid = true;
  std::string warning;
};

// Asymptotic correction to the leading flux correlator, valid for |t - t0|, |t' - t0| << t0
// in the non-degenerate regime. Neglects orders tau_z^3 and cubic time offsets.
epsilon_estimate epsilon_correction(const thermal_state& state, const trap& tr, double t,
                                    double t_prime);

// v2 rho and the v3 piece of the mode-summed mean flux, both from closed forms.
struct mean_flux_parts {
  double v2_term = 0.0;
  double v3_term = 0.0;
  double total() const { return v2_term + v3_term; }
};

mean_flux_parts mean_flux_literal(const thermal_state& state, const trap& tr, double t,
                                  const Vec3& r);

}  // namespace hbt
