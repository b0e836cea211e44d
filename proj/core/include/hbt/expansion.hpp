#pragma once

#include "hbt/equilibrium.hpp"

namespace hbt {

// Rescaling after release at t = 0. The trap centre is the origin, gravity
// points along +z and the detection plane sits at z = drop_height.
struct scaled_frame {
  double t = 0.0;
  Vec3 dilation = uniform(1.0);  // sqrt(1 + omega^2 t^2)
  Vec3 delta = uniform(M_PI / 2);  // atan(1 / omega t)
  double fall = 0.0;             // g t^2 / 2

  Vec3 map(const Vec3& r) const;
  double volume_factor() const { return dilation.product(); }
};

scaled_frame make_scaled_frame(const trap& tr, double t);

Vec3 scaled_coords(const trap& tr, double t, const Vec3& r);

struct flux_velocities {
  double v1 = 0.0;
  double v2 = 0.0;
  complex v3;
};

// Velocities of the z-derivative of an evolved mode at height z (default: the
// detection plane).
flux_velocities velocities_at(const trap& tr, double t, double z);
flux_velocities velocities(const trap& tr, double t);

struct phase_spec {
  double phi = 0.0;  // global phase of the evolved wavefunction at (r, t)
  double c = 0.0;    // g^2 t^3 / 24
};

phase_spec global_phase(const trap& tr, double t, const Vec3& r);

struct mode_phase_options {
  bool global_phase = true;
  bool gravity_constant = true;
};

// Evolved eigenfunction psi_j(r, t) from its closed form.
complex propagate_mode(const trap& tr, const mode_index& j, double t, const Vec3& r,
                       const mode_phase_options& options = {});

// One axis of propagate_mode; `gravity` is non-zero only for the vertical axis.
complex propagate_mode_1d(double omega, double gravity, int n, double t, double x,
                          const mode_phase_options& options = {});

double mean_density_t(const thermal_state& state, const trap& tr, double t, const Vec3& r,
                      series_report* report = nullptr);

double mean_flux(const thermal_state& state, const trap& tr, double t, const Vec3& r,
                 series_report* report = nullptr);

double g2_snapshot(const thermal_state& state, const trap& tr, double t, const pair_point& pair,
                   series_report* report = nullptr);

// Same quantity from the rescaled unnormalized G2 divided by the rescaled densities.
double g2_snapshot_unnormalized_path(const thermal_state& state, const trap& tr, double t,
                                     const pair_point& pair);

// Leading (T1 only) flux correlator between detection events at (x, y, H, t) and
// (x', y', H, t'). The pair's z components must equal the detection height.
double g2_flux_leading(const thermal_state& state, const trap& tr, double t, double t_prime,
                       const pair_point& pair, series_report* report = nullptr);

struct coherence_scales {
  Vec3 p_coh;               // hbar / s
  Vec3 l_detector;          // hbar t / (m s)
  Vec3 l_detector_scaling;  // l^(t) sqrt(1 + omega^2 t^2)
  double t_coh = 0.0;
  double detector_velocity = 0.0;  // v2 at the detection time
  bool gravity_free_estimate = false;
  bool degenerate = false;         // z > 0.5: l^(t) is position dependent
};

coherence_scales make_coherence_scales(const thermal_state& state, const trap& tr, double t);

// sqrt(2 H / g)
double fall_time(const trap& tr);

// Detection-plane pair for events at transverse positions (x, y) and (x', y').
pair_point plane_pair(const trap& tr, double x, double y, double x_prime, double y_prime);

}  // namespace hbt
