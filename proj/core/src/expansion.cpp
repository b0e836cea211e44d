#include "hbt/expansion.hpp"

#include <cmath>

#include "hbt/oracle.hpp"

namespace hbt {

Vec3 scaled_frame::map(const Vec3& r) const {
  return {r.x / dilation.x, r.y / dilation.y, (r.z - fall) / dilation.z};
}

scaled_frame make_scaled_frame(const trap& tr, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw domain_error("time must be non-negative");
  scaled_frame f;
  f.t = t;
  for (int a = 0; a < 3; ++a) {
    const double w = tr.omega[a] * t;
    f.dilation[a] = std::hypot(1.0, w);
    f.delta[a] = std::atan2(1.0, w);
  }
  f.fall = 0.5 * tr.gravity * t * t;
  return f;
}

Vec3 scaled_coords(const trap& tr, double t, const Vec3& r) {
  return make_scaled_frame(tr, t).map(r);
}

flux_velocities velocities_at(const trap& tr, double t, double z) {
  if (!(t >= 0.0)) throw domain_error("time must be non-negative");
  const double w = tr.omega.z;
  const double wt = w * t;
  const double d2 = 1.0 + wt * wt;
  const double height = z - 0.5 * tr.gravity * t * t;
  flux_velocities v;
  v.v1 = w * height / d2;
  // omega^2 t (z - g t^2/2) / (1 + omega^2 t^2) + g t: both pieces are O(t) for
  // small t, so the closed form needs no series branch.
  v.v2 = w * wt * height / d2 + tr.gravity * t;
  const double mod = std::sqrt(2.0) * w * tr.sigma(2) / std::sqrt(d2);
  const double delta = std::atan2(1.0, wt);
  v.v3 = std::polar(mod, delta);
  return v;
}

flux_velocities velocities(const trap& tr, double t) { return velocities_at(tr, t, tr.drop_height); }

phase_spec global_phase(const trap& tr, double t, const Vec3& r) {
  const auto f = make_scaled_frame(tr, t);
  const Vec3 s = f.map(r);
  phase_spec p;
  const double g = tr.gravity;
  p.c = g * g * t * t * t / 24.0;
  double phi = 0.0;
  for (int a = 0; a < 3; ++a) phi += 0.5 * tr.omega[a] * tr.omega[a] * t * s[a] * s[a];
  phi += g * t * (r.z - g * t * t / 8.0) - p.c;
  p.phi = phi;
  return p;
}

complex propagate_mode_1d(double omega, double gravity, int n, double t, double x,
                          const mode_phase_options& options) {
  if (n < 0) throw domain_error("mode index must be non-negative");
  if (!(t >= 0.0)) throw domain_error("time must be non-negative");
  const double sigma = 1.0 / std::sqrt(omega);
  const double wt = omega * t;
  const double d = std::hypot(1.0, wt);
  const double xs = (x - 0.5 * gravity * t * t) / d;
  const complex amp = std::pow(complex(1.0, wt), -0.5);
  double phase = -n * std::atan(wt);
  if (options.global_phase) {
    phase += 0.5 * omega * omega * t * xs * xs;
    if (gravity != 0.0) {
      phase += gravity * t * (x - gravity * t * t / 8.0);
      if (options.gravity_constant) phase -= gravity * gravity * t * t * t / 24.0;
    }
  }
  return amp * hermite_fn(n, xs, sigma) * std::polar(1.0, phase);
}

complex propagate_mode(const trap& tr, const mode_index& j, double t, const Vec3& r,
                       const mode_phase_options& options) {
  return propagate_mode_1d(tr.omega.x, 0.0, j.x, t, r.x, options) *
         propagate_mode_1d(tr.omega.y, 0.0, j.y, t, r.y, options) *
         propagate_mode_1d(tr.omega.z, tr.gravity, j.z, t, r.z, options);
}

double mean_density_t(const thermal_state& state, const trap& tr, double t, const Vec3& r,
                      series_report* report) {
  const auto f = make_scaled_frame(tr, t);
  return density_eq(state, tr, f.map(r), report) / f.volume_factor();
}

double mean_flux(const thermal_state& state, const trap& tr, double t, const Vec3& r,
                 series_report* report) {
  return velocities_at(tr, t, r.z).v2 * mean_density_t(state, tr, t, r, report);
}

double g2_snapshot(const thermal_state& state, const trap& tr, double t, const pair_point& pair,
                   series_report* report) {
  const auto f = make_scaled_frame(tr, t);
  return g2_eq(state, tr, {f.map(pair.r), f.map(pair.r_prime)}, report);
}

double g2_snapshot_unnormalized_path(const thermal_state& state, const trap& tr, double t,
                                     const pair_point& pair) {
  const auto f = make_scaled_frame(tr, t);
  const double v = f.volume_factor();
  const auto parts = g2_eq_parts(state, tr, {f.map(pair.r), f.map(pair.r_prime)});
  const double g2_t = parts.g2_unnormalized / (v * v);
  const double rho = mean_density_t(state, tr, t, pair.r);
  const double rho_prime = mean_density_t(state, tr, t, pair.r_prime);
  return g2_t / (rho * rho_prime);
}

namespace {

void require_plane(const trap& tr, const pair_point& pair) {
  const double h = tr.drop_height;
  const double tol = 1e-12 * std::max(1.0, std::abs(h));
  if (std::abs(pair.r.z - h) > tol || std::abs(pair.r_prime.z - h) > tol)
    throw domain_error("flux correlators are defined on the detection plane z = z' = H");
}

}  // namespace

double g2_flux_leading(const thermal_state& state, const trap& tr, double t, double t_prime,
                       const pair_point& pair, series_report* report) {
  if (!(t > 0.0) || !(t_prime > 0.0)) throw domain_error("detection times must be positive");
  require_plane(tr, pair);
  return g2_eq(state, tr, {scaled_coords(tr, t, pair.r), scaled_coords(tr, t_prime, pair.r_prime)},
               report);
}

double fall_time(const trap& tr) {
  if (!(tr.gravity > 0.0)) throw domain_error("fall time requires gravity > 0");
  return std::sqrt(2.0 * tr.drop_height / tr.gravity);
}

pair_point plane_pair(const trap& tr, double x, double y, double x_prime, double y_prime) {
  return {{x, y, tr.drop_height}, {x_prime, y_prime, tr.drop_height}};
}

coherence_scales make_coherence_scales(const thermal_state& state, const trap& tr, double t) {
  if (!(t >= 0.0)) throw domain_error("time must be non-negative");
  const Vec3 s = cloud_size(tr, state);
  const auto lt = thermal_wavelength(state);
  coherence_scales c;
  for (int a = 0; a < 3; ++a) {
    const double wt = tr.omega[a] * t;
    c.p_coh[a] = 1.0 / s[a];
    c.l_detector[a] = t / s[a];
    c.l_detector_scaling[a] = lt.correlation_length * std::hypot(1.0, wt);
  }
  c.degenerate = state.fugacity > 0.5;
  if (tr.gravity > 0.0) {
    c.t_coh = lt.correlation_length * tr.omega.z / tr.gravity;
    c.detector_velocity = velocities(tr, t).v2;
  } else {
    // order-of-magnitude estimate: arrival at the thermal velocity
    const double v_thermal = std::sqrt(state.temperature);
    const double t0 = tr.drop_height / v_thermal;
    c.t_coh = lt.wavelength * tr.omega.z * t0 / v_thermal;
    c.detector_velocity = v_thermal;
    c.gravity_free_estimate = true;
  }
  return c;
}

}  // namespace hbt
