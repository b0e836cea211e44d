#pragma once

#include "hbt/series.hpp"
#include "hbt/types.hpp"

namespace hbt {

namespace si {
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double k_boltzmann = 1.380649e-23;  // J / K
inline constexpr double atomic_mass = 1.66053906660e-27;  // kg
inline constexpr double standard_gravity = 9.80665;  // m / s^2
}  // namespace si

// Trap and detection geometry in SI units.
struct trap_spec {
  Vec3 omega;          // rad / s
  double mass = 0.0;   // kg
  double gravity = 0;  // m / s^2, along +z (pointing down, towards the detector)
  double drop_height = 0.0;  // m, detector plane below the trap centre

  void validate() const;
};

// hbar = m = k_B = 1 with omega_ref the geometric mean of the trap frequencies.
class natural_units {
 public:
  explicit natural_units(const trap_spec& spec);

  double omega_ref() const { return omega_ref_; }
  double length_scale() const { return length_; }  // m
  double energy_scale() const { return energy_; }  // J
  double time_scale() const { return time_; }      // s
  double temperature_scale() const { return energy_ / si::k_boltzmann; }  // K
  double velocity_scale() const { return length_ / time_; }
  double acceleration_scale() const { return length_ / (time_ * time_); }

  double length_to_natural(double m) const { return m / length_; }
  double length_to_si(double v) const { return v * length_; }
  double time_to_natural(double s) const { return s / time_; }
  double time_to_si(double v) const { return v * time_; }
  double temperature_to_natural(double kelvin) const { return kelvin / temperature_scale(); }
  double temperature_to_si(double v) const { return v * temperature_scale(); }
  double frequency_to_natural(double rad_per_s) const { return rad_per_s * time_; }
  double frequency_to_si(double v) const { return v / time_; }
  double velocity_to_natural(double m_per_s) const { return m_per_s / velocity_scale(); }
  double velocity_to_si(double v) const { return v * velocity_scale(); }
  double acceleration_to_natural(double a) const { return a / acceleration_scale(); }
  double acceleration_to_si(double v) const { return v * acceleration_scale(); }

 private:
  double omega_ref_;
  double length_;
  double energy_;
  double time_;
};

// Trap in natural units. All physics routines take this form.
struct trap {
  Vec3 omega = uniform(1.0);
  double gravity = 0.0;
  double drop_height = 1.0;

  static trap from_si(const trap_spec& spec);
  static trap isotropic(double omega = 1.0, double gravity = 0.0, double drop_height = 1.0);

  Vec3 sigma() const;  // 1 / sqrt(omega_a)
  double sigma(int axis) const { return 1.0 / std::sqrt(omega[axis]); }
  void validate() const;
};

struct thermal_state {
  double temperature = 0.0;  // natural units (hbar omega_ref / k_B)
  double atom_number = 0.0;
  double fugacity = 0.0;      // z = exp(beta mu~), mu~ measured from the ground-state energy
  double fugacity_gap = 1.0;  // 1 - z, kept separately for precision near degeneracy
  Vec3 tau;                   // hbar omega_a / k_B T
  double beta = 0.0;
  series_policy policy;
  series_report report;

  double ground_occupation() const { return fugacity / fugacity_gap; }
  double log_fugacity() const;
  void validate() const;
};

double bose_g(double a, double x);

// Total atom number of the grand-canonical gas at fugacity z.
series_result<double> atom_number_at(const trap& tr, double temperature, double z,
                                     const series_policy& policy = {});

// Same from a solved state, using its stored 1 - z: near degeneracy a plain z
// loses eps / (1 - z) of relative accuracy in the ground-state term.
series_result<double> atom_number_at(const trap& tr, const thermal_state& state);

// Excited-state population at z = 1.
series_result<double> saturated_excited_number(const trap& tr, double temperature,
                                               const series_policy& policy = {});

thermal_state solve_fugacity(const trap& tr, double temperature, double atom_number,
                             const series_policy& policy = {});

// State at a prescribed fugacity; atom_number is computed from it.
thermal_state state_from_fugacity(const trap& tr, double temperature, double z,
                                  const series_policy& policy = {});

double critical_temperature(const trap& tr, double atom_number, const series_policy& policy = {});

// Limit hbar omega (N / zeta(3))^{1/3} in natural units.
double semiclassical_critical_temperature(const trap& tr, double atom_number);

struct thermal_length {
  double wavelength;          // lambda = sqrt(2 pi / T)
  double correlation_length;  // lambda / sqrt(2 pi)
};

thermal_length thermal_wavelength(const thermal_state& state);

// Si variant: lambda = hbar sqrt(2 pi) / sqrt(m k_B T).
double thermal_wavelength_si(double temperature_kelvin, double mass_kg);

// Non-degenerate rms width sigma_a / sqrt(tau_a).
Vec3 cloud_size(const trap& tr, const thermal_state& state);

}  // namespace hbt
