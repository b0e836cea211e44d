#include "hbt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace hbt {

namespace {

constexpr double zeta3 = 1.2020569031595942854;

void require(bool ok, const std::string& what) {
  if (!ok) throw domain_error(what);
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// sum_{l>=1} z^l [prod_a (1 - e^{-l tau_a})^{-1} - 1]
series_result<double> excited_sum(const Vec3& tau, double z, double log_z,
                                  const series_policy& policy) {
  auto term = [&](std::int64_t l) {
    const double ld = static_cast<double>(l);
    const double s = std::log1p(-std::exp(-ld * tau.x)) + std::log1p(-std::exp(-ld * tau.y)) +
                     std::log1p(-std::exp(-ld * tau.z));
    return std::exp(ld * log_z - s) * -std::expm1(s);
  };
  return sum_bose_series<double>(term, z, tau.min(), 0.0, policy);
}

Vec3 taus(const trap& tr, double temperature) {
  return {tr.omega.x / temperature, tr.omega.y / temperature, tr.omega.z / temperature};
}

struct logit_point {
  double z;
  double gap;
  double log_z;
};

logit_point from_logit(double t) {
  // z = 1 / (1 + e^{-t}), 1 - z = 1 / (1 + e^{t})
  if (t >= 0) {
    const double e = std::exp(-t);
    return {1.0 / (1.0 + e), e / (1.0 + e), -std::log1p(e)};
  }
  const double e = std::exp(t);
  return {e / (1.0 + e), 1.0 / (1.0 + e), t - std::log1p(e)};
}

}  // namespace

void trap_spec::validate() const {
  require(positive_finite(omega.x) && positive_finite(omega.y) && positive_finite(omega.z),
          "trap frequencies must be positive and finite");
  require(positive_finite(mass), "particle mass must be positive");
  require(std::isfinite(gravity) && gravity >= 0.0, "gravity must be non-negative");
  require(positive_finite(drop_height), "drop height must be positive");
}

natural_units::natural_units(const trap_spec& spec) {
  spec.validate();
  omega_ref_ = std::cbrt(spec.omega.x * spec.omega.y * spec.omega.z);
  length_ = std::sqrt(si::hbar / (spec.mass * omega_ref_));
  energy_ = si::hbar * omega_ref_;
  time_ = 1.0 / omega_ref_;
}

trap trap::from_si(const trap_spec& spec) {
  const natural_units u(spec);
  trap tr;
  tr.omega = {u.frequency_to_natural(spec.omega.x), u.frequency_to_natural(spec.omega.y),
              u.frequency_to_natural(spec.omega.z)};
  tr.gravity = u.acceleration_to_natural(spec.gravity);
  tr.drop_height = u.length_to_natural(spec.drop_height);
  return tr;
}

trap trap::isotropic(double omega, double gravity, double drop_height) {
  trap tr;
  tr.omega = uniform(omega);
  tr.gravity = gravity;
  tr.drop_height = drop_height;
  tr.validate();
  return tr;
}

Vec3 trap::sigma() const { return {sigma(0), sigma(1), sigma(2)}; }

void trap::validate() const {
  require(positive_finite(omega.x) && positive_finite(omega.y) && positive_finite(omega.z),
          "trap frequencies must be positive and finite");
  require(std::isfinite(gravity) && gravity >= 0.0, "gravity must be non-negative");
  require(positive_finite(drop_height), "drop height must be positive");
}

double thermal_state::log_fugacity() const {
  return fugacity_gap < 0.5 ? std::log1p(-fugacity_gap) : std::log(fugacity);
}

void thermal_state::validate() const {
  require(positive_finite(temperature), "temperature must be positive");
  require(fugacity > 0.0 && fugacity < 1.0 && fugacity_gap > 0.0, "fugacity must lie in (0, 1)");
  require(positive_finite(tau.x) && positive_finite(tau.y) && positive_finite(tau.z),
          "tau must be positive");
}

double bose_g(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw domain_error("bose_g: order must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw domain_error("bose_g: argument outside [0, 1]");
  if (x == 1.0 && a <= 1.0) throw divergence_error("bose_g: series diverges at x = 1 for a <= 1");
  if (x == 0.0) return 0.0;
  if (a == 1.0) return -std::log1p(-x);

  constexpr int head = 64;
  double sum = 0.0;
  double xl = 1.0;
  for (int l = 1; l <= head; ++l) {
    xl *= x;
    const double t = xl / std::pow(static_cast<double>(l), a);
    sum += t;
    if (x < 1.0) {
      const double tail = xl * x / (std::pow(l + 1.0, a) * (1.0 - x));
      if (tail < 1e-17 * sum) return sum;
    }
  }

  // Euler-Maclaurin for sum_{l > head} with f(s) = exp(-c s) s^{-a}.
  const double c = -std::log(x);
  const double L = head + 1.0;
  double integral;
  if (c == 0.0) {
    integral = std::pow(L, 1.0 - a) / (a - 1.0);
  } else {
    boost::math::quadrature::exp_sinh<double> integrator;
    auto f = [&](double y) { return std::exp(-c * y - a * std::log1p(y / L)); };
    integral = std::exp(-c * L - a * std::log(L)) *
               integrator.integrate(f, 0.0, std::numeric_limits<double>::infinity(), 1e-15);
  }
  const double fl = std::exp(-c * L - a * std::log(L));
  const double h1 = -c - a / L;
  const double h2 = a / (L * L);
  const double h3 = -2.0 * a / (L * L * L);
  const double h4 = 6.0 * a / (L * L * L * L);
  const double h5 = -24.0 * a / (L * L * L * L * L);
  const double d1 = fl * h1;
  const double d3 = fl * (h1 * h1 * h1 + 3.0 * h1 * h2 + h3);
  const double d5 = fl * (std::pow(h1, 5) + 10.0 * h1 * h1 * h1 * h2 + 10.0 * h1 * h1 * h3 +
                          15.0 * h1 * h2 * h2 + 5.0 * h1 * h4 + 10.0 * h2 * h3 + h5);
  return sum + integral + 0.5 * fl - d1 / 12.0 + d3 / 720.0 - d5 / 30240.0;
}

series_result<double> atom_number_at(const trap& tr, double temperature, double z,
                                     const series_policy& policy) {
  tr.validate();
  require(positive_finite(temperature), "temperature must be positive");
  require(z > 0.0 && z < 1.0, "fugacity must lie in (0, 1)");
  auto s = excited_sum(taus(tr, temperature), z, std::log(z), policy);
  s.value += z / (1.0 - z);
  return s;
}

series_result<double> atom_number_at(const trap& tr, const thermal_state& state) {
  tr.validate();
  state.validate();
  auto s = excited_sum(taus(tr, state.temperature), state.fugacity, state.log_fugacity(), state.policy);
  s.value += state.ground_occupation();
  return s;
}

series_result<double> saturated_excited_number(const trap& tr, double temperature,
                                               const series_policy& policy) {
  tr.validate();
  require(positive_finite(temperature), "temperature must be positive");
  return excited_sum(taus(tr, temperature), 1.0, 0.0, policy);
}

thermal_state state_from_fugacity(const trap& tr, double temperature, double z,
                                  const series_policy& policy) {
  const auto n = atom_number_at(tr, temperature, z, policy);
  thermal_state st;
  st.temperature = temperature;
  st.beta = 1.0 / temperature;
  st.tau = taus(tr, temperature);
  st.fugacity = z;
  st.fugacity_gap = 1.0 - z;
  st.atom_number = n.value;
  st.policy = policy;
  st.report = n.report;
  return st;
}

thermal_state solve_fugacity(const trap& tr, double temperature, double atom_number,
                             const series_policy& policy) {
  tr.validate();
  require(positive_finite(temperature), "temperature must be positive");
  require(std::isfinite(atom_number) && atom_number >= 1.0, "atom number must be >= 1");
  const Vec3 tau = taus(tr, temperature);

  auto count = [&](double t) {
    const auto p = from_logit(t);
    auto s = excited_sum(tau, p.z, p.log_z, policy);
    s.value += p.z / p.gap;
    return s;
  };

  // z in (0, 1 - 1e-12), bisection in logit(z) keeps both z and 1 - z exact.
  const double t_max = std::log((1.0 - 1e-12) / 1e-12);
  double hi = t_max;
  if (count(hi).value < atom_number)
    throw domain_error("atom number exceeds the fugacity bracket (z <= 1 - 1e-12)");
  double lo = -40.0;
  while (count(lo).value > atom_number) {
    lo -= 40.0;
    if (lo < -700.0) throw convergence_error("solve_fugacity: lower bracket not found");
  }

  series_result<double> best;
  double best_t = hi;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto n = count(mid);
    best = n;
    best_t = mid;
    const double rel = (n.value - atom_number) / atom_number;
    if (std::abs(rel) <= 1e-12 || mid == lo || mid == hi) break;
    (rel < 0.0 ? lo : hi) = mid;
  }
  const double rel = std::abs(best.value - atom_number) / atom_number;
  if (!(rel < 1e-10))
    throw convergence_error("solve_fugacity: atom number not reproduced", rel);

  const auto p = from_logit(best_t);
  thermal_state st;
  st.temperature = temperature;
  st.beta = 1.0 / temperature;
  st.tau = tau;
  st.fugacity = p.z;
  st.fugacity_gap = p.gap;
  st.atom_number = atom_number;
  st.policy = policy;
  st.report = best.report;
  return st;
}

double semiclassical_critical_temperature(const trap& tr, double atom_number) {
  const double omega_geo = std::cbrt(tr.omega.product());
  return omega_geo * std::cbrt(atom_number / zeta3);
}

double critical_temperature(const trap& tr, double atom_number, const series_policy& policy) {
  tr.validate();
  require(std::isfinite(atom_number) && atom_number >= 2.0, "atom number must be >= 2");
  auto excited = [&](double log_t) {
    return saturated_excited_number(tr, std::exp(log_t), policy).value;
  };
  const double guess = std::log(semiclassical_critical_temperature(tr, atom_number));
  double lo = guess - 0.5;
  double hi = guess + 0.5;
  while (excited(lo) > atom_number) lo -= 1.0;
  while (excited(hi) < atom_number) hi += 1.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (excited(mid) < atom_number ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

thermal_length thermal_wavelength(const thermal_state& state) {
  require(positive_finite(state.temperature), "temperature must be positive");
  const double lambda = std::sqrt(2.0 * M_PI / state.temperature);
  return {lambda, lambda / std::sqrt(2.0 * M_PI)};
}

double thermal_wavelength_si(double temperature_kelvin, double mass_kg) {
  require(positive_finite(temperature_kelvin) && positive_finite(mass_kg),
          "temperature and mass must be positive");
  return si::hbar * std::sqrt(2.0 * M_PI) / std::sqrt(mass_kg * si::k_boltzmann * temperature_kelvin);
}

Vec3 cloud_size(const trap& tr, const thermal_state& state) {
  return {tr.sigma(0) / std::sqrt(state.tau.x), tr.sigma(1) / std::sqrt(state.tau.y),
          tr.sigma(2) / std::sqrt(state.tau.z)};
}

}  // namespace hbt
