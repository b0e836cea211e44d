#include "hbt/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "hbt/parallel.hpp"

namespace hbt {

namespace {

constexpr double log_sqrt_pi = 0.57236494292470008707;  // ln(pi) / 2

struct axis_quadratic {
  double P[3];  // ((r + r') / 2 sigma)^2
  double M[3];  // ((r - r') / 2 sigma)^2
  double log_ground;
  double spread;
};

axis_quadratic quadratic_forms(const trap& tr, const Vec3& r, const Vec3& rp) {
  axis_quadratic q{};
  q.log_ground = 0.0;
  q.spread = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double s = tr.sigma(a);
    const double p = (r[a] + rp[a]) / (2.0 * s);
    const double m = (r[a] - rp[a]) / (2.0 * s);
    q.P[a] = p * p;
    q.M[a] = m * m;
    q.log_ground += -log_sqrt_pi - std::log(s) - q.P[a] - q.M[a];
    q.spread += q.P[a] + q.M[a];
  }
  return q;
}

}  // namespace

double ground_mode_product(const trap& tr, const Vec3& r, const Vec3& r_prime) {
  return std::exp(quadratic_forms(tr, r, r_prime).log_ground);
}

series_result<double> excited_g1(const thermal_state& state, const trap& tr, const Vec3& r,
                                 const Vec3& r_prime) {
  const auto q = quadratic_forms(tr, r, r_prime);
  const double log_z = state.log_fugacity();
  const Vec3& tau = state.tau;
  // z^l (K_l - K_inf) = z^l e^{E_l} (1 - e^{-d}), d = E_l - E_inf written through
  // e^{-x} so that nothing cancels once l tau is large.
  auto term = [&](std::int64_t l) {
    const double ld = static_cast<double>(l);
    double d = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double x = ld * tau[a];
      const double e = std::exp(-x);
      const double one_minus_e = -std::expm1(-x);
      d += 0.5 * std::log1p(-e * e) - 2.0 * e / (1.0 + e) * q.P[a] + 2.0 * e / one_minus_e * q.M[a];
    }
    // d here is E_inf - E_l; the two forms avoid 0 * inf at either sign
    const double a = ld * log_z + q.log_ground;
    return d > 0.0 ? std::exp(a) * std::expm1(-d) : std::exp(a - d) * -std::expm1(d);
  };
  return sum_bose_series<double>(term, state.fugacity, tau.min(), q.spread, state.policy);
}

double density_eq(const thermal_state& state, const trap& tr, const Vec3& r,
                  series_report* report) {
  const auto ex = excited_g1(state, tr, r, r);
  if (report) report->merge(ex.report);
  return state.ground_occupation() * ground_mode_product(tr, r, r) + ex.value;
}

double g1_eq(const thermal_state& state, const trap& tr, const pair_point& pair,
             series_report* report) {
  const auto ex = excited_g1(state, tr, pair.r, pair.r_prime);
  if (report) report->merge(ex.report);
  return state.ground_occupation() * ground_mode_product(tr, pair.r, pair.r_prime) + ex.value;
}

double ground_state_density(const thermal_state& state, const trap& tr, const Vec3& r) {
  return state.ground_occupation() * ground_mode_product(tr, r, r);
}

namespace {

void check_density(const thermal_state& state, const trap& tr, double rho) {
  if (rho > 1e-250) return;
  const double peak = density_eq(state, tr, Vec3{});
  if (!(rho > 1e-300 * peak))
    throw underflow_error("density underflow: point lies too far outside the cloud");
}

struct g2_terms {
  double a;      // condensate part of G1
  double b;      // excited part of G1
  double rho;
  double rho_prime;
};

g2_terms evaluate_terms(const thermal_state& state, const trap& tr, const pair_point& pair,
                        series_report* report) {
  const double n0 = state.ground_occupation();
  const auto b = excited_g1(state, tr, pair.r, pair.r_prime);
  const auto er = excited_g1(state, tr, pair.r, pair.r);
  const bool same = pair.r == pair.r_prime;
  const auto erp = same ? er : excited_g1(state, tr, pair.r_prime, pair.r_prime);
  if (report) {
    report->merge(b.report);
    report->merge(er.report);
    report->merge(erp.report);
  }
  g2_terms t;
  t.a = n0 * ground_mode_product(tr, pair.r, pair.r_prime);
  t.b = b.value;
  t.rho = n0 * ground_mode_product(tr, pair.r, pair.r) + er.value;
  t.rho_prime = n0 * ground_mode_product(tr, pair.r_prime, pair.r_prime) + erp.value;
  check_density(state, tr, t.rho);
  check_density(state, tr, t.rho_prime);
  return t;
}

}  // namespace

double g2_eq(const thermal_state& state, const trap& tr, const pair_point& pair,
             series_report* report) {
  const auto t = evaluate_terms(state, tr, pair, report);
  // |G1|^2 - rho0 rho0' = (a + b)^2 - a^2
  return 1.0 + t.b * (2.0 * t.a + t.b) / t.rho / t.rho_prime;
}

g2_parts g2_eq_parts(const thermal_state& state, const trap& tr, const pair_point& pair,
                     series_report* report) {
  const auto t = evaluate_terms(state, tr, pair, report);
  return {t.rho * t.rho_prime + t.b * (2.0 * t.a + t.b), t.rho, t.rho_prime};
}

decay_extraction extract_decay_length(const std::function<double(double)>& g2_of_separation,
                                      double span, int samples, int threads) {
  if (!(span > 0.0) || samples < 3) throw domain_error("profile needs span > 0 and >= 3 samples");
  decay_extraction out;
  out.separations.resize(samples);
  out.values.resize(samples);
  for (int k = 0; k < samples; ++k) out.separations[k] = span * k / (samples - 1);
  parallel_for(samples, threads,
               [&](std::size_t k) { out.values[k] = g2_of_separation(out.separations[k]); });

  out.peak_amplitude = out.values[0];
  const double excess = out.peak_amplitude - 1.0;
  if (!(excess > 1e-6)) throw flat_profile_error("g2 - 1 at zero separation is below 1e-6");
  const double target = 1.0 + excess / M_E;

  int cross = -1;
  for (int k = 1; k < samples; ++k) {
    if (out.values[k] < target) {
      cross = k;
      break;
    }
  }
  if (cross < 0) throw domain_error("g2 - 1 does not fall to 1/e within the sampled span");
  for (int k = 1; k <= cross; ++k)
    if (out.values[k] > out.values[k - 1] + 1e-15 * out.values[k - 1]) out.monotone = false;

  double lo = out.separations[cross - 1];
  double hi = out.separations[cross];
  if (!out.monotone) {
    // dense rescan of [0, hi] for the first crossing
    const int dense = 20 * samples;
    double prev = 0.0;
    for (int k = 1; k <= dense; ++k) {
      const double s = hi * k / dense;
      if (g2_of_separation(s) < target) {
        lo = prev;
        hi = s;
        break;
      }
      prev = s;
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * span; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g2_of_separation(mid) < target ? hi : lo) = mid;
  }
  out.corr_length = 0.5 * (lo + hi);
  return out;
}

correlation_profile make_correlation_profile(const thermal_state& state, const trap& tr,
                                             const Vec3& center, const Vec3& direction,
                                             double span, int samples, int threads) {
  const double n = direction.norm();
  if (!(n > 0.0) || !direction.finite()) throw domain_error("profile direction must be non-zero");
  const Vec3 e = (1.0 / n) * direction;
  series_report report;
  std::mutex report_mutex;
  auto g2 = [&](double s) {
    series_report local;
    const double v = g2_eq(state, tr, {center + s * e, center}, &local);
    std::lock_guard<std::mutex> lock(report_mutex);
    report.merge(local);
    return v;
  };
  const auto ex = extract_decay_length(g2, span, samples, threads);
  correlation_profile p;
  p.center = center;
  p.direction = e;
  p.separations = ex.separations;
  p.values = ex.values;
  p.peak_amplitude = ex.peak_amplitude;
  p.corr_length = ex.corr_length;
  p.monotone = ex.monotone;
  p.report = report;
  return p;
}

}  // namespace hbt
