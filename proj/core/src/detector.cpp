#include "hbt/detector.hpp"

#include <algorithm>
#include <cmath>

#include "hbt/parallel.hpp"

namespace hbt {

void detector_spec::validate() const {
  for (int a = 0; a < 3; ++a)
    if (!(d[a] >= 0.0) || !std::isfinite(d[a]))
      throw domain_error("detector resolution widths must be finite and >= 0");
}

gaussian_profile observed_density(const gaussian_profile& ideal, double d) {
  if (!(ideal.width > 0.0)) throw domain_error("profile width must be positive");
  if (!(d >= 0.0)) throw domain_error("resolution width must be >= 0");
  const double r = d / ideal.width;
  return {ideal.amplitude / std::sqrt(1.0 + r * r), std::hypot(ideal.width, d)};
}

gaussian_profile_3d observed_density(const gaussian_profile_3d& ideal, const detector_spec& det) {
  det.validate();
  gaussian_profile_3d out;
  out.amplitude = ideal.amplitude;
  for (int a = 0; a < 3; ++a) {
    const auto axis = observed_density(gaussian_profile{1.0, ideal.width[a]}, det.d[a]);
    out.amplitude *= axis.amplitude;
    out.width[a] = axis.width;
  }
  return out;
}

observed_bunching_result observed_bunching(const Vec3& cloud_widths, const Vec3& corr_lengths,
                                           const detector_spec& det) {
  det.validate();
  observed_bunching_result out;
  double prod = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double s = cloud_widths[a], l = corr_lengths[a], d = det.d[a];
    if (!(s > 0.0) || !(l > 0.0)) throw domain_error("cloud widths and correlation lengths must be positive");
    prod *= std::sqrt((1.0 + d * d / (s * s)) / (1.0 + 4.0 * d * d / (l * l)));
    out.lengths[a] = std::sqrt(l * l + 4.0 * d * d);
    if (d > 0.0 && l < 2.0 * d) out.approximate_contrast *= l / (2.0 * d);
  }
  out.amplitude = 1.0 + prod;
  return out;
}

detector_report detector_response(const thermal_state& state, const trap& tr, double t,
                                  const detector_spec& det) {
  det.validate();
  if (!(t >= 0.0)) throw domain_error("time must be non-negative");
  const Vec3 s = cloud_size(tr, state);
  const double lt = thermal_wavelength(state).correlation_length;
  detector_report rep;
  for (int a = 0; a < 3; ++a) {
    const double dil = std::hypot(1.0, tr.omega[a] * t);
    rep.cloud_widths[a] = s[a] * dil;
    rep.corr_lengths[a] = lt * dil;
    rep.observed_widths[a] = std::hypot(rep.cloud_widths[a], det.d[a]);
  }
  rep.bunching = observed_bunching(rep.cloud_widths, rep.corr_lengths, det);
  rep.extrapolated = state.fugacity > 0.5;
  return rep;
}

namespace {

// Nodes l = 1 .. L with weights z^l and an extra node l = infinity carrying
// z^{L+1} / (1 - z): the kernels have reached psi0 psi0' there to the policy tolerance.
struct node_tables {
  std::vector<double> weight;
  std::array<std::vector<double>, 3> t;  // tanh(l tau / 2)
  std::array<std::vector<double>, 3> c;  // coth(l tau / 2)
  std::array<std::vector<double>, 3> n;  // 1 / (sigma sqrt(pi (1 - e^{-2 l tau})))
  std::int64_t terms = 0;
  bool capped = false;
};

node_tables build_nodes(const thermal_state& state, const trap& tr) {
  const double tol = state.policy.rel_tol;
  const double tau_min = state.tau.min();
  const double log_z = state.log_fugacity();
  double l_needed = std::ceil(-std::log(tol) / tau_min);
  if (log_z < 0.0) l_needed = std::min(l_needed, std::ceil(std::log(tol) / log_z));
  node_tables nt;
  std::int64_t L = std::max<std::int64_t>(1, static_cast<std::int64_t>(l_needed));
  if (L > state.policy.max_terms) {
    L = state.policy.max_terms;
    nt.capped = true;
  }
  nt.terms = L;
  const size_t size = static_cast<size_t>(L) + 1;
  nt.weight.resize(size);
  for (int a = 0; a < 3; ++a) {
    nt.t[a].resize(size);
    nt.c[a].resize(size);
    nt.n[a].resize(size);
  }
  for (std::int64_t l = 1; l <= L; ++l) {
    const size_t i = static_cast<size_t>(l - 1);
    nt.weight[i] = std::exp(l * log_z);
    for (int a = 0; a < 3; ++a) {
      const double x = l * state.tau[a];
      const double e = std::exp(-x);
      const double om = -std::expm1(-x);
      nt.t[a][i] = om / (1.0 + e);
      nt.c[a][i] = (1.0 + e) / om;
      nt.n[a][i] = 1.0 / (tr.sigma(a) * std::sqrt(M_PI * -std::expm1(-2.0 * x)));
    }
  }
  nt.weight[L] = std::exp((L + 1) * log_z) / state.fugacity_gap;
  for (int a = 0; a < 3; ++a) {
    nt.t[a][L] = 1.0;
    nt.c[a][L] = 1.0;
    nt.n[a][L] = 1.0 / (tr.sigma(a) * std::sqrt(M_PI));
  }
  return nt;
}

double averaged_from_nodes(const thermal_state& state, const trap& tr, const node_tables& nt,
                           double separation, const Vec3& e) {
  const size_t size = nt.weight.size();
  const Vec3 sig = tr.sigma();
  const Vec3 a{separation * e.x, separation * e.y, separation * e.z};
  const bool isotropic = tr.omega.x == tr.omega.y && tr.omega.y == tr.omega.z;

  double sum_rho = 0.0, sum_g = 0.0;
  if (isotropic) {
    const double s2 = sig.x * sig.x;
    const double a2 = (a.x * a.x + a.y * a.y + a.z * a.z) / s2;
    const double pref = std::pow(M_PI * s2, 1.5);
    std::vector<double> w(size), we(size);
    for (size_t i = 0; i < size; ++i) {
      const double n = nt.n[0][i];
      w[i] = nt.weight[i] * n * n * n;
      we[i] = w[i] * std::exp(-0.25 * nt.c[0][i] * a2);
    }
    const double* t = nt.t[0].data();
    for (size_t i = 0; i < size; ++i) {
      double row_rho = 0.0, row_g = 0.0;
      const double ti = t[i];
      for (size_t j = i; j < size; ++j) {
        const double s = ti + t[j];
        const double inv = 1.0 / s;
        const double f = inv * std::sqrt(inv);
        const double k = (j == i) ? 1.0 : 2.0;
        const double rho_exp = a2 == 0.0 ? 1.0 : std::exp(-ti * t[j] * inv * a2);
        row_rho += k * w[j] * f * rho_exp;
        row_g += k * we[j] * f;
      }
      sum_rho += w[i] * row_rho;
      sum_g += we[i] * row_g;
    }
    sum_rho *= pref;
    sum_g *= pref;
  } else {
    std::vector<double> w(size), we(size);
    for (size_t i = 0; i < size; ++i) {
      double norm = nt.weight[i], ex = 0.0;
      for (int ax = 0; ax < 3; ++ax) {
        norm *= nt.n[ax][i];
        ex += 0.25 * nt.c[ax][i] * a[ax] * a[ax] / (sig[ax] * sig[ax]);
      }
      w[i] = norm;
      we[i] = norm * std::exp(-ex);
    }
    const double pref = std::pow(M_PI, 1.5) * sig.x * sig.y * sig.z;
    for (size_t i = 0; i < size; ++i) {
      double row_rho = 0.0, row_g = 0.0;
      for (size_t j = i; j < size; ++j) {
        double f = 1.0, ex = 0.0;
        for (int ax = 0; ax < 3; ++ax) {
          const double s = nt.t[ax][i] + nt.t[ax][j];
          f /= std::sqrt(s);
          ex += nt.t[ax][i] * nt.t[ax][j] / s * a[ax] * a[ax] / (sig[ax] * sig[ax]);
        }
        const double k = (j == i) ? 1.0 : 2.0;
        row_rho += k * w[j] * f * std::exp(-ex);
        row_g += k * we[j] * f;
      }
      sum_rho += w[i] * row_rho;
      sum_g += we[i] * row_g;
    }
    sum_rho *= pref;
    sum_g *= pref;
  }

  // condensate pair: (z/(1-z))^2 int psi0^2(R + a) psi0^2(R)
  const double n0 = state.ground_occupation();
  double ground = n0 * n0;
  for (int ax = 0; ax < 3; ++ax) {
    const double nn = 1.0 / (sig[ax] * std::sqrt(M_PI));
    ground *= nn * nn * std::sqrt(M_PI * sig[ax] * sig[ax] / 2.0) *
              std::exp(-0.5 * a[ax] * a[ax] / (sig[ax] * sig[ax]));
  }
  return 1.0 + (sum_g - ground) / sum_rho;
}

Vec3 unit(const Vec3& v) {
  const double n = v.norm();
  if (!v.finite() || !(std::abs(n - 1.0) <= 1e-12)) throw domain_error("direction must be a unit vector");
  return (1.0 / n) * v;
}

}  // namespace

double averaged_g2(const thermal_state& state, const trap& tr, double separation, const Vec3& direction,
                   series_report* report) {
  return averaged_g2_scan(state, tr, {separation}, direction, 1, report).front();
}

std::vector<double> averaged_g2_scan(const thermal_state& state, const trap& tr,
                                     const std::vector<double>& separations, const Vec3& direction,
                                     int threads, series_report* report) {
  state.validate();
  const Vec3 e = unit(direction);
  const auto nt = build_nodes(state, tr);
  if (report) {
    series_report r;
    r.terms = nt.terms;
    r.capped = nt.capped;
    r.tail_estimate = nt.capped ? INFINITY : state.policy.rel_tol;
    report->merge(r);
  }
  std::vector<double> out(separations.size());
  parallel_for(separations.size(), threads,
               [&](std::size_t k) { out[k] = averaged_from_nodes(state, tr, nt, separations[k], e); });
  return out;
}

}  // namespace hbt
