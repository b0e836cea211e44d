#include "hbt/flux_exact.hpp"

#include <algorithm>
#include <cmath>

namespace hbt {

namespace {

constexpr double log_sqrt_pi = 0.57236494292470008707;

complex cexpm1(complex w) {
  const double a = w.real();
  const double b = w.imag();
  const double s = std::sin(0.5 * b);
  return {std::expm1(a) * std::cos(b) - 2.0 * s * s, std::exp(a) * std::sin(b)};
}

complex clog1p(complex w) {
  const double a = w.real();
  const double b = w.imag();
  return {0.5 * std::log1p(2.0 * a + a * a + b * b), std::atan2(b, 1.0 + a)};
}

void require_re_positive(complex u) {
  if (!(u.real() > 0.0)) throw domain_error("kernel argument needs Re(u) > 0");
}

// Pieces of the Mehler kernel shared by all one-dimensional series.
struct mehler {
  complex q;             // e^{-u}
  complex one_minus_q;   // 1 - q
  complex one_minus_q2;  // 1 - q^2
  complex g;             // g_u(x, x')
};

mehler make_mehler(double x, double xp, complex u, double sigma) {
  require_re_positive(u);
  mehler m;
  m.q = std::exp(-u);
  m.one_minus_q = -cexpm1(-u);
  const complex one_plus_q = 1.0 + m.q;
  m.one_minus_q2 = m.one_minus_q * one_plus_q;
  const double p = (x + xp) / (2.0 * sigma);
  const double mm = (x - xp) / (2.0 * sigma);
  const complex th = m.one_minus_q / one_plus_q;
  const complex ct = one_plus_q / m.one_minus_q;
  m.g = std::exp(-th * (p * p) - ct * (mm * mm)) / (sigma * std::sqrt(M_PI * m.one_minus_q2));
  return m;
}

}  // namespace

complex kernel_gu(double x, double x_prime, complex u, double sigma) {
  return make_mehler(x, x_prime, u, sigma).g;
}

complex sqrt_series(double x, double x_prime, complex u, sqrt_variant variant, double sigma) {
  const auto m = make_mehler(x, x_prime, u, sigma);
  const complex q2 = m.q * m.q;
  const complex num = variant == sqrt_variant::lower ? m.q * x_prime - q2 * x : m.q * x - q2 * x_prime;
  return std::sqrt(2.0) / sigma * num / m.one_minus_q2 * m.g;
}

complex n_series(double x, double x_prime, complex u, double sigma) {
  const auto m = make_mehler(x, x_prime, u, sigma);
  const double p = (x + x_prime) / (2.0 * sigma);
  const double mm = (x - x_prime) / (2.0 * sigma);
  const complex one_plus_q = 1.0 + m.q;
  const complex bracket = 1.0 / m.one_minus_q2 + 2.0 * m.q * (p * p) / (one_plus_q * one_plus_q) -
                          2.0 * m.q * (mm * mm) / (m.one_minus_q * m.one_minus_q);
  return m.q * bracket * m.g;
}

complex g1b_3d(const trap& tr, const pair_point& scaled, const std::array<complex, 3>& u) {
  complex prod = 1.0;
  for (int a = 0; a < 3; ++a) prod *= kernel_gu(scaled.r[a], scaled.r_prime[a], u[a], tr.sigma(a));
  return prod;
}

namespace {

// The four l-sums at u_l = l tau - i Delta (or + i Delta on the conjugate path).
struct flux_sums {
  complex G;        // sum z^l G_B
  double G_ground;  // z/(1-z) psi0 psi0', already contained in G
  complex G_excited;
  complex U;        // sum z^l U_z g_x g_y
  complex L;
  complex N;
  series_report report;
};

struct axis_setup {
  double P, M, log_ground, sigma, x, xp;
};

flux_sums accumulate(const thermal_state& state, const trap& tr, const pair_point& scaled,
                     const Vec3& delta, bool single_term, int sign) {
  axis_setup ax[3];
  double log_ground = 0.0, spread = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double s = tr.sigma(a);
    const double p = (scaled.r[a] + scaled.r_prime[a]) / (2.0 * s);
    const double m = (scaled.r[a] - scaled.r_prime[a]) / (2.0 * s);
    ax[a] = {p * p, m * m, -log_sqrt_pi - std::log(s) - p * p - m * m, s, scaled.r[a],
             scaled.r_prime[a]};
    log_ground += ax[a].log_ground;
    spread += p * p + m * m;
  }
  const double log_z = state.log_fugacity();
  const double sz = ax[2].sigma;
  const double zs = ax[2].x, zsp = ax[2].xp;

  struct term_set {
    complex g_excited, g_full, u, l, n;
  };
  auto term = [&](std::int64_t l) {
    const double ld = static_cast<double>(l);
    complex d_sum = 0.0;
    complex d_xy = 0.0;
    complex qz, omqz, opqz;
    for (int a = 0; a < 3; ++a) {
      const complex u(ld * state.tau[a], -sign * delta[a]);
      const complex q = std::exp(-u);
      const complex omq = -cexpm1(-u);
      const complex opq = 1.0 + q;
      const complex d = 0.5 * clog1p(-q * q) - 2.0 * q / opq * ax[a].P + 2.0 * q / omq * ax[a].M;
      d_sum += d;
      if (a < 2) d_xy += d;
      if (a == 2) {
        qz = q;
        omqz = omq;
        opqz = opq;
      }
    }
    const double base = ld * log_z;
    term_set ts;
    // e^{E_l} = e^{E_inf - d}
    const complex full = std::exp(base + log_ground - d_sum);
    ts.g_full = full;
    ts.g_excited = d_sum.real() > 0.0 ? std::exp(base + log_ground) * cexpm1(-d_sum) : full * -cexpm1(d_sum);
    const complex omq2 = omqz * opqz;
    const double pz = ax[2].P, mz = ax[2].M;
    ts.u = std::sqrt(2.0) / sz * (qz * zs - qz * qz * zsp) / omq2 * full;
    ts.l = std::sqrt(2.0) / sz * (qz * zsp - qz * qz * zs) / omq2 * full;
    ts.n = qz * (1.0 / omq2 + 2.0 * qz * pz / (opqz * opqz) - 2.0 * qz * mz / (omqz * omqz)) * full;
    return ts;
  };

  flux_sums out;
  out.G_ground = state.ground_occupation() * std::exp(log_ground);
  if (single_term) {
    const auto ts = term(1);
    out.G = ts.g_full;
    out.G_ground = 0.0;
    out.G_excited = ts.g_full;
    out.U = ts.u;
    out.L = ts.l;
    out.N = ts.n;
    out.report.terms = 1;
    return out;
  }

  const series_policy& policy = state.policy;
  const std::int64_t guard = bose_guard_index(state.tau.min(), spread);
  const double q_late = state.fugacity * std::exp(-state.tau.min());
  const double ratio = q_late / (1.0 - q_late);
  complex ge = 0.0, su = 0.0, sl = 0.0, sn = 0.0;
  for (std::int64_t l = 1;; ++l) {
    const auto ts = term(l);
    ge += ts.g_excited;
    su += ts.u;
    sl += ts.l;
    sn += ts.n;
    if (l >= guard) {
      const double g_total = std::abs(out.G_ground + ge);
      const double floor_g = std::max(g_total, out.G_ground);
      const bool done = std::abs(ts.g_excited) * ratio <= policy.rel_tol * floor_g &&
                        std::abs(ts.u) * ratio <= policy.rel_tol * std::max(std::abs(su), g_total / sz) &&
                        std::abs(ts.l) * ratio <= policy.rel_tol * std::max(std::abs(sl), g_total / sz) &&
                        std::abs(ts.n) * ratio <= policy.rel_tol * std::max(std::abs(sn), g_total);
      if (done || g_total == 0.0) {
        out.report.terms = l;
        out.report.tail_estimate = floor_g > 0.0 ? std::abs(ts.g_excited) * ratio / floor_g : 0.0;
        break;
      }
    }
    if (l >= policy.max_terms) {
      out.report.terms = l;
      out.report.capped = true;
      out.report.tail_estimate = std::abs(ts.g_excited) * ratio / std::max(std::abs(ge), 1e-300);
      break;
    }
  }
  out.G_excited = ge;
  out.G = out.G_ground + ge;
  out.U = su;
  out.L = sl;
  out.N = sn;
  return out;
}

void require_plane(const trap& tr, const pair_point& pair) {
  const double h = tr.drop_height;
  const double tol = 1e-12 * std::max(1.0, std::abs(h));
  if (std::abs(pair.r.z - h) > tol || std::abs(pair.r_prime.z - h) > tol)
    throw domain_error("flux correlators need both events on the detection plane z = H");
}

}  // namespace

series_result<complex> bose_g1b_sum(const thermal_state& state, const trap& tr,
                                    const pair_point& scaled, const Vec3& delta) {
  const auto s = accumulate(state, tr, scaled, delta, false, +1);
  return {s.G, s.report};
}

flux_terms compute_flux_terms(const thermal_state& state, const trap& tr, double t, double t_prime,
                              const pair_point& pair, const flux_options& options) {
  if (!(t > 0.0) || !(t_prime > 0.0)) throw domain_error("detection times must be positive");
  require_plane(tr, pair);
  const auto f = make_scaled_frame(tr, t);
  const auto fp = make_scaled_frame(tr, t_prime);
  const pair_point scaled{f.map(pair.r), fp.map(pair.r_prime)};
  const Vec3 delta = fp.delta - f.delta;

  flux_sums s;
  if (options.conjugate_path) {
    s = accumulate(state, tr, scaled, delta, options.single_term, -1);
    s.G = std::conj(s.G);
    s.G_excited = std::conj(s.G_excited);
    s.U = std::conj(s.U);
    s.L = std::conj(s.L);
    s.N = std::conj(s.N);
  } else {
    s = accumulate(state, tr, scaled, delta, options.single_term, +1);
  }

  const auto v = velocities(tr, t);
  const auto vp = velocities(tr, t_prime);
  const double pi_factor = 1.0 / (f.volume_factor() * fp.volume_factor());
  const double a3 = std::abs(v.v3), a3p = std::abs(vp.v3);
  const complex i(0.0, 1.0);

  flux_terms out;
  out.report = s.report;
  out.t[0] = v.v2 * vp.v2 * pi_factor * std::norm(s.G);
  out.t[1] = -0.5 * a3 * a3p * pi_factor * s.U * std::conj(s.L);
  out.t[2] = 0.5 * a3 * a3p * pi_factor * s.G * std::conj(s.N);
  out.t[3] = -i * v.v2 * a3p * pi_factor * s.U * std::conj(s.G);
  out.t[4] = -i * vp.v2 * a3 * pi_factor * s.G * std::conj(s.L);
  for (const auto& term : out.t) out.total += term.real();

  double rho, rho_p, rho0, rho0_p;
  if (options.single_term) {
    const double z = state.fugacity;
    const std::array<complex, 3> u{complex(state.tau.x), complex(state.tau.y), complex(state.tau.z)};
    rho = z * g1b_3d(tr, {scaled.r, scaled.r}, u).real();
    rho_p = z * g1b_3d(tr, {scaled.r_prime, scaled.r_prime}, u).real();
    rho0 = rho0_p = 0.0;
  } else {
    series_report rep;
    rho = density_eq(state, tr, scaled.r, &rep);
    rho_p = density_eq(state, tr, scaled.r_prime, &rep);
    out.report.merge(rep);
    rho0 = ground_state_density(state, tr, scaled.r);
    rho0_p = ground_state_density(state, tr, scaled.r_prime);
  }
  out.mean_flux = v.v2 * rho / f.volume_factor();
  out.mean_flux_prime = vp.v2 * rho_p / fp.volume_factor();
  out.ground_correction = v.v2 * vp.v2 * pi_factor * rho0 * rho0_p;

  // |G|^2 - A0^2 = 2 A0 Re(B) + |B|^2 with A0 the condensate part of G.
  const double a0 = s.G_ground;
  const double t1_excess = 2.0 * a0 * s.G_excited.real() + std::norm(s.G_excited);
  double rest = 0.0;
  for (int k = 1; k < 5; ++k) rest += out.t[k].real();
  const double norm = out.mean_flux * out.mean_flux_prime;
  out.excess = (v.v2 * vp.v2 * pi_factor * t1_excess + rest) / norm;
  return out;
}

shot_noise_record shot_noise_expanded(const thermal_state& state, const trap& tr, double t,
                                      const pair_point& pair) {
  const auto f = make_scaled_frame(tr, t);
  const double v2 = velocities_at(tr, t, pair.r.z).v2;
  const double vol = f.volume_factor();
  shot_noise_record rec;
  rec.location = f.map(pair.r);
  rec.weight = v2 * v2 / (vol * vol) * density_eq(state, tr, rec.location);
  rec.equal_time = true;
  return rec;
}

flux_correlation g2_flux_exact(const thermal_state& state, const trap& tr, double t,
                               double t_prime, const pair_point& pair, const flux_options& options) {
  flux_correlation c;
  c.terms = compute_flux_terms(state, tr, t, t_prime, pair, options);
  c.g2 = 1.0 + c.terms.excess;
  c.deviation_from_two = c.g2 - 2.0;
  double rest = 0.0;
  for (int k = 1; k < 5; ++k) rest += c.terms.t[k].real();
  c.higher_order = rest / (c.terms.mean_flux * c.terms.mean_flux_prime);
  c.leading = g2_flux_leading(state, tr, t, t_prime, pair);
  c.shot_noise = shot_noise_expanded(state, tr, t, pair);
  c.shot_noise.equal_time = t == t_prime;
  if (!c.shot_noise.equal_time) c.shot_noise.weight = 0.0;
  return c;
}

epsilon_estimate epsilon_correction(const thermal_state& state, const trap& tr, double t,
                                    double t_prime) {
  const double t0 = fall_time(tr);
  const double tau_z = state.tau.z;
  const double s_z = cloud_size(tr, state).z;
  const double h = tr.drop_height;
  const double mean_shift = (t + t_prime - 2.0 * t0) / t0;
  const double sep = (t - t_prime) / t0;
  const double wt = tr.omega.z * t0 * tau_z;
  epsilon_estimate e;
  e.coincident_part = 0.125 * (s_z / h) * (s_z / h) * (1.0 - mean_shift) * (1.0 - tau_z * tau_z / 6.0);
  e.separation_part = 3.0 / (2.0 * wt * wt) * sep * sep * (1.0 + tau_z / 3.0);
  e.value = e.coincident_part - e.separation_part;
  const double env = (1.0 - tau_z * tau_z / 6.0) * (1.0 - mean_shift);
  e.envelope_factor = env > 0.0 ? 1.0 / std::sqrt(env) : INFINITY;
  const double off = std::max(std::abs(t - t0), std::abs(t_prime - t0)) / t0;
  if (off > 0.1) {
    e.valid = false;
    e.warning = "time offsets from t0 are not small; the expansion is outside its range";
  } else if (state.fugacity > 0.5) {
    e.valid = false;
    e.warning = "degenerate cloud; the single-term expansion does not apply";
  }
  return e;
}

mean_flux_parts mean_flux_literal(const thermal_state& state, const trap& tr, double t,
                                  const Vec3& r) {
  const auto f = make_scaled_frame(tr, t);
  const Vec3 rs = f.map(r);
  const auto v = velocities_at(tr, t, r.z);
  const double vol = f.volume_factor();
  mean_flux_parts parts;
  parts.v2_term = v.v2 * density_eq(state, tr, rs) / vol;
  // sum_j n_j sqrt(j_z) psi_j* psi_{j - e_z} at equal points carries the phase e^{i atan(omega t)}
  const auto s = accumulate(state, tr, {rs, rs}, Vec3{}, false, +1);
  const complex modal = std::polar(1.0, std::atan(tr.omega.z * t)) * s.U / vol;
  parts.v3_term = -(v.v3 * modal).real();
  return parts;
}

}  // namespace hbt
