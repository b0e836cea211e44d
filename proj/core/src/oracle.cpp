#include "hbt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "hbt/expansion.hpp"
#include "hbt/parallel.hpp"
#include "hbt/quadrature.hpp"

namespace hbt {

namespace {

constexpr double rescale_threshold = 1e150;
constexpr double log_rescale = 345.38776394910684;  // ln(1e150)

void check_order(int n) {
  if (n < 0) throw domain_error("hermite order must be non-negative");
  if (n > hermite_max_order)
    throw domain_error("hermite order " + std::to_string(n) + " exceeds the cutoff " +
                       std::to_string(hermite_max_order));
}

double base_log(double y, double sigma) {
  return -0.5 * y * y - 0.25 * std::log(M_PI) - 0.5 * std::log(sigma);
}

}  // namespace

double hermite_fn(int n, double x, double sigma) {
  check_order(n);
  const double y = x / sigma;
  double log_scale = base_log(y, sigma);
  double prev = 0.0;
  double cur = 1.0;
  for (int k = 0; k < n; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * y * cur - std::sqrt(double(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > rescale_threshold) {
      cur /= rescale_threshold;
      prev /= rescale_threshold;
      log_scale += log_rescale;
    }
  }
  if (cur == 0.0) return 0.0;
  return std::copysign(std::exp(std::log(std::abs(cur)) + log_scale), cur);
}

std::vector<double> hermite_table(int n, double x, double sigma) {
  check_order(n);
  std::vector<double> out(n + 1);
  const double y = x / sigma;
  double log_scale = base_log(y, sigma);
  double prev = 0.0;
  double cur = 1.0;
  auto emit = [&](int k) {
    out[k] = cur == 0.0 ? 0.0 : std::copysign(std::exp(std::log(std::abs(cur)) + log_scale), cur);
  };
  emit(0);
  for (int k = 0; k < n; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * y * cur - std::sqrt(double(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > rescale_threshold) {
      cur /= rescale_threshold;
      prev /= rescale_threshold;
      log_scale += log_rescale;
    }
    emit(k + 1);
  }
  return out;
}

namespace oracle {

double occupation_tail_bound(const thermal_state& state, const std::array<int, 3>& n_max) {
  double total = 0.0;
  for (int a = 0; a < 3; ++a) {
    double others = 1.0;
    for (int b = 0; b < 3; ++b)
      if (b != a) others /= -std::expm1(-state.tau[b]);
    total += std::exp(-(n_max[a] + 1) * state.tau[a]) / -std::expm1(-state.tau[a]) * others;
  }
  return total * state.fugacity / state.fugacity_gap;
}

truncation_spec truncation_spec::for_tolerance(const thermal_state& state, double tolerance) {
  if (!(tolerance > 0.0)) throw domain_error("truncation tolerance must be positive");
  truncation_spec spec;
  const double occ = state.fugacity / state.fugacity_gap;
  for (int a = 0; a < 3; ++a) {
    double others = 1.0;
    for (int b = 0; b < 3; ++b)
      if (b != a) others /= -std::expm1(-state.tau[b]);
    const double per_axis = tolerance / 3.0 * -std::expm1(-state.tau[a]) / (others * occ);
    const double n = std::ceil(-std::log(per_axis) / state.tau[a]) - 1.0;
    spec.n_max[a] = static_cast<int>(std::clamp(n, 0.0, double(hermite_max_order)));
  }
  spec.tail_bound = occupation_tail_bound(state, spec.n_max);
  return spec;
}

double bose_occupation(const thermal_state& state, const mode_index& j) {
  const double eps = j.x * state.tau.x + j.y * state.tau.y + j.z * state.tau.z;
  // z e^{-eps} / (1 - z e^{-eps}), with 1 - z e^{-eps} = (1 - e^{-eps}) + (1 - z) e^{-eps}
  const double e = std::exp(-eps);
  return state.fugacity * e / (-std::expm1(-eps) + state.fugacity_gap * e);
}

namespace {

void check_tail(const truncation_spec& trunc, const thermal_state& state) {
  for (int a = 0; a < 3; ++a)
    if (trunc.n_max[a] < 0 || trunc.n_max[a] > hermite_max_order)
      throw domain_error("truncation cutoff outside [0, 5000]");
  const double actual = occupation_tail_bound(state, trunc.n_max);
  if (actual > trunc.tail_bound * (1.0 + 1e-12) + 1e-300)
    throw domain_error("truncation tail bound violated: omitted weight " + std::to_string(actual));
}

}  // namespace

namespace {

bool isotropic(const trap& tr) { return tr.omega.x == tr.omega.y && tr.omega.y == tr.omega.z; }

// Discrete convolution: for an isotropic trap the occupation depends on
// jx + jy + jz only, so the box sum regroups into energy shells.
template <class T, class U>
auto convolve(const std::vector<T>& a, const std::vector<U>& b) {
  std::vector<decltype(T{} * U{})> out(a.size() + b.size() - 1);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

template <class T>
T shell_sum(const thermal_state& state, const std::vector<T>& by_energy) {
  T sum{};
  for (size_t e = 0; e < by_energy.size(); ++e)
    sum += bose_occupation(state, {static_cast<int>(e), 0, 0}) * by_energy[e];
  return sum;
}

}  // namespace

double brute_g1(const thermal_state& state, const trap& tr, const pair_point& pair,
                const truncation_spec& trunc, const occupation_fn& occupation) {
  check_tail(trunc, state);
  std::array<std::vector<double>, 3> h, hp;
  for (int a = 0; a < 3; ++a) {
    h[a] = hermite_table(trunc.n_max[a], pair.r[a], tr.sigma(a));
    hp[a] = hermite_table(trunc.n_max[a], pair.r_prime[a], tr.sigma(a));
  }
  if (!occupation && isotropic(tr)) {
    std::array<std::vector<double>, 3> f;
    for (int a = 0; a < 3; ++a) {
      f[a].resize(h[a].size());
      for (size_t j = 0; j < h[a].size(); ++j) f[a][j] = h[a][j] * hp[a][j];
    }
    return shell_sum(state, convolve(convolve(f[0], f[1]), f[2]));
  }
  double sum = 0.0;
  for (int jx = 0; jx <= trunc.n_max[0]; ++jx)
    for (int jy = 0; jy <= trunc.n_max[1]; ++jy) {
      const double fxy = h[0][jx] * hp[0][jx] * h[1][jy] * hp[1][jy];
      for (int jz = 0; jz <= trunc.n_max[2]; ++jz) {
        const mode_index j{jx, jy, jz};
        const double n = occupation ? occupation(j) : bose_occupation(state, j);
        sum += n * fxy * h[2][jz] * hp[2][jz];
      }
    }
  return sum;
}

double brute_density(const thermal_state& state, const trap& tr, const Vec3& r,
                     const truncation_spec& trunc) {
  return brute_g1(state, tr, {r, r}, trunc);
}

double brute_ground_density(const thermal_state& state, const trap& tr, const Vec3& r) {
  double psi = 1.0;
  for (int a = 0; a < 3; ++a) psi *= hermite_fn(0, r[a], tr.sigma(a));
  return bose_occupation(state, {}) * psi * psi;
}

double brute_g2(const thermal_state& state, const trap& tr, const pair_point& pair,
                const truncation_spec& trunc) {
  const double g1 = brute_g1(state, tr, pair, trunc);
  const double rho = brute_density(state, tr, pair.r, trunc);
  const double rho_p = brute_density(state, tr, pair.r_prime, trunc);
  const double c = brute_ground_density(state, tr, pair.r) * brute_ground_density(state, tr, pair.r_prime);
  return 1.0 + (g1 * g1 - c) / (rho * rho_p);
}

complex brute_kernel_gu(double x, double x_prime, complex u, double sigma, int n_max) {
  const auto h = hermite_table(n_max, x, sigma);
  const auto hp = hermite_table(n_max, x_prime, sigma);
  complex sum = 0.0;
  for (int n = 0; n <= n_max; ++n) sum += h[n] * hp[n] * std::exp(-double(n) * u);
  return sum;
}

complex brute_sqrt_series_lower(double x, double x_prime, complex u, double sigma, int n_max) {
  const auto h = hermite_table(n_max, x, sigma);
  const auto hp = hermite_table(n_max, x_prime, sigma);
  complex sum = 0.0;
  for (int n = 1; n <= n_max; ++n)
    sum += std::sqrt(double(n)) * h[n - 1] * hp[n] * std::exp(-double(n) * u);
  return sum;
}

complex brute_sqrt_series_upper(double x, double x_prime, complex u, double sigma, int n_max) {
  const auto h = hermite_table(n_max, x, sigma);
  const auto hp = hermite_table(n_max, x_prime, sigma);
  complex sum = 0.0;
  for (int n = 1; n <= n_max; ++n)
    sum += std::sqrt(double(n)) * h[n] * hp[n - 1] * std::exp(-double(n) * u);
  return sum;
}

complex brute_n_series(double x, double x_prime, complex u, double sigma, int n_max) {
  const auto h = hermite_table(n_max, x, sigma);
  const auto hp = hermite_table(n_max, x_prime, sigma);
  complex sum = 0.0;
  for (int n = 1; n <= n_max; ++n) sum += double(n) * h[n - 1] * hp[n - 1] * std::exp(-double(n) * u);
  return sum;
}

complex brute_g1b_3d(const trap& tr, const pair_point& scaled, const std::array<complex, 3>& u,
                     int n_max) {
  complex prod = 1.0;
  for (int a = 0; a < 3; ++a)
    prod *= brute_kernel_gu(scaled.r[a], scaled.r_prime[a], u[a], tr.sigma(a), n_max);
  return prod;
}

namespace {

struct axis_modes {
  std::vector<complex> value;  // psi_n(x, t)
  std::vector<complex> deriv;  // d/dx psi_n(x, t), vertical axis only
};

axis_modes propagate_axis(double omega, double gravity, int n_max, double t, double x,
                          bool with_derivative) {
  axis_modes m;
  m.value.resize(n_max + 1);
  for (int n = 0; n <= n_max; ++n) m.value[n] = propagate_mode_1d(omega, gravity, n, t, x);
  if (with_derivative) {
    // d psi_n = [i (omega^2 t xs / D + g t) - xs / (sigma^2 D)] psi_n
    //           + sqrt(2n) / (sigma D) e^{-i atan(omega t)} psi_{n-1}
    const double sigma = 1.0 / std::sqrt(omega);
    const double wt = omega * t;
    const double d = std::hypot(1.0, wt);
    const double xs = (x - 0.5 * gravity * t * t) / d;
    const complex diag(-xs / (sigma * sigma * d), omega * omega * t * xs / d + gravity * t);
    const complex rot = std::polar(1.0, -std::atan(wt));
    m.deriv.resize(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
      m.deriv[n] = diag * m.value[n];
      if (n > 0) m.deriv[n] += std::sqrt(2.0 * n) / (sigma * d) * rot * m.value[n - 1];
    }
  }
  return m;
}

struct event_modes {
  axis_modes x, y, z;
};

event_modes propagate_event(const trap& tr, const truncation_spec& trunc, double t, const Vec3& r) {
  return {propagate_axis(tr.omega.x, 0.0, trunc.n_max[0], t, r.x, false),
          propagate_axis(tr.omega.y, 0.0, trunc.n_max[1], t, r.y, false),
          propagate_axis(tr.omega.z, tr.gravity, trunc.n_max[2], t, r.z, true)};
}

std::vector<double> occupation_table(const thermal_state& state, const truncation_spec& trunc) {
  const int nx = trunc.n_max[0] + 1, ny = trunc.n_max[1] + 1, nz = trunc.n_max[2] + 1;
  std::vector<double> occ(static_cast<size_t>(nx) * ny * nz);
  for (int jx = 0; jx < nx; ++jx)
    for (int jy = 0; jy < ny; ++jy)
      for (int jz = 0; jz < nz; ++jz)
        occ[(static_cast<size_t>(jx) * ny + jy) * nz + jz] = bose_occupation(state, {jx, jy, jz});
  return occ;
}

complex flux_element(const axis_modes& z, int j, int k) {
  // (psi_j* d psi_k - (d psi_j)* psi_k) / 2i
  return (std::conj(z.value[j]) * z.deriv[k] - std::conj(z.deriv[j]) * z.value[k]) / complex(0.0, 2.0);
}

}  // namespace

brute_flux_terms_result brute_flux_terms(const thermal_state& state, const trap& tr, double t,
                                         double t_prime, const pair_point& pair,
                                         const truncation_spec& trunc) {
  check_tail(trunc, state);
  const auto e = propagate_event(tr, trunc, t, pair.r);
  const auto ep = propagate_event(tr, trunc, t_prime, pair.r_prime);
  const auto occ = occupation_table(state, trunc);
  const int nx = trunc.n_max[0] + 1, ny = trunc.n_max[1] + 1, nz = trunc.n_max[2] + 1;

  complex G = 0.0, S1 = 0.0, S2 = 0.0, N = 0.0;
  double rho = 0.0, rho_p = 0.0;
  if (isotropic(tr)) {
    std::vector<complex> axy_x(nx), axy_y(ny);
    std::vector<double> mx(nx), my(ny), mx_p(nx), my_p(ny);
    for (int j = 0; j < nx; ++j) {
      axy_x[j] = std::conj(e.x.value[j]) * ep.x.value[j];
      mx[j] = std::norm(e.x.value[j]);
      mx_p[j] = std::norm(ep.x.value[j]);
    }
    for (int j = 0; j < ny; ++j) {
      axy_y[j] = std::conj(e.y.value[j]) * ep.y.value[j];
      my[j] = std::norm(e.y.value[j]);
      my_p[j] = std::norm(ep.y.value[j]);
    }
    const auto axy = convolve(axy_x, axy_y);
    const auto mxy = convolve(mx, my);
    const auto mxy_p = convolve(mx_p, my_p);
    std::vector<complex> g(nz), s1(nz), s2(nz), nn(nz);
    std::vector<double> r(nz), r_p(nz);
    for (int jz = 0; jz < nz; ++jz) {
      g[jz] = std::conj(e.z.value[jz]) * ep.z.value[jz];
      r[jz] = std::norm(e.z.value[jz]);
      r_p[jz] = std::norm(ep.z.value[jz]);
      if (jz > 0) {
        const double sq = std::sqrt(double(jz));
        s1[jz] = sq * std::conj(e.z.value[jz]) * ep.z.value[jz - 1];
        s2[jz] = sq * std::conj(e.z.value[jz - 1]) * ep.z.value[jz];
        nn[jz] = double(jz) * std::conj(e.z.value[jz - 1]) * ep.z.value[jz - 1];
      }
    }
    G = shell_sum(state, convolve(axy, g));
    S1 = shell_sum(state, convolve(axy, s1));
    S2 = shell_sum(state, convolve(axy, s2));
    N = shell_sum(state, convolve(axy, nn));
    rho = shell_sum(state, convolve(mxy, r));
    rho_p = shell_sum(state, convolve(mxy_p, r_p));
  } else {
  for (int jx = 0; jx < nx; ++jx)
    for (int jy = 0; jy < ny; ++jy) {
      const complex axy = std::conj(e.x.value[jx] * e.y.value[jy]) * ep.x.value[jx] * ep.y.value[jy];
      const double mxy = std::norm(e.x.value[jx] * e.y.value[jy]);
      const double mxy_p = std::norm(ep.x.value[jx] * ep.y.value[jy]);
      for (int jz = 0; jz < nz; ++jz) {
        const double n = occ[(static_cast<size_t>(jx) * ny + jy) * nz + jz];
        G += n * axy * std::conj(e.z.value[jz]) * ep.z.value[jz];
        rho += n * mxy * std::norm(e.z.value[jz]);
        rho_p += n * mxy_p * std::norm(ep.z.value[jz]);
        if (jz > 0) {
          const double s = std::sqrt(double(jz));
          S1 += n * s * axy * std::conj(e.z.value[jz]) * ep.z.value[jz - 1];
          S2 += n * s * axy * std::conj(e.z.value[jz - 1]) * ep.z.value[jz];
          N += n * double(jz) * axy * std::conj(e.z.value[jz - 1]) * ep.z.value[jz - 1];
        }
      }
    }
  }
  const auto v = velocities_at(tr, t, pair.r.z);
  const auto vp = velocities_at(tr, t_prime, pair.r_prime.z);
  brute_flux_terms_result out;
  out.t[0] = v.v2 * vp.v2 * std::norm(G);
  out.t[1] = 0.5 * v.v3 * vp.v3 * S1 * std::conj(S2);
  out.t[2] = 0.5 * v.v3 * std::conj(vp.v3) * G * std::conj(N);
  out.t[3] = -v.v2 * vp.v3 * S1 * std::conj(G);
  out.t[4] = -vp.v2 * v.v3 * G * std::conj(S2);
  out.mean_flux = v.v2 * rho;
  out.mean_flux_prime = vp.v2 * rho_p;
  const double n0 = occ[0];
  const double p0 = std::norm(e.x.value[0] * e.y.value[0] * e.z.value[0]);
  const double p0p = std::norm(ep.x.value[0] * ep.y.value[0] * ep.z.value[0]);
  out.ground_correction = n0 * n0 * v.v2 * vp.v2 * p0 * p0p;
  return out;
}

brute_flux_corr_result brute_flux_corr(const thermal_state& state, const trap& tr, double t,
                                       double t_prime, const pair_point& pair,
                                       const truncation_spec& trunc,
                                       const flux_corr_options& options) {
  check_tail(trunc, state);
  const auto e = propagate_event(tr, trunc, t, pair.r);
  const auto ep = propagate_event(tr, trunc, t_prime, pair.r_prime);
  const auto occ = occupation_table(state, trunc);
  const int nx = trunc.n_max[0] + 1, ny = trunc.n_max[1] + 1, nz = trunc.n_max[2] + 1;
  const double v2 = velocities_at(tr, t, pair.r.z).v2;
  const double v2p = velocities_at(tr, t_prime, pair.r_prime.z).v2;

  // vertical flux matrices f_jk and f'_jk
  std::vector<complex> f(static_cast<size_t>(nz) * nz), fp(static_cast<size_t>(nz) * nz);
  for (int j = 0; j < nz; ++j)
    for (int k = 0; k < nz; ++k) {
      if (options.drop_v3) {
        f[j * nz + k] = v2 * std::conj(e.z.value[j]) * e.z.value[k];
        fp[j * nz + k] = v2p * std::conj(ep.z.value[j]) * ep.z.value[k];
      } else {
        f[j * nz + k] = flux_element(e.z, j, k);
        fp[j * nz + k] = flux_element(ep.z, j, k);
      }
    }
  // F_jk F'_kj = a_j conj(a_k) f_{jz kz} f'_{kz jz} with a_j = conj(psi_j^xy(r)) psi_j^xy(r')
  const size_t m = static_cast<size_t>(nx) * ny;
  std::vector<complex> a(m);
  std::vector<double> w(m), wp(m);
  for (int jx = 0; jx < nx; ++jx)
    for (int jy = 0; jy < ny; ++jy) {
      const complex pxy = e.x.value[jx] * e.y.value[jy];
      const complex pxy_p = ep.x.value[jx] * ep.y.value[jy];
      a[jx * ny + jy] = std::conj(pxy) * pxy_p;
      w[jx * ny + jy] = std::norm(pxy);
      wp[jx * ny + jy] = std::norm(pxy_p);
    }
  std::vector<complex> fz(static_cast<size_t>(nz) * nz);
  for (int j = 0; j < nz; ++j)
    for (int k = 0; k < nz; ++k) fz[j * nz + k] = f[j * nz + k] * fp[k * nz + j];

  complex A = 0.0;
  double mean = 0.0, mean_p = 0.0;
  for (size_t jxy = 0; jxy < m; ++jxy)
    for (int jz = 0; jz < nz; ++jz) {
      const double nj = occ[jxy * nz + jz];
      mean += nj * w[jxy] * f[jz * nz + jz].real();
      mean_p += nj * wp[jxy] * fp[jz * nz + jz].real();
      complex inner = 0.0;
      for (size_t kxy = 0; kxy < m; ++kxy) {
        const complex ak = std::conj(a[kxy]);
        const double* nk = &occ[kxy * nz];
        complex row = 0.0;
        for (int kz = 0; kz < nz; ++kz) row += nk[kz] * fz[jz * nz + kz];
        inner += ak * row;
      }
      A += nj * a[jxy] * inner;
    }
  const double n0 = occ[0];
  const complex f00 = std::norm(e.x.value[0] * e.y.value[0]) * f[0];
  const complex f00p = std::norm(ep.x.value[0] * ep.y.value[0]) * fp[0];
  brute_flux_corr_result out;
  out.mean_flux = mean;
  out.mean_flux_prime = mean_p;
  out.correlator = mean * mean_p + A.real() - n0 * n0 * (f00 * f00p).real();
  return out;
}

double brute_mean_flux(const thermal_state& state, const trap& tr, double t, const Vec3& r,
                       const truncation_spec& trunc) {
  check_tail(trunc, state);
  const auto e = propagate_event(tr, trunc, t, r);
  const auto occ = occupation_table(state, trunc);
  const int nx = trunc.n_max[0] + 1, ny = trunc.n_max[1] + 1, nz = trunc.n_max[2] + 1;
  double sum = 0.0;
  for (int jx = 0; jx < nx; ++jx)
    for (int jy = 0; jy < ny; ++jy) {
      const double wxy = std::norm(e.x.value[jx] * e.y.value[jy]);
      for (int jz = 0; jz < nz; ++jz)
        sum += occ[(static_cast<size_t>(jx) * ny + jy) * nz + jz] * wxy * flux_element(e.z, jz, jz).real();
    }
  return sum;
}

propagation_result quad_propagate(double omega, double gravity, int n, double t,
                                  const std::vector<double>& grid) {
  if (!(t > 0.0)) throw domain_error("quad_propagate needs t > 0");
  if (!(omega > 0.0)) throw domain_error("quad_propagate needs omega > 0");
  check_order(n);
  const double sigma = 1.0 / std::sqrt(omega);
  const double half_width = (12.0 + std::sqrt(2.0 * n + 1.0)) * sigma;
  constexpr int order = 20;
  const complex prefactor = std::pow(complex(0.0, 2.0 * M_PI * t), -0.5) *
                            std::polar(1.0, -gravity * gravity * t * t * t / 24.0);

  auto integrate = [&](double x, int panels) {
    const auto rule = composite_gauss_legendre(order, panels, -half_width, half_width);
    complex sum = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x0 = rule.nodes[i];
      const double psi0 = hermite_fn(n, x0, sigma);
      if (psi0 == 0.0) continue;
      const double phase = (x - x0) * (x - x0) / (2.0 * t) + 0.5 * gravity * t * (x + x0);
      sum += rule.weights[i] * psi0 * std::polar(1.0, phase);
    }
    return prefactor * sum;
  };

  propagation_result out;
  out.values.resize(grid.size());
  out.error_estimates.resize(grid.size());
  for (size_t k = 0; k < grid.size(); ++k) {
    const double x = grid[k];
    // local phase gradient sets the panel width
    const double freq = (std::abs(x) + half_width) / t + 0.5 * gravity * t + 4.0 / sigma;
    int panels = std::max(8, static_cast<int>(std::ceil(2.0 * half_width * freq / 6.0)));
    complex coarse = integrate(x, panels);
    double err = INFINITY;
    complex fine = coarse;
    for (int level = 0; level < 8; ++level) {
      panels *= 2;
      fine = integrate(x, panels);
      err = std::abs(fine - coarse);
      if (err <= 1e-13 * std::max(std::abs(fine), 1e-300) + 1e-16) break;
      coarse = fine;
    }
    const double scale = std::max(std::abs(fine), 1e-300);
    if (err > 1e-9 * scale + 1e-14)
      throw convergence_error("quad_propagate did not converge at x = " + std::to_string(x), err);
    out.values[k] = fine;
    out.error_estimates[k] = err + 1e-15 * scale;
    out.max_error = std::max(out.max_error, out.error_estimates[k]);
  }
  return out;
}

mc_estimate mc_averaged_g2(const thermal_state& state, const trap& tr, double separation,
                           const Vec3& direction, std::int64_t samples, std::uint64_t seed,
                           int threads) {
  if (samples < 2) throw domain_error("need at least two Monte Carlo samples");
  const double dn = direction.norm();
  if (!(dn > 0.0)) throw domain_error("direction must be a non-zero vector");
  const Vec3 a = (separation / dn) * direction;
  Vec3 w;
  for (int ax = 0; ax < 3; ++ax)
    w[ax] = 1.2 * tr.sigma(ax) / std::sqrt(2.0 * std::tanh(0.5 * state.tau[ax]));
  const Vec3 mid = -0.5 * a;

  constexpr int chunks = 16;
  struct partial {
    double num = 0.0, den = 0.0, num2 = 0.0, den2 = 0.0, cross = 0.0;
  };
  std::vector<partial> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (c + 1));
    std::normal_distribution<double> normal;
    const std::int64_t begin = samples * static_cast<std::int64_t>(c) / chunks;
    const std::int64_t end = samples * static_cast<std::int64_t>(c + 1) / chunks;
    partial p;
    for (std::int64_t k = begin; k < end; ++k) {
      Vec3 x;
      double log_q = 0.0;
      for (int ax = 0; ax < 3; ++ax) {
        const double u = normal(rng);
        x[ax] = mid[ax] + w[ax] * u;
        log_q += -0.5 * u * u - std::log(w[ax] * std::sqrt(2.0 * M_PI));
      }
      const auto parts_at = g2_eq_parts(state, tr, {x + a, x});
      const double iq = std::exp(-log_q);
      const double num = parts_at.g2_unnormalized * iq;
      const double den = parts_at.density * parts_at.density_prime * iq;
      p.num += num;
      p.den += den;
      p.num2 += num * num;
      p.den2 += den * den;
      p.cross += num * den;
    }
    parts[c] = p;
  });
  partial t;
  for (const auto& p : parts) {
    t.num += p.num;
    t.den += p.den;
    t.num2 += p.num2;
    t.den2 += p.den2;
    t.cross += p.cross;
  }
  const double n = static_cast<double>(samples);
  const double ratio = t.num / t.den;
  const double mean_den = t.den / n;
  // variance of num - ratio * den
  const double m2 = (t.num2 - 2.0 * ratio * t.cross + ratio * ratio * t.den2) / n;
  const double var = std::max(0.0, m2) * n / (n - 1.0);
  mc_estimate out;
  out.value = ratio;
  out.std_error = std::sqrt(var / n) / mean_den;
  out.samples = samples;
  return out;
}

}  // namespace oracle
}  // namespace hbt
