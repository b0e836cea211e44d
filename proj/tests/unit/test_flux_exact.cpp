#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hbt/flux_exact.hpp"
#include "hbt/oracle.hpp"
#include "reference.hpp"

namespace {

using namespace hbt;

TEST(KernelGu, OriginValue) {
  for (const double sigma : {1.0, 1.7})
    for (const double u : {0.05, 0.7, 3.0})
      EXPECT_NEAR(kernel_gu(0, 0, u, sigma).real(),
                  1.0 / (sigma * std::sqrt(M_PI * -std::expm1(-2 * u))), 1e-14);
}

TEST(KernelGu, MatchesModeSum) {
  for (const double sigma : {1.0, 0.6}) {
    const double x = 0.3 * sigma, xp = -0.2 * sigma;
    for (const complex u : {complex(0.7, 0.0), complex(0.7, -0.1), complex(0.7, 0.4)}) {
      // plain sum over hermite_fn values, n <= 60
      complex ref = 0.0;
      for (int n = 0; n <= 60; ++n) ref += hermite_fn(n, x, sigma) * hermite_fn(n, xp, sigma) * std::exp(-double(n) * u);
      EXPECT_LT(std::abs(kernel_gu(x, xp, u, sigma) - ref), 1e-10);
      EXPECT_LT(std::abs(kernel_gu(x, xp, u, sigma) - oracle::brute_kernel_gu(x, xp, u, sigma, 60)), 1e-10);
    }
  }
}

TEST(KernelGu, RejectsNonPositiveRealPart) {
  EXPECT_THROW(kernel_gu(0.1, 0.2, complex(0.0, 0.3)), domain_error);
  EXPECT_THROW(sqrt_series(0.1, 0.2, complex(-0.1, 0.0), sqrt_variant::lower), domain_error);
  EXPECT_THROW(n_series(0.1, 0.2, complex(0.0, 0.0)), domain_error);
}

TEST(KernelGu, LargeRealPartStaysFinite) {
  const complex v = kernel_gu(0.3, 0.1, complex(5000.0, 0.2));
  EXPECT_TRUE(std::isfinite(v.real()) && std::isfinite(v.imag()));
  EXPECT_NEAR(std::abs(v), std::abs(hermite_fn(0, 0.3) * hermite_fn(0, 0.1)), 1e-14);
}

TEST(SqrtSeries, EqualArgumentsAgree) {
  for (const complex u : {complex(0.4, 0.0), complex(1.3, 0.2)})
    for (const double x : {-0.7, 0.0, 0.5})
      EXPECT_LT(std::abs(sqrt_series(x, x, u, sqrt_variant::lower) - sqrt_series(x, x, u, sqrt_variant::upper)),
                1e-15);
}

TEST(SqrtSeries, MatchesModeSum) {
  for (const double sigma : {1.0, 1.4}) {
    const double x = 0.5 * sigma, xp = 0.1 * sigma;
    for (const complex u : {complex(0.9, 0.0), complex(0.9, 0.3)}) {
      complex lower = 0.0, upper = 0.0;
      for (int n = 1; n <= 80; ++n) {
        const complex w = std::sqrt(double(n)) * std::exp(-double(n) * u);
        lower += w * hermite_fn(n - 1, x, sigma) * hermite_fn(n, xp, sigma);
        upper += w * hermite_fn(n, x, sigma) * hermite_fn(n - 1, xp, sigma);
      }
      EXPECT_LT(std::abs(sqrt_series(x, xp, u, sqrt_variant::lower, sigma) - lower), 1e-10);
      EXPECT_LT(std::abs(sqrt_series(x, xp, u, sqrt_variant::upper, sigma) - upper), 1e-10);
    }
  }
}

TEST(SqrtSeries, LowerVanishesOnItsNode) {
  for (const complex u : {complex(0.3, 0.0), complex(0.8, 0.0)}) {
    const double xp = 0.4;
    const double x = std::exp(u.real()) * xp;
    EXPECT_LT(std::abs(sqrt_series(x, xp, u, sqrt_variant::lower)), 1e-15);
    EXPECT_LT(std::abs(oracle::brute_sqrt_series_lower(x, xp, u, 1.0, 120)), 1e-12);
    EXPECT_LT(std::abs(sqrt_series(xp, x, u, sqrt_variant::upper)), 1e-15);
  }
}

TEST(SqrtSeries, LadderIdentity) {
  // x g_u = sigma / sqrt 2 (lower + e^u upper)
  for (const double sigma : {1.0, 0.7})
    for (const complex u : {complex(0.6, 0.0), complex(1.2, -0.4)}) {
      const double x = 0.45 * sigma, xp = -0.3 * sigma;
      const complex lhs = x * kernel_gu(x, xp, u, sigma);
      const complex rhs = sigma / std::sqrt(2.0) *
                          (sqrt_series(x, xp, u, sqrt_variant::lower, sigma) +
                           std::exp(u) * sqrt_series(x, xp, u, sqrt_variant::upper, sigma));
      EXPECT_LT(std::abs(lhs - rhs), 1e-13);
    }
}

TEST(NSeries, OriginBracket) {
  for (const complex u : {complex(0.5, 0.0), complex(1.5, 0.3)}) {
    const complex ref = std::exp(-u) * kernel_gu(0, 0, u) / (1.0 - std::exp(-2.0 * u));
    EXPECT_LT(std::abs(n_series(0, 0, u) - ref), 1e-14);
  }
}

TEST(NSeries, MatchesModeSum) {
  for (const complex u : {complex(1.1, 0.0), complex(1.1, 0.25)}) {
    const double x = 0.4, xp = 0.4;
    complex ref = 0.0;
    for (int n = 1; n <= 80; ++n) ref += double(n) * hermite_fn(n - 1, x) * hermite_fn(n - 1, xp) * std::exp(-double(n) * u);
    EXPECT_LT(std::abs(n_series(x, xp, u) - ref), 1e-10);
    EXPECT_LT(std::abs(n_series(x, xp, u) - oracle::brute_n_series(x, xp, u, 1.0, 80)), 1e-10);
  }
}

TEST(NSeries, DerivativeIdentity) {
  const double h = 1e-5;
  for (const complex u : {complex(0.8, 0.0), complex(1.1, 0.3)})
    for (const double x : {0.0, 0.3, -0.6}) {
      const double xp = 0.25;
      const complex dg = (kernel_gu(x, xp, u + h, 1.0) - kernel_gu(x, xp, u - h, 1.0)) / (2 * h);
      const complex ref = std::exp(-u) * (kernel_gu(x, xp, u) - dg);
      EXPECT_LT(std::abs(n_series(x, xp, u) - ref), 1e-6);
    }
}

TEST(G1b3d, RealArgumentReproducesEquilibrium) {
  const trap tr{{0.6, 1.0, 1.5}, 0.0, 1.0};
  const auto st = solve_fugacity(tr, 20.0, 3e3);
  for (const pair_point p : {pair_point{{0.3, -0.2, 0.5}, {0.1, 0.0, 0.7}}, pair_point{{2.0, 1.0, -1.0}, {2.0, 1.0, -1.0}}}) {
    const auto s = bose_g1b_sum(st, tr, p, Vec3{});
    const double ref = g1_eq(st, tr, p);
    EXPECT_NEAR(s.value.real(), ref, 1e-10 * ref);
    EXPECT_NEAR(s.value.imag(), 0.0, 1e-14 * ref);
  }
}

TEST(G1b3d, SeparatesIntoAxisKernels) {
  const auto tr = trap::isotropic(1.3);
  const double x = 0.35;
  const pair_point p{{x, x, x}, {-x, -x, -x}};
  const complex u(0.9, 0.0);
  const complex k = kernel_gu(x, -x, u, tr.sigma(0));
  EXPECT_LT(std::abs(g1b_3d(tr, p, {u, u, u}) - k * k * k), 1e-15);
  const std::array<complex, 3> us{complex(0.7, 0.1), complex(0.9, -0.2), complex(1.4, 0.0)};
  const pair_point q{{0.2, -0.4, 0.3}, {0.5, 0.1, -0.2}};
  complex prod = 1.0;
  for (int a = 0; a < 3; ++a) prod *= kernel_gu(q.r[a], q.r_prime[a], us[a], tr.sigma(a));
  EXPECT_LT(std::abs(g1b_3d(tr, q, us) - prod), 1e-15);
}

TEST(G1b3d, ContinuousInPhaseShift) {
  const trap tr{{0.6, 1.0, 1.5}, 0.0, 1.0};
  const auto st = state_from_fugacity(tr, 5.0, 0.3);
  const pair_point p{{0.3, -0.2, 0.5}, {0.1, 0.0, 0.7}};
  const complex base = bose_g1b_sum(st, tr, p, Vec3{}).value;
  double prev = 0.0;
  for (const double d : {0.0025, 0.005, 0.01}) {
    const double dist = std::abs(bose_g1b_sum(st, tr, p, uniform(d)).value - base);
    EXPECT_LT(dist, 50.0 * d * std::abs(base));
    EXPECT_GT(dist, prev);
    prev = dist;
  }
}

// Desk-scale cloud: omega = 1, T = 2 (tau_z = 0.5, s_z = sqrt 2), H = 100 s_z, t0 = 30.
struct desk {
  double height = 100.0 * std::sqrt(2.0);
  trap tr{uniform(1.0), 2.0 * 100.0 * std::sqrt(2.0) / 900.0, 100.0 * std::sqrt(2.0)};
  thermal_state st = state_from_fugacity(tr, 2.0, 1e-4);
  double t0 = fall_time(tr);
};

TEST(FluxTerms, EqualTimeSymmetries) {
  const desk d;
  const auto p = plane_pair(d.tr, 0.3, -0.2, 0.1, 0.4);
  for (const double t : {d.t0 - 0.5, d.t0, d.t0 + 1.0}) {
    const auto ft = compute_flux_terms(d.st, d.tr, t, t, p);
    EXPECT_EQ(ft.t[0].imag(), 0.0);
    EXPECT_LT(std::abs(ft.t[3].real()), 1e-14 * ft.t[0].real());
    EXPECT_LT(std::abs(ft.t[4].real()), 1e-14 * ft.t[0].real());
    EXPECT_LT(std::abs(ft.t[1].imag()), 1e-12 * std::abs(ft.t[1]));
    EXPECT_LT(std::abs(ft.t[2].imag()), 1e-12 * std::abs(ft.t[2]));
  }
}

TEST(FluxTerms, LeadingTermIsSnapshotNumerator) {
  const desk d;
  const auto p = plane_pair(d.tr, 0.3, -0.2, 0.1, 0.4);
  for (const double t : {d.t0 - 0.5, d.t0 + 1.0}) {
    const auto ft = compute_flux_terms(d.st, d.tr, t, t, p);
    const double norm = ft.mean_flux * ft.mean_flux_prime;
    const double g2 = 1.0 + (ft.t[0].real() - ft.ground_correction) / norm;
    EXPECT_NEAR(g2, g2_flux_leading(d.st, d.tr, t, t, p), 1e-12);
    EXPECT_NEAR(ft.mean_flux / mean_flux(d.st, d.tr, t, p.r), 1.0, 1e-13);
  }
}

TEST(FluxTerms, VelocityTermsSmallForTallDrop) {
  // s_z / H = 1e-5
  const double height = 1e5 * std::sqrt(2.0), t0 = 600.0;
  const trap tr{uniform(1.0), 2 * height / (t0 * t0), height};
  const auto st = state_from_fugacity(tr, 2.0, 1e-4);
  const auto ft = compute_flux_terms(st, tr, t0, t0, plane_pair(tr, 0, 0, 0, 0));
  EXPECT_LT(std::abs(ft.t[1]) / ft.t[0].real(), 1e-9);
  EXPECT_LT(std::abs(ft.t[2]) / ft.t[0].real(), 1e-9);
}

TEST(FluxTerms, ConjugatePathAgrees) {
  const desk d;
  const auto p = plane_pair(d.tr, 0.3, -0.2, 0.1, 0.4);
  flux_options conj;
  conj.conjugate_path = true;
  for (const double dt : {0.0, 0.7, -1.9}) {
    const auto a = compute_flux_terms(d.st, d.tr, d.t0 + dt, d.t0 - dt / 3, p);
    const auto b = compute_flux_terms(d.st, d.tr, d.t0 + dt, d.t0 - dt / 3, p, conj);
    EXPECT_NEAR(a.total, b.total, 1e-13 * std::abs(a.total));
  }
}

TEST(FluxTerms, RejectsOffPlanePair) {
  const desk d;
  EXPECT_THROW(compute_flux_terms(d.st, d.tr, d.t0, d.t0, {{0, 0, d.height}, {0, 0, d.height + 1}}), domain_error);
}

TEST(FluxExact, DeskScaleCentralDeviation) {
  const desk d;
  flux_options single;
  single.single_term = true;
  const auto f = g2_flux_exact(d.st, d.tr, d.t0, d.t0, plane_pair(d.tr, 0, 0, 0, 0), single);
  const double sz = cloud_size(d.tr, d.st).z;
  EXPECT_NEAR(sz / d.height, 1e-2, 1e-15);
  const double tz = d.st.tau.z;
  const double predicted = 0.125 * std::pow(sz / d.height, 2) * (1 - tz * tz / 6);
  EXPECT_NEAR(f.deviation_from_two / predicted, 1.0, 0.1);
  EXPECT_NEAR(f.higher_order / predicted, 1.0, 0.1);
}

TEST(FluxExact, EnvelopeMatchesCoherenceTime) {
  const desk d;
  flux_options single;
  single.single_term = true;
  const double tc = make_coherence_scales(d.st, d.tr, d.t0).t_coh;
  const auto p = plane_pair(d.tr, 0, 0, 0, 0);
  std::vector<double> x, y;
  for (int k = 1; k <= 20; ++k) {
    const double dt = 2 * tc * k / 20;
    x.push_back(dt * dt);
    y.push_back(std::log(g2_flux_exact(d.st, d.tr, d.t0 + dt / 2, d.t0 - dt / 2, p, single).g2 - 1.0));
  }
  const double fitted = std::sqrt(-1.0 / reference::slope_through_origin(x, y));
  const double env = epsilon_correction(d.st, d.tr, d.t0, d.t0).envelope_factor;
  // the correction widens the envelope by env; the fit lies between the bare formula and that
  EXPECT_GE(fitted / tc, 1.0);
  EXPECT_LE(fitted / tc, env);
  EXPECT_NEAR(fitted / (tc * env), 1.0, 5e-3);
}

TEST(FluxExact, CloseToLeadingOnTimeGrid) {
  const desk d;
  const double tc = make_coherence_scales(d.st, d.tr, d.t0).t_coh;
  const double sz = cloud_size(d.tr, d.st).z;
  const auto p = plane_pair(d.tr, 0.2, 0, -0.1, 0.3);
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) {
      const double t = d.t0 + i * tc, tp = d.t0 + j * tc;
      const auto f = g2_flux_exact(d.st, d.tr, t, tp, p);
      const double eps = epsilon_correction(d.st, d.tr, t, tp).value;
      const double bound = std::max(1e-6, 2 * std::abs(eps) + 0.25 * std::pow(sz / d.height, 2));
      EXPECT_LE(std::abs(f.g2 - f.leading), bound) << i << " " << j;
    }
}

TEST(ShotNoise, WeightFormula) {
  const desk d;
  const double t = d.t0 - 0.4;
  const auto p = plane_pair(d.tr, 0.3, -0.1, 0.3, -0.1);
  const auto rec = shot_noise_expanded(d.st, d.tr, t, p);
  const auto f = make_scaled_frame(d.tr, t);
  double vol2 = 1.0;
  for (int a = 0; a < 3; ++a) vol2 *= 1.0 + std::pow(d.tr.omega[a] * t, 2);
  const double v2 = velocities(d.tr, t).v2;
  EXPECT_NEAR(rec.weight, v2 * v2 / vol2 * density_eq(d.st, d.tr, f.map(p.r)), 1e-15 * rec.weight);
  EXPECT_EQ(rec.location, f.map(p.r));
  EXPECT_EQ(shot_noise_expanded(d.st, d.tr, 0.0, {{0, 0, d.height}, {0, 0, d.height}}).weight, 0.0);
  EXPECT_EQ(g2_flux_exact(d.st, d.tr, t, t + 0.1, p).shot_noise.weight, 0.0);
}

TEST(ShotNoise, WholeCloudRatioIsInverseAtomNumber) {
  // fall speed g t = 200 against a thermal spread ~ 12: v2 is nearly uniform over the cloud
  const auto tr = trap::isotropic(1.0, 10.0, 1e6);
  const double t = 20.0;
  const auto f = make_scaled_frame(tr, t);
  const double vol = f.volume_factor();
  for (const double n : {1e5, 1e6}) {
    const auto st = solve_fugacity(tr, 150.0, n);
    const double width = std::sqrt(2.0) * cloud_size(tr, st).x;
    auto detector_point = [&](const Vec3& rs) {
      return Vec3{rs.x * f.dilation.x, rs.y * f.dilation.y, rs.z * f.dilation.z + f.fall};
    };
    // d^3 r = vol d^3 r~ and delta(r - r') = delta(r~ - r~') / vol
    const double shot = vol * vol * reference::integrate_space(
                                        [&](const Vec3& rs) {
                                          const Vec3 r = detector_point(rs);
                                          return shot_noise_expanded(st, tr, t, {r, r}).weight;
                                        },
                                        {}, uniform(width), 16);
    const double flux = vol * reference::integrate_space(
                                  [&](const Vec3& rs) { return mean_flux(st, tr, t, detector_point(rs)); }, {},
                                  uniform(width), 16);
    const double ratio = shot / (flux * flux);
    EXPECT_GE(ratio * n, 1.0 - 1e-6);
    EXPECT_LE(ratio * n, 1.01);
    if (n == 1e6) EXPECT_LT(ratio, 1e-5);
  }
}

TEST(Epsilon, CoincidentValue) {
  const desk d;
  const auto e = epsilon_correction(d.st, d.tr, d.t0, d.t0);
  const double sz = cloud_size(d.tr, d.st).z;
  const double tz = d.st.tau.z;
  EXPECT_NEAR(e.value, 0.125 * std::pow(sz / d.height, 2) * (1 - tz * tz / 6), 1e-20);
  EXPECT_EQ(e.separation_part, 0.0);
  EXPECT_TRUE(e.valid);
}

TEST(Epsilon, SeparationTerm) {
  const desk d;
  const double dt = 1.5;
  const auto e = epsilon_correction(d.st, d.tr, d.t0 + dt, d.t0 - dt);
  const double tz = d.st.tau.z;
  const double w = d.tr.omega.z * d.t0 * tz;
  EXPECT_NEAR(e.separation_part, 1.5 / (w * w) * std::pow(2 * dt / d.t0, 2) * (1 + tz / 3), 1e-18);
  EXPECT_NEAR(e.value, e.coincident_part - e.separation_part, 1e-20);
}

TEST(Epsilon, FlagsLargeOffsets) {
  const desk d;
  const auto e = epsilon_correction(d.st, d.tr, 1.5 * d.t0, d.t0);
  EXPECT_FALSE(e.valid);
  EXPECT_FALSE(e.warning.empty());
}

TEST(MeanFluxTheorem, CrossTermVanishes) {
  const trap tr{{0.7, 1.0, 1.3}, 0.05, 20.0};
  const auto st = solve_fugacity(tr, 12.0, 500.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const double t = 0.1 + 25.0 * u(rng);
    const auto f = make_scaled_frame(tr, t);
    const Vec3 r{4 * f.dilation.x * (u(rng) - 0.5), 4 * f.dilation.y * (u(rng) - 0.5),
                 f.fall + 4 * f.dilation.z * (u(rng) - 0.5)};
    const auto parts = mean_flux_literal(st, tr, t, r);
    const double v2rho = velocities_at(tr, t, r.z).v2 * mean_density_t(st, tr, t, r);
    EXPECT_NEAR(parts.v2_term, v2rho, 1e-14 * std::abs(v2rho));
    EXPECT_LE(std::abs(parts.total() - v2rho), 1e-13 * std::abs(v2rho)) << k;
  }
}

}  // namespace
