#include "reference.hpp"

#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "hbt/quadrature.hpp"

namespace hbt::reference {

double partial_bose(double a, double x, long long terms) {
  double sum = 0.0, c = 0.0;  // Kahan
  for (long long l = 1; l <= terms; ++l) {
    const double y = std::pow(x, static_cast<double>(l)) / std::pow(static_cast<double>(l), a) - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

double bose_tail_bound(double a, double x, long long terms) {
  const double l = static_cast<double>(terms);
  if (x >= 1.0) return std::pow(l, 1.0 - a) / (a - 1.0);
  return std::pow(x, l + 1.0) / std::pow(l + 1.0, a) / (1.0 - x);
}

double direct_atom_number(const Vec3& tau, double z, double rel_tol) {
  double sum = 0.0;
  for (long long l = 1; l < 100000000; ++l) {
    double p = std::pow(z, static_cast<double>(l));
    for (int a = 0; a < 3; ++a) p /= -std::expm1(-static_cast<double>(l) * tau[a]);
    sum += p;
    // every later term is at most z^{l'} / prod(1 - e^{-tau}) <= the current term's z-geometric tail
    const double pl = std::pow(z, static_cast<double>(l));
    double bound = pl * z / (1.0 - z);
    for (int a = 0; a < 3; ++a) bound /= -std::expm1(-static_cast<double>(l) * tau[a]);
    if (bound < rel_tol * sum) break;
  }
  return sum;
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 25, tol);
}

double integrate_line(const std::function<double(double)>& f, double width, int nodes) {
  const auto rule = gauss_hermite(nodes);
  double sum = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double x = rule.nodes[k];
    sum += rule.weights[k] * std::exp(x * x) * f(width * x);
  }
  return width * sum;
}

double integrate_space(const std::function<double(const Vec3&)>& f, const Vec3& centre, const Vec3& widths,
                       int nodes) {
  const auto rule = gauss_hermite(nodes);
  const std::size_t n = rule.nodes.size();
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = rule.weights[k] * std::exp(rule.nodes[k] * rule.nodes[k]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        const Vec3 r{centre.x + widths.x * rule.nodes[i], centre.y + widths.y * rule.nodes[j],
                     centre.z + widths.z * rule.nodes[k]};
        sum += w[i] * w[j] * w[k] * f(r);
      }
  return widths.product() * sum;
}

double integrate_box(const std::function<double(const Vec3&)>& f, const Vec3& lo, const Vec3& hi, int nodes,
                     int panels) {
  std::array<quadrature_rule, 3> rules;
  for (int a = 0; a < 3; ++a) rules[a] = composite_gauss_legendre(nodes, panels, lo[a], hi[a]);
  double sum = 0.0;
  for (std::size_t i = 0; i < rules[0].nodes.size(); ++i)
    for (std::size_t j = 0; j < rules[1].nodes.size(); ++j)
      for (std::size_t k = 0; k < rules[2].nodes.size(); ++k)
        sum += rules[0].weights[i] * rules[1].weights[j] * rules[2].weights[k] *
               f({rules[0].nodes[i], rules[1].nodes[j], rules[2].nodes[k]});
  return sum;
}

double slope_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += x[k] * y[k];
    sxx += x[k] * x[k];
  }
  return sxy / sxx;
}

}  // namespace hbt::reference
