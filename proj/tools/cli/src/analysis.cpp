#include "hbt_cli/analysis.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "hbt/types.hpp"

namespace hbt::cli {

namespace {

struct linear_fit {
  double a = 0.0, b = 0.0, sse = 0.0;
};

linear_fit fit_at(const std::vector<double>& r, const std::vector<double>& y, double w, bool fixed) {
  double see = 0.0, se = 0.0, sy = 0.0, sey = 0.0;
  const double n = static_cast<double>(r.size());
  std::vector<double> e(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    e[k] = std::exp(-r[k] * r[k] / (2.0 * w * w));
    see += e[k] * e[k];
    se += e[k];
    sy += y[k];
    sey += e[k] * y[k];
  }
  linear_fit f;
  if (fixed) {
    f.b = 1.0;
    f.a = see > 0.0 ? (sey - se) / see : 0.0;
  } else {
    const double det = n * see - se * se;
    if (std::abs(det) < 1e-300 * std::max(1.0, n * see)) return {0.0, sy / n, INFINITY};
    f.a = (n * sey - se * sy) / det;
    f.b = (see * sy - se * sey) / det;
  }
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double d = y[k] - f.b - f.a * e[k];
    f.sse += d * d;
  }
  return f;
}

double minimize_log(const std::function<double(double)>& sse, double lo, double hi) {
  constexpr int grid = 200;
  double best = lo, best_v = std::numeric_limits<double>::infinity();
  const double step = (std::log(hi) - std::log(lo)) / grid;
  for (int k = 0; k <= grid; ++k) {
    const double w = std::exp(std::log(lo) + k * step);
    const double v = sse(w);
    if (v < best_v) {
      best_v = v;
      best = w;
    }
  }
  double a = std::log(best) - step, b = std::log(best) + step;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = sse(std::exp(c)), fd = sse(std::exp(d));
  for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = sse(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = sse(std::exp(d));
    }
  }
  return std::exp(0.5 * (a + b));
}

}  // namespace

gaussian_fit_result fit_gaussian(const std::vector<double>& r, const std::vector<double>& y) {
  if (r.size() != y.size() || r.size() < 4) throw domain_error("gaussian fit needs >= 4 matching samples");
  double rmax = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    rmax = std::max(rmax, std::abs(r[k]));
    mean += y[k];
  }
  if (!(rmax > 0.0)) throw domain_error("gaussian fit needs a non-degenerate abscissa");
  mean /= static_cast<double>(y.size());
  double sst = 0.0;
  for (double v : y) sst += (v - mean) * (v - mean);

  const double lo = 1e-3 * rmax, hi = 1e2 * rmax;
  gaussian_fit_result out;
  const double w = minimize_log([&](double x) { return fit_at(r, y, x, false).sse; }, lo, hi);
  const auto f = fit_at(r, y, w, false);
  out.width = w;
  out.amplitude = f.a;
  out.baseline = f.b;
  out.r_squared = sst > 0.0 ? 1.0 - f.sse / sst : 1.0;
  const double wf = minimize_log([&](double x) { return fit_at(r, y, x, true).sse; }, lo, hi);
  const double sse_fixed = fit_at(r, y, wf, true).sse;
  out.r_squared_fixed_baseline = sst > 0.0 ? 1.0 - sse_fixed / sst : 1.0;
  return out;
}

}  // namespace hbt::cli
