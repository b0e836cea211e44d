#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>

namespace hbt {

// Truncation control shared by every Bose sum over l.
struct series_policy {
  double rel_tol = 1e-14;
  std::int64_t max_terms = 1'000'000;
};

struct series_report {
  std::int64_t terms = 0;
  double tail_estimate = 0.0;  // estimated |omitted tail| / |sum|
  bool capped = false;

  void merge(const series_report& other);
  std::string describe() const;
};

template <class T>
struct series_result {
  T value{};
  series_report report;
};

// Index from which consecutive terms of a Bose l-series shrink at least by
// z e^{-tau_min}: the position dependent exponent is bounded by
// spread * e^{-l tau_min}, so the guard grows like ln(spread) / tau_min.
std::int64_t bose_guard_index(double tau_min, double spread);

// Sums term(l) for l = 1, 2, ... . Past the guard index the terms are assumed
// to shrink like z^l e^{-l tau_min}; before it nothing is assumed and the sum
// never stops there.
template <class T, class Term>
series_result<T> sum_bose_series(Term&& term, double z, double tau_min, double spread,
                                 const series_policy& policy) {
  series_result<T> out;
  const std::int64_t guard = bose_guard_index(tau_min, spread);
  const double q_late = z * std::exp(-tau_min);
  T sum{};
  for (std::int64_t l = 1;; ++l) {
    const T t = term(l);
    sum += t;
    const double mag = std::abs(t);
    const double total = std::abs(sum);
    if (l >= guard && q_late < 1.0) {
      const double tail = mag * q_late / (1.0 - q_late);
      if (tail <= policy.rel_tol * total || total == 0.0) {
        out.report.terms = l;
        out.report.tail_estimate = total > 0.0 ? tail / total : 0.0;
        break;
      }
    }
    if (l >= policy.max_terms) {
      out.report.terms = l;
      out.report.capped = true;
      out.report.tail_estimate =
          total > 0.0 && q_late < 1.0 ? mag * q_late / (1.0 - q_late) / total : INFINITY;
      break;
    }
  }
  out.value = sum;
  return out;
}

}  // namespace hbt
