#include "hbt/series.hpp"

#include <algorithm>
#include <sstream>

namespace hbt {

void series_report::merge(const series_report& other) {
  terms = std::max(terms, other.terms);
  tail_estimate = std::max(tail_estimate, other.tail_estimate);
  capped = capped || other.capped;
}

std::string series_report::describe() const {
  std::ostringstream os;
  os << "terms=" << terms << " tail=" << tail_estimate << (capped ? " capped" : "");
  return os.str();
}

std::int64_t bose_guard_index(double tau_min, double spread) {
  const double need = std::log(10.0 * (1.0 + 4.0 * std::max(spread, 0.0)));
  const double l = std::ceil(need / tau_min);
  if (!(l < 1e12)) return std::int64_t{1'000'000'000'000};
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(l));
}

}  // namespace hbt
