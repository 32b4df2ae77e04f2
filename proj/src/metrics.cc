#include "deepcell/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "deepcell/errors.h"
#include "json.hpp"

namespace deepcell {

double euclidean_error(const PlanarPoint& estimate, const PlanarPoint& truth) {
  const double dx = estimate.x - truth.x;
  const double dy = estimate.y - truth.y;
  return std::sqrt(dx * dx + dy * dy);
}

double nearest_rank(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidInput("quantile of an empty list");
  const auto n = static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::ceil(q * n));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

ErrorSummary summarize(std::span<const double> errors) {
  if (errors.empty()) throw InvalidInput("cannot summarize an empty error list");
  ErrorSummary s;
  s.sorted_errors.assign(errors.begin(), errors.end());
  for (double e : s.sorted_errors) {
    if (!(e >= 0.0) || !std::isfinite(e)) {
      throw InvalidInput("errors must be finite and non-negative");
    }
  }
  std::sort(s.sorted_errors.begin(), s.sorted_errors.end());
  s.min = s.sorted_errors.front();
  s.p25 = nearest_rank(s.sorted_errors, 0.25);
  s.median = nearest_rank(s.sorted_errors, 0.50);
  s.p75 = nearest_rank(s.sorted_errors, 0.75);
  s.max = s.sorted_errors.back();
  return s;
}

std::vector<std::pair<double, double>> ErrorSummary::cdf() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(sorted_errors.size());
  const auto n = static_cast<double>(sorted_errors.size());
  for (std::size_t i = 0; i < sorted_errors.size(); ++i) {
    out.emplace_back(sorted_errors[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

void write_cdf(std::ostream& out, const ErrorSummary& summary) {
  char buf[64];
  for (const auto& [err, frac] : summary.cdf()) {
    std::snprintf(buf, sizeof buf, "%.6f %.6f\n", err, frac);
    out << buf;
  }
}

std::string summary_to_json(const ErrorSummary& summary) {
  nlohmann::ordered_json j;
  j["min"] = summary.min;
  j["p25"] = summary.p25;
  j["median"] = summary.median;
  j["p75"] = summary.p75;
  j["max"] = summary.max;
  j["count"] = summary.sorted_errors.size();
  j["errors"] = summary.sorted_errors;
  return j.dump();
}

}  // namespace deepcell
