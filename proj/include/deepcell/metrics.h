#ifndef DEEPCELL_METRICS_H_
#define DEEPCELL_METRICS_H_

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "deepcell/domain.h"

namespace deepcell {

double euclidean_error(const PlanarPoint& estimate, const PlanarPoint& truth);

// Nearest-rank quantiles of a localization error sample, in meters.
struct ErrorSummary {
  double min = 0.0;
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
  double max = 0.0;
  std::vector<double> sorted_errors;

  // (error, fraction of samples with error <= it), one pair per sample.
  std::vector<std::pair<double, double>> cdf() const;

  friend bool operator==(const ErrorSummary&, const ErrorSummary&) = default;
};

// Value at 1-based rank ceil(q * n) of the sorted list (rank 1 for q = 0).
double nearest_rank(std::span<const double> sorted, double q);

ErrorSummary summarize(std::span<const double> errors);

// Two columns "error_m fraction", one row per sample.
void write_cdf(std::ostream& out, const ErrorSummary& summary);
// JSON object with the quantiles and the sorted errors, exact doubles.
std::string summary_to_json(const ErrorSummary& summary);

}  // namespace deepcell

#endif  // DEEPCELL_METRICS_H_
