#ifndef DEEPCELL_ESTIMATOR_H_
#define DEEPCELL_ESTIMATOR_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deepcell/domain.h"
#include "deepcell/grid.h"
#include "deepcell/model.h"

namespace deepcell {

struct LocationEstimate {
  CellIndex cell;             // most probable cell
  PlanarPoint cell_center;    // its centroid
  PlanarPoint fused;          // probability-weighted centroid
  std::vector<double> distribution;
  double confidence = 0.0;    // max probability
  bool low_confidence = false;  // record heard no registered tower
};

struct CellEstimate {
  CellIndex cell;
  double confidence = 0.0;
  bool low_confidence = false;
};

struct EstimatorOptions {
  // Fuse only the n most probable cells (renormalized); 0 uses all of them.
  std::size_t top_n = 0;
};

// First index of the maximum; throws on an empty distribution.
CellIndex argmax_cell(std::span<const double> distribution);

// Sum over cells of centroid * probability.
PlanarPoint fuse(std::span<const double> distribution, const VirtualGrid& grid,
                 std::size_t top_n = 0);

CellEstimate estimate_cell(const NetworkModel& net,
                           const ProviderRecord& record);
LocationEstimate estimate_location(const NetworkModel& net,
                                   const ProviderRecord& record,
                                   const EstimatorOptions& options = {});

// Same as estimate_location for an already built feature vector.
LocationEstimate estimate_from_features(const NetworkModel& net,
                                        const FeatureVector& features,
                                        const EstimatorOptions& options = {});

// Latest provider record per phone.
class RecordStore {
 public:
  RecordStore() = default;
  explicit RecordStore(std::span<const ProviderRecord> records);

  void add(const ProviderRecord& record);
  std::size_t size() const { return latest_.size(); }

  // Most recent record by timestamp; throws NotFound for unknown phones.
  const ProviderRecord& fetch_by_phone_id(const std::string& phone_id) const;

 private:
  std::map<std::string, ProviderRecord> latest_;
};

// One-line JSON: phone id, cell, fused lat/lon, confidence.
std::string render_estimate(const std::string& phone_id,
                            const LocationEstimate& estimate,
                            const GeoPoint& origin);

}  // namespace deepcell

#endif  // DEEPCELL_ESTIMATOR_H_
