#include "deepcell/estimator.h"

#include <algorithm>
#include <numeric>

#include "deepcell/errors.h"
#include "json.hpp"

namespace deepcell {

CellIndex argmax_cell(std::span<const double> distribution) {
  if (distribution.empty()) throw InvalidInput("empty distribution");
  // max_element returns the first maximum, so ties go to the lowest index.
  return {static_cast<std::size_t>(
      std::max_element(distribution.begin(), distribution.end()) -
      distribution.begin())};
}

PlanarPoint fuse(std::span<const double> distribution, const VirtualGrid& grid,
                 std::size_t top_n) {
  if (distribution.size() != grid.cell_count()) {
    throw InvalidInput("distribution length does not match grid");
  }
  std::vector<std::size_t> cells(distribution.size());
  std::iota(cells.begin(), cells.end(), 0);
  if (top_n > 0 && top_n < cells.size()) {
    std::stable_sort(cells.begin(), cells.end(),
                     [&](std::size_t a, std::size_t b) {
                       return distribution[a] > distribution[b];
                     });
    cells.resize(top_n);
    std::sort(cells.begin(), cells.end());
  }
  double mass = 0.0;
  PlanarPoint fused{0.0, 0.0};
  for (std::size_t c : cells) {
    const PlanarPoint center = grid.centroid({c});
    fused.x += center.x * distribution[c];
    fused.y += center.y * distribution[c];
    mass += distribution[c];
  }
  if (top_n > 0 && mass > 0.0) {
    fused.x /= mass;
    fused.y /= mass;
  }
  return fused;
}

LocationEstimate estimate_from_features(const NetworkModel& net,
                                        const FeatureVector& features,
                                        const EstimatorOptions& options) {
  LocationEstimate est;
  est.distribution = net.cell_distribution(features);
  est.cell = argmax_cell(est.distribution);
  est.confidence = est.distribution[est.cell.value];
  est.cell_center = net.grid().centroid(est.cell);
  est.fused = fuse(est.distribution, net.grid(), options.top_n);
  est.low_confidence = features.heard_count() == 0;
  return est;
}

CellEstimate estimate_cell(const NetworkModel& net,
                           const ProviderRecord& record) {
  const auto est = estimate_location(net, record);
  return {est.cell, est.confidence, est.low_confidence};
}

LocationEstimate estimate_location(const NetworkModel& net,
                                   const ProviderRecord& record,
                                   const EstimatorOptions& options) {
  return estimate_from_features(
      net, build_feature_vector(record, net.registry()).features, options);
}

RecordStore::RecordStore(std::span<const ProviderRecord> records) {
  for (const auto& r : records) add(r);
}

void RecordStore::add(const ProviderRecord& record) {
  auto [it, inserted] = latest_.try_emplace(record.phone_id, record);
  if (!inserted && record.timestamp_ms > it->second.timestamp_ms) {
    it->second = record;
  }
}

const ProviderRecord& RecordStore::fetch_by_phone_id(
    const std::string& phone_id) const {
  auto it = latest_.find(phone_id);
  if (it == latest_.end()) {
    throw NotFound("no provider records for phone '" + phone_id + "'");
  }
  return it->second;
}

std::string render_estimate(const std::string& phone_id,
                            const LocationEstimate& estimate,
                            const GeoPoint& origin) {
  const GeoPoint geo = unproject_from_local(estimate.fused, origin);
  const GeoPoint center = unproject_from_local(estimate.cell_center, origin);
  nlohmann::ordered_json j;
  j["phone_id"] = phone_id;
  j["cell"] = estimate.cell.value;
  j["lat"] = geo.lat;
  j["lon"] = geo.lon;
  j["cell_lat"] = center.lat;
  j["cell_lon"] = center.lon;
  j["confidence"] = estimate.confidence;
  j["low_confidence"] = estimate.low_confidence;
  return j.dump();
}

}  // namespace deepcell
