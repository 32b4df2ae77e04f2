#include "deepcell/domain.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "deepcell/errors.h"

namespace deepcell {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void validate_observation(const TowerObservation& obs) {
  if (obs.tower_id.empty()) throw InvalidInput("tower observation without id");
  if (!std::isfinite(obs.rss)) {
    throw InvalidInput("non-finite RSS for tower " + obs.tower_id);
  }
}

}  // namespace

void validate(const ProviderRecord& record) {
  if (record.timestamp_ms < 0) throw InvalidInput("negative record timestamp");
  if (record.active_cells.empty()) {
    throw InvalidInput("record for phone '" + record.phone_id +
                       "' has no active cells");
  }
  for (const auto& obs : record.active_cells) validate_observation(obs);
  for (const auto& obs : record.neighbor_cells) validate_observation(obs);
}

void validate(const GeoPoint& point) {
  if (!(point.lat >= -90.0 && point.lat <= 90.0) ||
      !(point.lon >= -180.0 && point.lon <= 180.0)) {
    throw InvalidInput("coordinates out of range: (" +
                       std::to_string(point.lat) + ", " +
                       std::to_string(point.lon) + ")");
  }
}

PlanarPoint project_to_local(const GeoPoint& point, const GeoPoint& origin) {
  validate(point);
  validate(origin);
  return {kEarthRadiusM * (point.lon - origin.lon) * kDegToRad *
              std::cos(origin.lat * kDegToRad),
          kEarthRadiusM * (point.lat - origin.lat) * kDegToRad};
}

GeoPoint unproject_from_local(const PlanarPoint& point,
                              const GeoPoint& origin) {
  validate(origin);
  if (!std::isfinite(point.x) || !std::isfinite(point.y)) {
    throw InvalidInput("non-finite planar point");
  }
  GeoPoint geo{origin.lat + point.y / (kEarthRadiusM * kDegToRad),
               origin.lon + point.x / (kEarthRadiusM * kDegToRad *
                                       std::cos(origin.lat * kDegToRad))};
  validate(geo);
  return geo;
}

GeoPoint centroid_origin(std::span<const GpsFix> fixes) {
  if (fixes.empty()) throw InvalidInput("cannot take centroid of no fixes");
  double lat = 0.0;
  double lon = 0.0;
  for (const auto& fix : fixes) {
    lat += fix.lat;
    lon += fix.lon;
  }
  const auto n = static_cast<double>(fixes.size());
  return {lat / n, lon / n};
}

TowerRegistry::TowerRegistry(std::vector<std::string> tower_ids)
    : ids_(std::move(tower_ids)) {
  if (ids_.empty()) throw InvalidInput("tower registry needs at least 1 tower");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) throw InvalidInput("empty tower id in registry");
    if (!index_.emplace(ids_[i], i).second) {
      throw InvalidInput("duplicate tower id in registry: " + ids_[i]);
    }
  }
}

TowerRegistry TowerRegistry::from_records(
    std::span<const ProviderRecord> records) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    for (const auto& obs : r.active_cells) ids.insert(obs.tower_id);
    for (const auto& obs : r.neighbor_cells) ids.insert(obs.tower_id);
  }
  return TowerRegistry({ids.begin(), ids.end()});
}

std::optional<std::size_t> TowerRegistry::index_of(
    const std::string& tower_id) const {
  auto it = index_.find(tower_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t FeatureVector::heard_count() const {
  return static_cast<std::size_t>(
      std::count_if(rss.begin(), rss.end(), [](double v) { return v != 0.0; }));
}

std::vector<double> FeatureVector::flatten() const {
  std::vector<double> flat;
  flat.reserve(2 * rss.size());
  flat.insert(flat.end(), rss.begin(), rss.end());
  flat.insert(flat.end(), active_bits.begin(), active_bits.end());
  return flat;
}

FeatureBuild build_feature_vector(const ProviderRecord& record,
                                  const TowerRegistry& registry) {
  FeatureBuild out{FeatureVector(registry.size()), 0, 0};
  std::vector<bool> as_neighbor(registry.size(), false);
  // Neighbors first so an active listing of the same tower wins.
  for (const auto& obs : record.neighbor_cells) {
    if (auto j = registry.index_of(obs.tower_id)) {
      out.features.rss[*j] = obs.rss;
      as_neighbor[*j] = true;
    } else {
      ++out.skipped;
    }
  }
  for (const auto& obs : record.active_cells) {
    if (auto j = registry.index_of(obs.tower_id)) {
      if (as_neighbor[*j]) {
        ++out.conflicts;
        as_neighbor[*j] = false;
      }
      out.features.rss[*j] = obs.rss;
      out.features.active_bits[*j] = 1.0;
    } else {
      ++out.skipped;
    }
  }
  return out;
}

double distance(const PlanarPoint& a, const PlanarPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace deepcell
