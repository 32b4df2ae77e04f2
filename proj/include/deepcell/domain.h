#ifndef DEEPCELL_DOMAIN_H_
#define DEEPCELL_DOMAIN_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace deepcell {

// One tower entry of a provider record. RSS is in dBm.
struct TowerObservation {
  std::string tower_id;
  std::string rnc;
  double rss = 0.0;

  friend bool operator==(const TowerObservation&,
                         const TowerObservation&) = default;
};

// Event-based cellular measurement logged by the provider. The event type is
// carried through untouched; nothing in the pipeline branches on it.
struct ProviderRecord {
  std::string event_type;
  std::int64_t timestamp_ms = 0;  // GMT
  std::string phone_id;
  std::vector<TowerObservation> active_cells;
  std::vector<TowerObservation> neighbor_cells;

  friend bool operator==(const ProviderRecord&,
                         const ProviderRecord&) = default;
};

// Throws InvalidInput unless the record has a non-empty active set, a
// non-negative timestamp, non-empty tower ids and finite RSS values. A tower
// present in both lists is tolerated (see build_feature_vector).
void validate(const ProviderRecord& record);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct GpsFix {
  std::string phone_id;
  std::int64_t timestamp_ms = 0;
  double lat = 0.0;
  double lon = 0.0;

  GeoPoint position() const { return {lat, lon}; }
  friend bool operator==(const GpsFix&, const GpsFix&) = default;
};

void validate(const GeoPoint& point);

// Meters east (x) and north (y) of a projection origin.
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

inline constexpr double kEarthRadiusM = 6'371'000.0;

// Equirectangular projection around `origin`. Intended for extents of a few
// tens of kilometers.
PlanarPoint project_to_local(const GeoPoint& point, const GeoPoint& origin);
GeoPoint unproject_from_local(const PlanarPoint& point, const GeoPoint& origin);

// Mean latitude/longitude of the fixes; throws on an empty list.
GeoPoint centroid_origin(std::span<const GpsFix> fixes);

// Ordered set of towers; position in the list is the feature index.
class TowerRegistry {
 public:
  // Throws InvalidInput on an empty list, empty ids or duplicates.
  explicit TowerRegistry(std::vector<std::string> tower_ids);

  // Every tower heard in `records`, sorted by id.
  static TowerRegistry from_records(std::span<const ProviderRecord> records);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id_at(std::size_t index) const { return ids_.at(index); }
  std::optional<std::size_t> index_of(const std::string& tower_id) const;

  friend bool operator==(const TowerRegistry& a, const TowerRegistry& b) {
    return a.ids_ == b.ids_;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Raw fingerprint: per-tower RSS (0 when unheard) and active-set bits.
struct FeatureVector {
  std::vector<double> rss;
  std::vector<double> active_bits;

  FeatureVector() = default;
  explicit FeatureVector(std::size_t towers)
      : rss(towers, 0.0), active_bits(towers, 0.0) {}

  std::size_t towers() const { return rss.size(); }
  bool heard(std::size_t tower) const { return rss[tower] != 0.0; }
  std::size_t heard_count() const;

  // (rss_0 .. rss_{M-1}, bit_0 .. bit_{M-1})
  std::vector<double> flatten() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureBuild {
  FeatureVector features;
  std::size_t skipped = 0;    // observations whose tower is not registered
  std::size_t conflicts = 0;  // towers listed as both active and neighbor
};

FeatureBuild build_feature_vector(const ProviderRecord& record,
                                  const TowerRegistry& registry);

enum class SampleSource { kSynchronized, kAugmented };

struct LabeledSample {
  FeatureVector features;
  PlanarPoint location;
  SampleSource source = SampleSource::kSynchronized;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

double distance(const PlanarPoint& a, const PlanarPoint& b);

}  // namespace deepcell

#endif  // DEEPCELL_DOMAIN_H_
