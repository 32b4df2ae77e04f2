#include "deepcell/domain.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "deepcell/errors.h"
#include "deepcell/random.h"

namespace deepcell {
namespace {

TowerObservation obs(const std::string& id, double rss) {
  return {id, "RNC01", rss};
}

ProviderRecord record_with(std::vector<TowerObservation> active,
                           std::vector<TowerObservation> neighbors) {
  return {"generic", 1000, "phone-01", std::move(active), std::move(neighbors)};
}

TEST(ProjectionTest, OriginMapsToZero) {
  const GeoPoint origin{31.2, 29.9};
  const PlanarPoint p = project_to_local(origin, origin);
  EXPECT_EQ(p.x, 0.0);
  EXPECT_EQ(p.y, 0.0);
}

TEST(ProjectionTest, OneMilliDegreeIsAbout111Meters) {
  // R * 0.001 * pi / 180 = 111.19492... m
  const double arc = kEarthRadiusM * 0.001 * std::numbers::pi / 180.0;
  EXPECT_NEAR(arc, 111.19, 0.01);

  const PlanarPoint north = project_to_local({0.001, 0.0}, {0.0, 0.0});
  EXPECT_NEAR(north.x, 0.0, 1e-12);
  EXPECT_NEAR(north.y, 111.19, 0.01);

  const PlanarPoint east = project_to_local({0.0, 0.001}, {0.0, 0.0});
  EXPECT_NEAR(east.x, 111.19, 0.01);
  EXPECT_NEAR(east.y, 0.0, 1e-12);
}

TEST(ProjectionTest, RoundTripWithin50Km) {
  Rng rng(7);
  const GeoPoint origin{31.2, 29.9};
  for (int i = 0; i < 2000; ++i) {
    const double r = rng.uniform(0.0, 50'000.0);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const PlanarPoint p{r * std::cos(theta), r * std::sin(theta)};
    const GeoPoint g = unproject_from_local(p, origin);
    const PlanarPoint back = project_to_local(g, origin);
    const GeoPoint again = unproject_from_local(back, origin);
    EXPECT_NEAR(again.lat, g.lat, 1e-9);
    EXPECT_NEAR(again.lon, g.lon, 1e-9);
    EXPECT_NEAR(back.x, p.x, 1e-6);
    EXPECT_NEAR(back.y, p.y, 1e-6);
  }
}

TEST(ProjectionTest, CentroidOfFixes) {
  const std::vector<GpsFix> fixes{{"a", 0, 31.0, 29.0}, {"b", 1, 31.4, 30.0}};
  const GeoPoint c = centroid_origin(fixes);
  EXPECT_DOUBLE_EQ(c.lat, 31.2);
  EXPECT_DOUBLE_EQ(c.lon, 29.5);
  EXPECT_THROW(centroid_origin(std::vector<GpsFix>{}), InvalidInput);
}

TEST(GeoPointTest, RejectsOutOfRange) {
  EXPECT_THROW(validate(GeoPoint{91.0, 0.0}), InvalidInput);
  EXPECT_THROW(validate(GeoPoint{0.0, -181.0}), InvalidInput);
  EXPECT_THROW(validate(GeoPoint{std::nan(""), 0.0}), InvalidInput);
  EXPECT_NO_THROW(validate(GeoPoint{-90.0, 180.0}));
}

TEST(RecordTest, Validation) {
  EXPECT_NO_THROW(validate(record_with({obs("A", -70)}, {})));
  EXPECT_THROW(validate(record_with({}, {obs("A", -70)})), InvalidInput);
  EXPECT_THROW(validate(record_with({obs("", -70)}, {})), InvalidInput);
  EXPECT_THROW(validate(record_with({obs("A", INFINITY)}, {})), InvalidInput);
  ProviderRecord negative = record_with({obs("A", -70)}, {});
  negative.timestamp_ms = -1;
  EXPECT_THROW(validate(negative), InvalidInput);
}

TEST(TowerRegistryTest, IndexesAndRejectsDuplicates) {
  const TowerRegistry reg({"T0", "T1", "T2"});
  EXPECT_EQ(reg.size(), 3u);
  EXPECT_EQ(reg.index_of("T1"), 1u);
  EXPECT_FALSE(reg.index_of("T9").has_value());
  EXPECT_EQ(reg.id_at(2), "T2");
  EXPECT_THROW(TowerRegistry({"T0", "T0"}), InvalidInput);
  EXPECT_THROW(TowerRegistry(std::vector<std::string>{}), InvalidInput);
}

TEST(TowerRegistryTest, FromRecordsIsSorted) {
  const std::vector<ProviderRecord> records{
      record_with({obs("C", -70)}, {obs("A", -90)}),
      record_with({obs("B", -60)}, {obs("C", -80)})};
  EXPECT_EQ(TowerRegistry::from_records(records).ids(),
            (std::vector<std::string>{"A", "B", "C"}));
}

TEST(FeatureVectorTest, SingleActiveTower) {
  const TowerRegistry reg({"T0", "T1", "T2"});
  const FeatureBuild b = build_feature_vector(record_with({obs("T1", -70)}, {}), reg);
  EXPECT_EQ(b.features.rss, (std::vector<double>{0, -70, 0}));
  EXPECT_EQ(b.features.active_bits, (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(b.skipped, 0u);
}

TEST(FeatureVectorTest, NothingRegisteredIsAllZero) {
  const TowerRegistry reg({"T0", "T1"});
  const FeatureBuild b =
      build_feature_vector(record_with({obs("X", -70)}, {obs("Y", -80)}), reg);
  EXPECT_EQ(b.features.rss, (std::vector<double>{0, 0}));
  EXPECT_EQ(b.features.active_bits, (std::vector<double>{0, 0}));
  EXPECT_EQ(b.skipped, 2u);
  EXPECT_EQ(b.features.heard_count(), 0u);
}

TEST(FeatureVectorTest, ActiveAndNeighborPlacement) {
  const TowerRegistry reg({"T0", "T1", "T2"});
  const FeatureBuild b =
      build_feature_vector(record_with({obs("T0", -60)}, {obs("T2", -85)}), reg);
  EXPECT_EQ(b.features.rss, (std::vector<double>{-60, 0, -85}));
  EXPECT_EQ(b.features.active_bits, (std::vector<double>{1, 0, 0}));
  EXPECT_EQ(b.features.flatten(),
            (std::vector<double>{-60, 0, -85, 1, 0, 0}));
}

TEST(FeatureVectorTest, ActiveWinsOverNeighborAndCountsConflict) {
  const TowerRegistry reg({"T0", "T1"});
  const FeatureBuild b =
      build_feature_vector(record_with({obs("T0", -60)}, {obs("T0", -65)}), reg);
  EXPECT_EQ(b.features.rss[0], -60);
  EXPECT_EQ(b.features.active_bits[0], 1);
  EXPECT_EQ(b.conflicts, 1u);
}

// Random records: active towers get bit 1, neighbor-only towers bit 0, and
// shuffling either list changes nothing.
TEST(FeatureVectorTest, BitsAndPermutationInvarianceOnRandomRecords) {
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back("T" + std::to_string(i));
  const TowerRegistry reg(ids);
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> pool = ids;
    pool.push_back("UNKNOWN");
    rng.shuffle(std::span<std::string>(pool));
    const std::size_t n_active = 1 + rng.uniform_index(3);
    const std::size_t n_neighbor = rng.uniform_index(5);
    ProviderRecord r = record_with({}, {});
    for (std::size_t i = 0; i < n_active; ++i) {
      r.active_cells.push_back(obs(pool[i], rng.uniform(-110, -50)));
    }
    for (std::size_t i = 0; i < n_neighbor; ++i) {
      r.neighbor_cells.push_back(obs(pool[n_active + i], rng.uniform(-110, -50)));
    }
    const FeatureBuild b = build_feature_vector(r, reg);
    for (const auto& o : r.active_cells) {
      if (auto j = reg.index_of(o.tower_id)) {
        EXPECT_EQ(b.features.active_bits[*j], 1.0);
        EXPECT_EQ(b.features.rss[*j], o.rss);
      }
    }
    for (const auto& o : r.neighbor_cells) {
      if (auto j = reg.index_of(o.tower_id)) {
        EXPECT_EQ(b.features.active_bits[*j], 0.0);
      }
    }
    ProviderRecord shuffled = r;
    rng.shuffle(std::span<TowerObservation>(shuffled.active_cells));
    rng.shuffle(std::span<TowerObservation>(shuffled.neighbor_cells));
    EXPECT_EQ(build_feature_vector(shuffled, reg).features, b.features);
  }
}

}  // namespace
}  // namespace deepcell
