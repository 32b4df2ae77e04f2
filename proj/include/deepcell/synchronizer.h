#ifndef DEEPCELL_SYNCHRONIZER_H_
#define DEEPCELL_SYNCHRONIZER_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deepcell/domain.h"

namespace deepcell {

struct SyncConfig {
  static constexpr std::int64_t kDefaultPsiMs = 10;
  // For simulated traces where GPS is logged at 1 Hz.
  static constexpr std::int64_t kRealisticPsiMs = 1000;

  std::int64_t psi_ms = kDefaultPsiMs;
  // Phone local time minus GMT, per phone id. Missing phones use 0.
  std::map<std::string, std::int64_t> phone_clock_offset_ms;
};

struct SyncReport {
  std::size_t matched = 0;
  std::size_t unmatched_records = 0;
  std::size_t unmatched_fixes = 0;
  // Records with more than one fix inside the tolerance window.
  std::size_t ambiguous = 0;
  std::size_t skipped_observations = 0;
  std::size_t conflicting_observations = 0;

  std::string to_json() const;
  friend bool operator==(const SyncReport&, const SyncReport&) = default;
};

struct SyncResult {
  std::vector<LabeledSample> samples;
  // Index into the input record list for each emitted sample.
  std::vector<std::size_t> record_indices;
  SyncReport report;
};

// local - offset, throwing InvalidInput on overflow.
std::int64_t to_gmt(std::int64_t local_timestamp_ms, std::int64_t offset_ms);

// Converts phone-local fix timestamps using cfg.phone_clock_offset_ms.
std::vector<GpsFix> fixes_to_gmt(std::span<const GpsFix> fixes,
                                 const SyncConfig& cfg);

// Labels each record with the nearest-in-time fix of the same phone when
// |dt| <= psi. Equal distances go to the earlier fix. Records without a
// qualifying fix are dropped. Output is ordered by (phone id, record
// timestamp, fix timestamp), independent of input order. Fixes must already
// be in GMT.
SyncResult synchronize(std::span<const ProviderRecord> records,
                       std::span<const GpsFix> fixes, const SyncConfig& cfg,
                       const GeoPoint& origin, const TowerRegistry& registry);

}  // namespace deepcell

#endif  // DEEPCELL_SYNCHRONIZER_H_
