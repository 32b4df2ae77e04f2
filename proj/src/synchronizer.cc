#include "deepcell/synchronizer.h"

#include <algorithm>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include "deepcell/errors.h"
#include "json.hpp"

namespace deepcell {

std::string SyncReport::to_json() const {
  nlohmann::ordered_json j;
  j["matched"] = matched;
  j["unmatched_records"] = unmatched_records;
  j["unmatched_fixes"] = unmatched_fixes;
  j["ambiguous"] = ambiguous;
  j["skipped_observations"] = skipped_observations;
  j["conflicting_observations"] = conflicting_observations;
  return j.dump();
}

std::int64_t to_gmt(std::int64_t local_timestamp_ms, std::int64_t offset_ms) {
  std::int64_t out;
  if (__builtin_sub_overflow(local_timestamp_ms, offset_ms, &out)) {
    throw InvalidInput("timestamp overflow converting to GMT");
  }
  return out;
}

std::vector<GpsFix> fixes_to_gmt(std::span<const GpsFix> fixes,
                                 const SyncConfig& cfg) {
  std::vector<GpsFix> out(fixes.begin(), fixes.end());
  for (auto& fix : out) {
    auto it = cfg.phone_clock_offset_ms.find(fix.phone_id);
    if (it != cfg.phone_clock_offset_ms.end()) {
      fix.timestamp_ms = to_gmt(fix.timestamp_ms, it->second);
    }
  }
  return out;
}

SyncResult synchronize(std::span<const ProviderRecord> records,
                       std::span<const GpsFix> fixes, const SyncConfig& cfg,
                       const GeoPoint& origin, const TowerRegistry& registry) {
  if (cfg.psi_ms < 0) throw InvalidInput("psi_ms must be non-negative");

  // Per phone, fixes sorted by time; coordinates break timestamp ties so the
  // choice never depends on input order.
  std::unordered_map<std::string, std::vector<std::size_t>> by_phone;
  for (std::size_t i = 0; i < fixes.size(); ++i) {
    by_phone[fixes[i].phone_id].push_back(i);
  }
  for (auto& [phone, idx] : by_phone) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(fixes[a].timestamp_ms, fixes[a].lat, fixes[a].lon) <
             std::tie(fixes[b].timestamp_ms, fixes[b].lat, fixes[b].lon);
    });
  }

  struct Match {
    std::size_t record;
    std::size_t fix;
  };
  std::vector<Match> matches;
  std::vector<bool> fix_used(fixes.size(), false);
  SyncReport report;

  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto it = by_phone.find(rec.phone_id);
    if (it == by_phone.end()) {
      ++report.unmatched_records;
      continue;
    }
    const auto& idx = it->second;
    const std::int64_t lo = rec.timestamp_ms - cfg.psi_ms;
    auto first = std::lower_bound(
        idx.begin(), idx.end(), lo, [&](std::size_t f, std::int64_t t) {
          return fixes[f].timestamp_ms < t;
        });
    std::size_t candidates = 0;
    std::size_t best = 0;
    std::int64_t best_dt = 0;
    for (auto f = first; f != idx.end(); ++f) {
      const std::int64_t dt = fixes[*f].timestamp_ms - rec.timestamp_ms;
      if (dt > cfg.psi_ms) break;
      const std::int64_t adt = dt < 0 ? -dt : dt;
      // Strict comparison keeps the earlier fix on equal distance.
      if (candidates == 0 || adt < best_dt) {
        best = *f;
        best_dt = adt;
      }
      ++candidates;
    }
    if (candidates == 0) {
      ++report.unmatched_records;
      continue;
    }
    if (candidates > 1) ++report.ambiguous;
    fix_used[best] = true;
    matches.push_back({r, best});
  }

  report.matched = matches.size();
  report.unmatched_fixes = static_cast<std::size_t>(
      std::count(fix_used.begin(), fix_used.end(), false));

  SyncResult result;
  std::vector<FeatureVector> features;
  features.reserve(matches.size());
  for (const auto& m : matches) {
    auto built = build_feature_vector(records[m.record], registry);
    report.skipped_observations += built.skipped;
    report.conflicting_observations += built.conflicts;
    features.push_back(std::move(built.features));
  }

  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = records[matches[a].record];
    const auto& rb = records[matches[b].record];
    const auto& fa = fixes[matches[a].fix];
    const auto& fb = fixes[matches[b].fix];
    return std::tie(ra.phone_id, ra.timestamp_ms, fa.timestamp_ms, fa.lat,
                    fa.lon, features[a].rss, features[a].active_bits) <
           std::tie(rb.phone_id, rb.timestamp_ms, fb.timestamp_ms, fb.lat,
                    fb.lon, features[b].rss, features[b].active_bits);
  });

  result.samples.reserve(matches.size());
  result.record_indices.reserve(matches.size());
  for (std::size_t k : order) {
    const auto& fix = fixes[matches[k].fix];
    result.samples.push_back({std::move(features[k]),
                              project_to_local(fix.position(), origin),
                              SampleSource::kSynchronized});
    result.record_indices.push_back(matches[k].record);
  }
  result.report = report;
  return result;
}

}  // namespace deepcell
