#ifndef DEEPCELL_DATASET_IO_H_
#define DEEPCELL_DATASET_IO_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "deepcell/domain.h"
#include "deepcell/simulator.h"

// Line-delimited JSON datasets. The first line of every file is a header
// object {"schema": <name>, "version": 1, ...}; each following line is one
// row.
//
//   deepcell.provider_records  {"event_type", "timestamp_ms", "phone_id",
//                               "active_cells": [{"tower_id","rnc","rss"}],
//                               "neighbor_cells": [...]}
//   deepcell.gps_fixes         {"phone_id", "timestamp_ms", "lat", "lon"}
//   deepcell.ground_truth      {"phone_id", "timestamp_ms", "lat", "lon"}
//                              (row i belongs to provider record i)
//   deepcell.labeled_samples   header adds "towers": [ids] and "origin";
//                              rows {"x", "y", "source", "rss": [..],
//                              "active": [..]}
namespace deepcell {

inline constexpr int kSchemaVersion = 1;
inline constexpr char kRecordsSchema[] = "deepcell.provider_records";
inline constexpr char kFixesSchema[] = "deepcell.gps_fixes";
inline constexpr char kGroundTruthSchema[] = "deepcell.ground_truth";
inline constexpr char kSamplesSchema[] = "deepcell.labeled_samples";

void write_records(std::ostream& out, const std::vector<ProviderRecord>& rows);
std::vector<ProviderRecord> read_records(std::istream& in);

void write_fixes(std::ostream& out, const std::vector<GpsFix>& rows);
std::vector<GpsFix> read_fixes(std::istream& in);

void write_ground_truth(std::ostream& out,
                        const std::vector<GroundTruthEntry>& rows);
std::vector<GroundTruthEntry> read_ground_truth(std::istream& in);

struct SampleSet {
  std::vector<std::string> tower_ids;
  GeoPoint origin;
  std::vector<LabeledSample> samples;
};

void write_samples(std::ostream& out, const SampleSet& set);
SampleSet read_samples(std::istream& in);

// File-path conveniences; throw NotFound / InvalidInput.
std::vector<ProviderRecord> read_records_file(const std::string& path);
std::vector<GpsFix> read_fixes_file(const std::string& path);
std::vector<GroundTruthEntry> read_ground_truth_file(const std::string& path);
SampleSet read_samples_file(const std::string& path);
void write_records_file(const std::string& path,
                        const std::vector<ProviderRecord>& rows);
void write_fixes_file(const std::string& path, const std::vector<GpsFix>& rows);
void write_ground_truth_file(const std::string& path,
                             const std::vector<GroundTruthEntry>& rows);
void write_samples_file(const std::string& path, const SampleSet& set);

}  // namespace deepcell

#endif  // DEEPCELL_DATASET_IO_H_
