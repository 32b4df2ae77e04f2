#include "deepcell/dataset_io.h"

#include <fstream>
#include <istream>
#include <ostream>

#include "deepcell/errors.h"
#include "json.hpp"

namespace deepcell {

namespace {

using json = nlohmann::ordered_json;

void write_header(std::ostream& out, const char* schema, json extra = json::object()) {
  json header;
  header["schema"] = schema;
  header["version"] = kSchemaVersion;
  for (auto& [k, v] : extra.items()) header[k] = v;
  out << header.dump() << '\n';
}

json read_header(std::istream& in, const char* schema) {
  std::string line;
  if (!std::getline(in, line)) {
    throw InvalidInput(std::string("missing header for ") + schema);
  }
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bad header: ") + e.what());
  }
  if (header.value("schema", "") != schema) {
    throw InvalidInput(std::string("expected schema ") + schema + ", got " +
                       header.value("schema", "<none>"));
  }
  if (header.value("version", 0) != kSchemaVersion) {
    throw InvalidInput(std::string("unsupported version for ") + schema);
  }
  return header;
}

// Calls fn(json row, line number) for each non-empty line.
template <typename Fn>
void for_each_row(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw InvalidInput("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

json observations_to_json(const std::vector<TowerObservation>& obs) {
  json arr = json::array();
  for (const auto& o : obs) {
    arr.push_back({{"tower_id", o.tower_id}, {"rnc", o.rnc}, {"rss", o.rss}});
  }
  return arr;
}

std::vector<TowerObservation> observations_from_json(const json& arr) {
  std::vector<TowerObservation> out;
  for (const auto& o : arr) {
    out.push_back({o.at("tower_id").get<std::string>(),
                   o.value("rnc", std::string{}), o.at("rss").get<double>()});
  }
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  return out;
}

}  // namespace

void write_records(std::ostream& out, const std::vector<ProviderRecord>& rows) {
  write_header(out, kRecordsSchema);
  for (const auto& r : rows) {
    json j;
    j["event_type"] = r.event_type;
    j["timestamp_ms"] = r.timestamp_ms;
    j["phone_id"] = r.phone_id;
    j["active_cells"] = observations_to_json(r.active_cells);
    j["neighbor_cells"] = observations_to_json(r.neighbor_cells);
    out << j.dump() << '\n';
  }
}

std::vector<ProviderRecord> read_records(std::istream& in) {
  read_header(in, kRecordsSchema);
  std::vector<ProviderRecord> rows;
  for_each_row(in, [&](const json& j) {
    ProviderRecord r;
    r.event_type = j.value("event_type", std::string{});
    r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    r.phone_id = j.at("phone_id").get<std::string>();
    r.active_cells = observations_from_json(j.at("active_cells"));
    r.neighbor_cells = observations_from_json(j.value("neighbor_cells", json::array()));
    validate(r);
    rows.push_back(std::move(r));
  });
  return rows;
}

void write_fixes(std::ostream& out, const std::vector<GpsFix>& rows) {
  write_header(out, kFixesSchema);
  for (const auto& f : rows) {
    json j;
    j["phone_id"] = f.phone_id;
    j["timestamp_ms"] = f.timestamp_ms;
    j["lat"] = f.lat;
    j["lon"] = f.lon;
    out << j.dump() << '\n';
  }
}

std::vector<GpsFix> read_fixes(std::istream& in) {
  read_header(in, kFixesSchema);
  std::vector<GpsFix> rows;
  for_each_row(in, [&](const json& j) {
    GpsFix f{j.at("phone_id").get<std::string>(),
             j.at("timestamp_ms").get<std::int64_t>(), j.at("lat").get<double>(),
             j.at("lon").get<double>()};
    validate(f.position());
    rows.push_back(std::move(f));
  });
  return rows;
}

void write_ground_truth(std::ostream& out,
                        const std::vector<GroundTruthEntry>& rows) {
  write_header(out, kGroundTruthSchema);
  for (const auto& g : rows) {
    json j;
    j["phone_id"] = g.phone_id;
    j["timestamp_ms"] = g.timestamp_ms;
    j["lat"] = g.lat;
    j["lon"] = g.lon;
    out << j.dump() << '\n';
  }
}

std::vector<GroundTruthEntry> read_ground_truth(std::istream& in) {
  read_header(in, kGroundTruthSchema);
  std::vector<GroundTruthEntry> rows;
  for_each_row(in, [&](const json& j) {
    rows.push_back({j.at("phone_id").get<std::string>(),
                    j.at("timestamp_ms").get<std::int64_t>(),
                    j.at("lat").get<double>(), j.at("lon").get<double>()});
  });
  return rows;
}

void write_samples(std::ostream& out, const SampleSet& set) {
  write_header(out, kSamplesSchema,
               {{"towers", set.tower_ids},
                {"origin", {{"lat", set.origin.lat}, {"lon", set.origin.lon}}}});
  for (const auto& s : set.samples) {
    json j;
    j["x"] = s.location.x;
    j["y"] = s.location.y;
    j["source"] = s.source == SampleSource::kSynchronized ? "synchronized" : "augmented";
    j["rss"] = s.features.rss;
    j["active"] = s.features.active_bits;
    out << j.dump() << '\n';
  }
}

SampleSet read_samples(std::istream& in) {
  const json header = read_header(in, kSamplesSchema);
  SampleSet set;
  set.tower_ids = header.at("towers").get<std::vector<std::string>>();
  set.origin = {header.at("origin").at("lat").get<double>(),
                header.at("origin").at("lon").get<double>()};
  for_each_row(in, [&](const json& j) {
    LabeledSample s;
    s.location = {j.at("x").get<double>(), j.at("y").get<double>()};
    const auto source = j.at("source").get<std::string>();
    if (source == "synchronized") {
      s.source = SampleSource::kSynchronized;
    } else if (source == "augmented") {
      s.source = SampleSource::kAugmented;
    } else {
      throw InvalidInput("unknown sample source: " + source);
    }
    s.features.rss = j.at("rss").get<std::vector<double>>();
    s.features.active_bits = j.at("active").get<std::vector<double>>();
    if (s.features.rss.size() != set.tower_ids.size() ||
        s.features.active_bits.size() != set.tower_ids.size()) {
      throw InvalidInput("sample width does not match tower list");
    }
    set.samples.push_back(std::move(s));
  });
  return set;
}

std::vector<ProviderRecord> read_records_file(const std::string& path) {
  auto in = open_in(path);
  return read_records(in);
}

std::vector<GpsFix> read_fixes_file(const std::string& path) {
  auto in = open_in(path);
  return read_fixes(in);
}

std::vector<GroundTruthEntry> read_ground_truth_file(const std::string& path) {
  auto in = open_in(path);
  return read_ground_truth(in);
}

SampleSet read_samples_file(const std::string& path) {
  auto in = open_in(path);
  return read_samples(in);
}

void write_records_file(const std::string& path,
                        const std::vector<ProviderRecord>& rows) {
  auto out = open_out(path);
  write_records(out, rows);
}

void write_fixes_file(const std::string& path, const std::vector<GpsFix>& rows) {
  auto out = open_out(path);
  write_fixes(out, rows);
}

void write_ground_truth_file(const std::string& path,
                             const std::vector<GroundTruthEntry>& rows) {
  auto out = open_out(path);
  write_ground_truth(out, rows);
}

void write_samples_file(const std::string& path, const SampleSet& set) {
  auto out = open_out(path);
  write_samples(out, set);
}

}  // namespace deepcell
