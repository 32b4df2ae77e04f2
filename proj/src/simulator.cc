#include "deepcell/simulator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "deepcell/errors.h"

namespace deepcell {

namespace {

std::string numbered(const char* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, n);
  return buf;
}

PlanarPoint random_point(const SimConfig& cfg, Rng& rng) {
  return {rng.uniform(0.0, cfg.width_m), rng.uniform(0.0, cfg.height_m)};
}

// Random-waypoint walk sampled at the GPS rate.
Trajectory random_waypoint(const SimConfig& cfg, std::size_t phone,
                           std::int64_t start_ms, Rng& rng) {
  Trajectory traj;
  traj.phone_id = numbered("phone-", phone + 1, 2);
  const double dt_s = 1.0 / cfg.gps_rate_hz;
  const auto dt_ms = static_cast<std::int64_t>(std::llround(1000.0 * dt_s));
  PlanarPoint pos = random_point(cfg, rng);
  PlanarPoint target = random_point(cfg, rng);
  double speed = rng.uniform(cfg.min_speed_mps, cfg.max_speed_mps);
  traj.points.reserve(cfg.fixes_per_phone);
  for (std::size_t i = 0; i < cfg.fixes_per_phone; ++i) {
    traj.points.push_back(
        {start_ms + static_cast<std::int64_t>(i) * dt_ms, pos});
    const double step = speed * dt_s;
    const double remaining = distance(pos, target);
    if (step >= remaining) {
      pos = target;
      target = random_point(cfg, rng);
      speed = rng.uniform(cfg.min_speed_mps, cfg.max_speed_mps);
    } else {
      pos.x += (target.x - pos.x) * step / remaining;
      pos.y += (target.y - pos.y) * step / remaining;
    }
  }
  return traj;
}

}  // namespace

void validate(const SimConfig& cfg) {
  if (!(cfg.width_m > 0.0 && cfg.height_m > 0.0)) {
    throw InvalidInput("simulation area must be positive");
  }
  if (cfg.n_towers == 0) throw InvalidInput("need at least one tower");
  if (cfg.active_set_size == 0) throw InvalidInput("active set size must be >= 1");
  if (cfg.max_reported_cells < cfg.active_set_size) {
    throw InvalidInput("max_reported_cells must be >= active_set_size");
  }
  if (!(cfg.path_loss_exponent > 0.0)) {
    throw InvalidInput("path loss exponent must be positive");
  }
  if (!(cfg.gps_rate_hz > 0.0)) throw InvalidInput("GPS rate must be positive");
  if (!(cfg.event_probability_per_fix >= 0.0 &&
        cfg.event_probability_per_fix <= 1.0)) {
    throw InvalidInput("event probability must be in [0, 1]");
  }
  if (cfg.n_phones == 0 || cfg.fixes_per_phone == 0) {
    throw InvalidInput("need at least one phone and one fix");
  }
  if (!(cfg.min_speed_mps > 0.0 && cfg.max_speed_mps >= cfg.min_speed_mps)) {
    throw InvalidInput("invalid speed range");
  }
  if (cfg.shadowing_sigma_dbm < 0.0 || cfg.measurement_noise_dbm < 0.0 ||
      cfg.tower_margin_m < 0.0 || cfg.jitter_ms < 0) {
    throw InvalidInput("negative noise, margin or jitter");
  }
  if (cfg.shadowing_sigma_dbm > 0.0 && !(cfg.shadowing_decorrelation_m > 0.0)) {
    throw InvalidInput("shadowing decorrelation distance must be positive");
  }
  validate(cfg.origin);
}

ShadowingField::ShadowingField(PlanarPoint min_corner, double width,
                               double height, double spacing, double sigma,
                               Rng& rng)
    : min_corner_(min_corner),
      spacing_(spacing),
      cols_(static_cast<std::size_t>(std::ceil(width / spacing)) + 2),
      rows_(static_cast<std::size_t>(std::ceil(height / spacing)) + 2),
      nodes_(cols_ * rows_) {
  for (auto& v : nodes_) v = rng.normal(0.0, sigma);
}

double ShadowingField::value_at(const PlanarPoint& p) const {
  const double fx = std::clamp((p.x - min_corner_.x) / spacing_, 0.0,
                               static_cast<double>(cols_ - 2));
  const double fy = std::clamp((p.y - min_corner_.y) / spacing_, 0.0,
                               static_cast<double>(rows_ - 2));
  const auto c = static_cast<std::size_t>(fx);
  const auto r = static_cast<std::size_t>(fy);
  const double tx = fx - static_cast<double>(c);
  const double ty = fy - static_cast<double>(r);
  const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty,
                       tx * ty};
  const double z[4] = {nodes_[r * cols_ + c], nodes_[r * cols_ + c + 1],
                       nodes_[(r + 1) * cols_ + c],
                       nodes_[(r + 1) * cols_ + c + 1]};
  double value = 0.0;
  double norm = 0.0;
  for (int i = 0; i < 4; ++i) {
    value += w[i] * z[i];
    norm += w[i] * w[i];
  }
  return value / std::sqrt(norm);
}

PlanarPoint Trajectory::at(std::int64_t timestamp_ms) const {
  if (points.empty()) throw InvalidInput("empty trajectory");
  if (timestamp_ms <= points.front().timestamp_ms) return points.front().position;
  if (timestamp_ms >= points.back().timestamp_ms) return points.back().position;
  auto hi = std::upper_bound(points.begin(), points.end(), timestamp_ms,
                             [](std::int64_t t, const TrajectoryPoint& p) {
                               return t < p.timestamp_ms;
                             });
  auto lo = hi - 1;
  const double t = static_cast<double>(timestamp_ms - lo->timestamp_ms) /
                   static_cast<double>(hi->timestamp_ms - lo->timestamp_ms);
  return {lo->position.x + t * (hi->position.x - lo->position.x),
          lo->position.y + t * (hi->position.y - lo->position.y)};
}

SimWorld build_world(const SimConfig& cfg) {
  validate(cfg);
  SimWorld world;
  world.config = cfg;
  Rng tower_rng(derive_seed(cfg.seed, 1));
  const double m = cfg.tower_margin_m;
  for (std::size_t i = 0; i < cfg.n_towers; ++i) {
    world.towers.push_back(
        {numbered("C", i + 1, 4), numbered("RNC", i / 6 + 1, 2),
         {tower_rng.uniform(-m, cfg.width_m + m),
          tower_rng.uniform(-m, cfg.height_m + m)}});
  }
  const double spacing =
      cfg.shadowing_sigma_dbm > 0.0 ? cfg.shadowing_decorrelation_m : 100.0;
  for (std::size_t i = 0; i < cfg.n_towers; ++i) {
    Rng field_rng(derive_seed(cfg.seed, 100 + i));
    world.shadowing.emplace_back(PlanarPoint{-m, -m}, cfg.width_m + 2 * m,
                                 cfg.height_m + 2 * m, spacing,
                                 cfg.shadowing_sigma_dbm, field_rng);
  }
  for (std::size_t k = 0; k < cfg.n_phones; ++k) {
    Rng walk_rng(derive_seed(cfg.seed, 1000 + k));
    // Stagger phones so their clocks never coincide exactly.
    const std::int64_t start =
        cfg.start_time_ms + static_cast<std::int64_t>(k) * 137;
    world.trajectories.push_back(random_waypoint(cfg, k, start, walk_rng));
  }
  return world;
}

double mean_rss_dbm(const SimWorld& world, std::size_t tower,
                    const PlanarPoint& p) {
  const auto& cfg = world.config;
  const double d = std::max(distance(world.towers.at(tower).position, p), 1.0);
  double rss = cfg.tx_power_dbm - 10.0 * cfg.path_loss_exponent * std::log10(d);
  if (cfg.shadowing_sigma_dbm > 0.0) rss += world.shadowing[tower].value_at(p);
  return rss;
}

std::optional<double> rss_at(const SimWorld& world, std::size_t tower,
                             const PlanarPoint& p, Rng& rng) {
  double rss = mean_rss_dbm(world, tower, p);
  if (world.config.measurement_noise_dbm > 0.0) {
    rss += rng.normal(0.0, world.config.measurement_noise_dbm);
  }
  if (rss < world.config.noise_floor_dbm) return std::nullopt;
  return rss;
}

SimOutput generate(const SimWorld& world) {
  const auto& cfg = world.config;
  SimOutput out;
  struct Heard {
    std::size_t tower;
    double rss;
  };
  std::vector<Heard> heard;
  for (std::size_t k = 0; k < world.trajectories.size(); ++k) {
    const auto& traj = world.trajectories[k];
    Rng event_rng(derive_seed(cfg.seed, 2000 + k));
    Rng radio_rng(derive_seed(cfg.seed, 3000 + k));
    for (const auto& point : traj.points) {
      const GeoPoint geo = unproject_from_local(point.position, cfg.origin);
      out.fixes.push_back({traj.phone_id, point.timestamp_ms, geo.lat, geo.lon});
      if (!event_rng.bernoulli(cfg.event_probability_per_fix)) continue;
      std::int64_t t = point.timestamp_ms;
      if (cfg.jitter_ms > 0) t += event_rng.uniform_int(-cfg.jitter_ms, cfg.jitter_ms);
      const PlanarPoint truth = traj.at(t);

      heard.clear();
      for (std::size_t i = 0; i < world.towers.size(); ++i) {
        if (auto rss = rss_at(world, i, truth, radio_rng)) {
          heard.push_back({i, *rss});
        }
      }
      if (heard.empty()) {
        ++out.silent_events;
        continue;
      }
      std::stable_sort(heard.begin(), heard.end(),
                       [](const Heard& a, const Heard& b) { return a.rss > b.rss; });
      ProviderRecord rec;
      rec.event_type = "generic";
      rec.timestamp_ms = t;
      rec.phone_id = traj.phone_id;
      const std::size_t reported = std::min(heard.size(), cfg.max_reported_cells);
      for (std::size_t i = 0; i < reported; ++i) {
        const auto& tower = world.towers[heard[i].tower];
        TowerObservation obs{tower.id, tower.rnc, heard[i].rss};
        (i < cfg.active_set_size ? rec.active_cells : rec.neighbor_cells)
            .push_back(std::move(obs));
      }
      out.records.push_back(std::move(rec));
      const GeoPoint truth_geo = unproject_from_local(truth, cfg.origin);
      out.ground_truth.push_back({traj.phone_id, t, truth_geo.lat, truth_geo.lon});
    }
  }
  if (out.records.empty() && out.silent_events > 0) {
    throw InvalidInput("configuration error: no tower is heard anywhere");
  }
  return out;
}

SimOutput generate(const SimConfig& cfg) { return generate(build_world(cfg)); }

}  // namespace deepcell
