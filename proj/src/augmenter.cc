#include "deepcell/augmenter.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "deepcell/errors.h"
#include "deepcell/random.h"

namespace deepcell {

namespace {

std::vector<PlanarPoint> locations_of(std::span<const LabeledSample> samples) {
  std::vector<PlanarPoint> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.location);
  return out;
}

Eigen::LLT<Eigen::MatrixXd> factorize(std::span<const PlanarPoint> locations,
                                      double length_scale,
                                      double noise_variance) {
  Eigen::MatrixXd k = kernel_matrix(locations, locations, length_scale);
  k.diagonal().array() += noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k,
                                                       Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "GP covariance not positive definite: n=" << locations.size()
        << " length_scale=" << length_scale << " noise=" << noise_variance
        << " min_eigenvalue=" << eig.eigenvalues().minCoeff()
        << " max_eigenvalue=" << eig.eigenvalues().maxCoeff();
    throw NumericalError(msg.str());
  }
  return llt;
}

}  // namespace

void validate(const GpHyperparams& hp) {
  if (!(hp.length_scale_m > 0.0)) throw InvalidInput("length scale must be > 0");
  if (!(hp.noise_variance >= 0.0)) throw InvalidInput("noise variance must be >= 0");
  if (!(hp.indicator_noise_variance >= 0.0)) {
    throw InvalidInput("indicator noise variance must be >= 0");
  }
}

double kernel(const PlanarPoint& p, const PlanarPoint& q, double length_scale) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * length_scale * length_scale));
}

Eigen::MatrixXd kernel_matrix(std::span<const PlanarPoint> a,
                              std::span<const PlanarPoint> b,
                              double length_scale) {
  Eigen::MatrixXd k(a.size(), b.size());
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      k(i, j) = kernel(a[i], b[j], length_scale);
    }
  }
  return k;
}

GaussianProcess GaussianProcess::fit(std::span<const PlanarPoint> locations,
                                     std::span<const double> targets,
                                     const GpHyperparams& hp) {
  validate(hp);
  if (locations.empty()) throw InvalidInput("GP needs at least one sample");
  if (locations.size() != targets.size()) {
    throw InvalidInput("GP locations/targets length mismatch");
  }
  GaussianProcess gp;
  gp.locations_.assign(locations.begin(), locations.end());
  gp.hp_ = hp;
  if (hp.prior_mean == PriorMean::kConstantTrainingMean) {
    gp.prior_mean_ = std::accumulate(targets.begin(), targets.end(), 0.0) /
                     static_cast<double>(targets.size());
  }
  gp.cholesky_ = factorize(locations, hp.length_scale_m, hp.noise_variance);
  Eigen::VectorXd centered(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    centered[static_cast<Eigen::Index>(i)] = targets[i] - gp.prior_mean_;
  }
  gp.alpha_ = gp.cholesky_.solve(centered);
  return gp;
}

Eigen::VectorXd GaussianProcess::predict_mean(
    std::span<const PlanarPoint> probes) const {
  const Eigen::MatrixXd k_star =
      kernel_matrix(probes, locations_, hp_.length_scale_m);
  Eigen::VectorXd mean = k_star * alpha_;
  mean.array() += prior_mean_;
  return mean;
}

GpPrediction GaussianProcess::predict(
    std::span<const PlanarPoint> probes) const {
  // Training points along rows: n x p.
  const Eigen::MatrixXd k_star =
      kernel_matrix(locations_, probes, hp_.length_scale_m);
  GpPrediction out;
  out.mean = k_star.transpose() * alpha_;
  out.mean.array() += prior_mean_;
  const Eigen::MatrixXd v = cholesky_.matrixL().solve(k_star);
  out.variance = (1.0 - v.colwise().squaredNorm().array()).matrix().transpose();
  out.variance = out.variance.cwiseMax(0.0);
  return out;
}

TowerGp TowerGp::fit(std::span<const LabeledSample> samples,
                     std::size_t tower_index, const GpHyperparams& hp) {
  validate(hp);
  TowerGp gp;
  gp.tower_ = tower_index;
  std::vector<PlanarPoint> support;
  std::vector<double> rss;
  std::vector<double> bits;
  for (const auto& s : samples) {
    if (tower_index >= s.features.towers()) {
      throw InvalidInput("tower index beyond feature width");
    }
    if (!s.features.heard(tower_index)) continue;
    support.push_back(s.location);
    rss.push_back(s.features.rss[tower_index]);
    bits.push_back(s.features.active_bits[tower_index]);
  }
  if (support.empty()) return gp;
  gp.rss_ = GaussianProcess::fit(support, rss, hp);
  GpHyperparams bit_hp = hp;
  bit_hp.noise_variance = hp.indicator_noise_variance;
  gp.active_ = GaussianProcess::fit(support, bits, bit_hp);
  return gp;
}

std::size_t TowerGp::support_size() const {
  return modeled() ? rss_->training_locations().size() : 0;
}

GpPrediction TowerGp::predict_rss(std::span<const PlanarPoint> probes) const {
  if (!modeled()) {
    const auto n = static_cast<Eigen::Index>(probes.size());
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
  }
  return rss_->predict(probes);
}

GpPrediction TowerGp::predict_active(
    std::span<const PlanarPoint> probes) const {
  if (!modeled()) {
    const auto n = static_cast<Eigen::Index>(probes.size());
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
  }
  return active_->predict(probes);
}

void validate(const AugmentConfig& cfg) {
  if (!(cfg.path_spacing_m > 0.0)) throw InvalidInput("path spacing must be > 0");
  if (!(cfg.active_bit_threshold > 0.0 && cfg.active_bit_threshold < 1.0)) {
    throw InvalidInput("active bit threshold must be in (0, 1)");
  }
}

std::vector<PlanarPoint> resample_traces(
    std::span<const std::vector<PlanarPoint>> traces, double spacing_m) {
  if (!(spacing_m > 0.0)) throw InvalidInput("path spacing must be > 0");
  std::vector<PlanarPoint> out;
  for (const auto& trace : traces) {
    if (trace.empty()) continue;
    out.push_back(trace.front());
    // Arc length still to travel before the next emitted point.
    double remaining = spacing_m;
    for (std::size_t i = 1; i < trace.size(); ++i) {
      const PlanarPoint a = trace[i - 1];
      const PlanarPoint b = trace[i];
      const double seg = distance(a, b);
      double along = 0.0;
      while (seg - along >= remaining) {
        along += remaining;
        const double t = along / seg;
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        remaining = spacing_m;
      }
      remaining -= seg - along;
    }
  }
  return out;
}

AugmentResult augment(std::span<const LabeledSample> sparse,
                      std::span<const std::vector<PlanarPoint>> traces,
                      const AugmentConfig& cfg, const GpHyperparams& hp,
                      const TowerRegistry& registry) {
  validate(cfg);
  validate(hp);
  AugmentResult result;
  result.samples.assign(sparse.begin(), sparse.end());
  if (sparse.empty()) {
    result.warnings = 1;
    return result;
  }
  if (cfg.n_augmented == 0) return result;

  const std::size_t towers = registry.size();
  for (const auto& s : sparse) {
    if (s.features.towers() != towers) {
      throw InvalidInput("sample feature width does not match registry");
    }
  }

  std::vector<PlanarPoint> candidates = resample_traces(traces, cfg.path_spacing_m);
  const std::size_t n = std::min(cfg.n_augmented, candidates.size());
  if (n == 0) return result;
  std::vector<std::size_t> pick(candidates.size());
  std::iota(pick.begin(), pick.end(), 0);
  Rng rng(derive_seed(cfg.seed, 0xA06));
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pick[i], pick[i + rng.uniform_index(pick.size() - i)]);
  }
  pick.resize(n);
  std::sort(pick.begin(), pick.end());
  std::vector<PlanarPoint> probes;
  probes.reserve(n);
  for (std::size_t i : pick) probes.push_back(candidates[i]);

  std::size_t max_heard = cfg.max_heard_towers;
  if (max_heard == 0) {
    for (const auto& s : sparse) {
      max_heard = std::max(max_heard, s.features.heard_count());
    }
  }

  // Heard/unheard indicator over every sparse sample, zero prior: far from
  // any observation a tower reverts to unheard.
  const std::vector<PlanarPoint> support = locations_of(sparse);
  const auto coverage_llt =
      factorize(support, hp.length_scale_m, hp.indicator_noise_variance);
  Eigen::MatrixXd heard(sparse.size(), towers);
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    for (std::size_t j = 0; j < towers; ++j) {
      heard(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sparse[i].features.heard(j) ? 1.0 : 0.0;
    }
  }
  const Eigen::MatrixXd k_probe =
      kernel_matrix(probes, support, hp.length_scale_m);
  const Eigen::MatrixXd coverage = k_probe * coverage_llt.solve(heard);

  Eigen::MatrixXd rss_mean = Eigen::MatrixXd::Zero(n, towers);
  Eigen::MatrixXd active_mean = Eigen::MatrixXd::Zero(n, towers);
  std::vector<bool> modeled(towers, false);
  for (std::size_t j = 0; j < towers; ++j) {
    const TowerGp gp = TowerGp::fit(sparse, j, hp);
    if (!gp.modeled()) continue;
    modeled[j] = true;
    const auto col = static_cast<Eigen::Index>(j);
    rss_mean.col(col) = gp.rss_process().predict_mean(probes);
    active_mean.col(col) = gp.active_process().predict_mean(probes);
  }

  std::vector<std::size_t> heard_towers;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    heard_towers.clear();
    for (std::size_t j = 0; j < towers; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      if (modeled[j] && coverage(row, col) >= cfg.coverage_threshold &&
          rss_mean(row, col) >= cfg.heard_rss_floor_dbm) {
        heard_towers.push_back(j);
      }
    }
    std::stable_sort(heard_towers.begin(), heard_towers.end(),
                     [&](std::size_t a, std::size_t b) {
                       return rss_mean(row, static_cast<Eigen::Index>(a)) >
                              rss_mean(row, static_cast<Eigen::Index>(b));
                     });
    if (heard_towers.size() > max_heard) heard_towers.resize(max_heard);

    LabeledSample sample{FeatureVector(towers), probes[i],
                         SampleSource::kAugmented};
    for (std::size_t j : heard_towers) {
      const auto col = static_cast<Eigen::Index>(j);
      sample.features.rss[j] = rss_mean(row, col);
      sample.features.active_bits[j] =
          active_mean(row, col) >= cfg.active_bit_threshold ? 1.0 : 0.0;
    }
    result.samples.push_back(std::move(sample));
  }
  result.synthesized = n;
  return result;
}

}  // namespace deepcell
