#ifndef DEEPCELL_AUGMENTER_H_
#define DEEPCELL_AUGMENTER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "deepcell/domain.h"

namespace deepcell {

enum class PriorMean { kZeroCentered, kConstantTrainingMean };

struct GpHyperparams {
  double length_scale_m = 100.0;
  // Variance of the observation noise, in squared target units (dBm^2 for
  // the RSS process).
  double noise_variance = 4.0;
  // Noise for the {0,1} indicator processes (active bit, coverage).
  double indicator_noise_variance = 0.01;
  PriorMean prior_mean = PriorMean::kConstantTrainingMean;
};

void validate(const GpHyperparams& hp);

// Squared-exponential kernel exp(-|p - q|^2 / (2 l^2)).
double kernel(const PlanarPoint& p, const PlanarPoint& q, double length_scale);

Eigen::MatrixXd kernel_matrix(std::span<const PlanarPoint> a,
                              std::span<const PlanarPoint> b,
                              double length_scale);

struct GpPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// Exact GP regression with a constant prior mean. Immutable once fitted.
class GaussianProcess {
 public:
  // Throws NumericalError when K + noise*I is not positive definite.
  static GaussianProcess fit(std::span<const PlanarPoint> locations,
                             std::span<const double> targets,
                             const GpHyperparams& hp);

  GpPrediction predict(std::span<const PlanarPoint> probes) const;
  // Mean only; skips the variance solve.
  Eigen::VectorXd predict_mean(std::span<const PlanarPoint> probes) const;

  double prior_mean() const { return prior_mean_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const std::vector<PlanarPoint>& training_locations() const {
    return locations_;
  }
  const GpHyperparams& hyperparams() const { return hp_; }

 private:
  GaussianProcess() = default;

  std::vector<PlanarPoint> locations_;
  GpHyperparams hp_;
  double prior_mean_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> cholesky_;
  Eigen::VectorXd alpha_;
};

// RSS and active-bit processes for one tower, fitted on the samples that hear
// it. A tower nobody heard is un-modeled: predictions fall back to unheard
// (RSS 0) with prior variance.
class TowerGp {
 public:
  static TowerGp fit(std::span<const LabeledSample> samples,
                     std::size_t tower_index, const GpHyperparams& hp);

  bool modeled() const { return rss_.has_value(); }
  std::size_t tower_index() const { return tower_; }
  std::size_t support_size() const;

  GpPrediction predict_rss(std::span<const PlanarPoint> probes) const;
  GpPrediction predict_active(std::span<const PlanarPoint> probes) const;

  const GaussianProcess& rss_process() const { return *rss_; }
  const GaussianProcess& active_process() const { return *active_; }

 private:
  std::size_t tower_ = 0;
  std::optional<GaussianProcess> rss_;
  std::optional<GaussianProcess> active_;
};

struct AugmentConfig {
  std::size_t n_augmented = 1000;
  double path_spacing_m = 10.0;
  double active_bit_threshold = 0.5;
  double heard_rss_floor_dbm = -110.0;
  // Posterior mean of the zero-prior heard/unheard process above which a
  // tower counts as heard at a synthesized location.
  double coverage_threshold = 0.5;
  // Cap on towers reported per synthesized sample; 0 takes the largest
  // count seen in the sparse data.
  std::size_t max_heard_towers = 0;
  std::uint64_t seed = 0;
};

void validate(const AugmentConfig& cfg);

// Points every `spacing_m` of arc length along each polyline, starting at
// its first vertex.
std::vector<PlanarPoint> resample_traces(
    std::span<const std::vector<PlanarPoint>> traces, double spacing_m);

struct AugmentResult {
  // Sparse input followed by the synthesized samples.
  std::vector<LabeledSample> samples;
  std::size_t synthesized = 0;
  std::size_t warnings = 0;
};

// Synthesizes up to cfg.n_augmented labeled samples at locations along the
// GPS traces, reading each tower's RSS and active bit from its fitted GPs.
AugmentResult augment(std::span<const LabeledSample> sparse,
                      std::span<const std::vector<PlanarPoint>> traces,
                      const AugmentConfig& cfg, const GpHyperparams& hp,
                      const TowerRegistry& registry);

}  // namespace deepcell

#endif  // DEEPCELL_AUGMENTER_H_
