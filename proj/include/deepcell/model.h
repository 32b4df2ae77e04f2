#ifndef DEEPCELL_MODEL_H_
#define DEEPCELL_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "deepcell/domain.h"
#include "deepcell/grid.h"
#include "deepcell/random.h"

namespace deepcell {

// Affine RSS scaling (rss - min) / (max - min); unheard towers stay at 0.
// Values outside the bounds are not clipped.
struct NormalizationBounds {
  double rss_min_dbm = -113.0;
  double rss_max_dbm = -40.0;

  friend bool operator==(const NormalizationBounds&,
                         const NormalizationBounds&) = default;
};

enum class Optimizer { kSgd, kAdam };

struct NetworkConfig {
  std::vector<std::size_t> hidden_layers{256, 128, 64};
  double dropout_rate = 0.2;
  double learning_rate = 1e-4;
  int epochs = 500;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::kAdam;
  NormalizationBounds normalization;
  // Drop grid cells without training samples from the output layer. Their
  // probability is reported as 0.
  bool prune_empty_cells = false;
  // When false the active-bit half of the input is held at zero.
  bool use_active_bits = true;
};

void validate(const NetworkConfig& cfg);

enum class ForwardMode { kTrain, kInfer };

// weights: out x in.
struct DenseLayer {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weights == b.weights && a.bias == b.bias;
  }
};

// Rectifier hidden layers, softmax output over the retained grid cells.
class NetworkModel {
 public:
  NetworkModel(std::vector<DenseLayer> layers, double dropout_rate,
               TowerRegistry registry, VirtualGrid grid,
               NormalizationBounds normalization,
               std::vector<CellIndex> class_cells, GeoPoint origin = {},
               bool use_active_bits = true);

  std::size_t input_dim() const;
  std::size_t output_dim() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  double dropout_rate() const { return dropout_rate_; }
  const TowerRegistry& registry() const { return registry_; }
  const VirtualGrid& grid() const { return grid_; }
  const NormalizationBounds& normalization() const { return normalization_; }
  const std::vector<CellIndex>& class_cells() const { return class_cells_; }
  const GeoPoint& origin() const { return origin_; }
  bool use_active_bits() const { return use_active_bits_; }
  void set_origin(const GeoPoint& origin) { origin_ = origin; }

  // Flattened, normalized network input of length 2M.
  Eigen::VectorXd normalize(const FeatureVector& features) const;

  // Probability over all K grid cells (pruned cells get 0).
  std::vector<double> cell_distribution(const FeatureVector& features) const;

  // Class position of a grid cell; throws if the cell was pruned.
  std::size_t class_of(CellIndex cell) const;

  friend bool operator==(const NetworkModel&, const NetworkModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
  double dropout_rate_;
  TowerRegistry registry_;
  VirtualGrid grid_;
  NormalizationBounds normalization_;
  std::vector<CellIndex> class_cells_;
  std::vector<std::size_t> cell_to_class_;
  GeoPoint origin_;
  bool use_active_bits_;
};

std::vector<double> softmax(std::span<const double> logits);
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// -sum l_j log(max(p_j, 1e-12)).
double cross_entropy(std::span<const double> probabilities,
                     std::span<const double> one_hot_label);

inline constexpr double kProbabilityFloor = 1e-12;

// Probability over the model's output classes for a normalized input.
// Train mode applies inverted dropout to every hidden layer using `rng`.
Eigen::VectorXd forward(const NetworkModel& net, const Eigen::VectorXd& input,
                        ForwardMode mode, Rng* rng = nullptr);

struct Example {
  FeatureVector features;
  CellIndex cell;
};

// Mean inference-mode cross-entropy over the dataset.
double loss(const NetworkModel& net, std::span<const Example> dataset);

// Mean cross-entropy of a batch (columns of `inputs`) and its gradient with
// respect to every layer's parameters.
struct LossGradient {
  double loss = 0.0;
  std::vector<DenseLayer> gradients;
};
LossGradient loss_and_gradient(const NetworkModel& net,
                               const Eigen::MatrixXd& inputs,
                               std::span<const std::size_t> labels,
                               ForwardMode mode, Rng* rng = nullptr);

struct TrainingTrace {
  std::vector<double> epoch_loss;
  double final_loss = 0.0;

  friend bool operator==(const TrainingTrace&, const TrainingTrace&) = default;
};

struct TrainResult {
  NetworkModel model;
  TrainingTrace trace;
};

// Mini-batch training on the cross-entropy of the labeled samples against
// their grid cells. Deterministic for a fixed cfg.seed.
TrainResult train(std::span<const LabeledSample> data, const VirtualGrid& grid,
                  const TowerRegistry& registry, const NetworkConfig& cfg);

// Glorot-uniform weights, zero biases.
NetworkModel initialize_network(const VirtualGrid& grid,
                                const TowerRegistry& registry,
                                const NetworkConfig& cfg,
                                std::vector<CellIndex> class_cells);

// Self-describing text artifact; doubles are written as hex floats so a
// round trip is exact.
void save_model(const NetworkModel& net, std::ostream& out);
NetworkModel load_model(std::istream& in);
void save_model(const NetworkModel& net, const std::string& path);
NetworkModel load_model(const std::string& path);

}  // namespace deepcell

#endif  // DEEPCELL_MODEL_H_
