#include "deepcell/model.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "deepcell/errors.h"

namespace deepcell {

namespace {

constexpr char kArtifactTag[] = "deepcell-model";
constexpr int kArtifactVersion = 1;
constexpr std::size_t kNoClass = std::numeric_limits<std::size_t>::max();

// Column-wise stable softmax, in place.
void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
}

void apply_dropout(Eigen::MatrixXd& activations, double rate, Rng& rng) {
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  for (Eigen::Index c = 0; c < activations.cols(); ++c) {
    for (Eigen::Index r = 0; r < activations.rows(); ++r) {
      activations(r, c) *= rng.uniform() < keep ? scale : 0.0;
    }
  }
}

struct ForwardPass {
  // activations[0] is the input; activations[l] the output of layer l.
  std::vector<Eigen::MatrixXd> activations;
  // Per hidden layer: dropout scale (0 or 1/keep) times rectifier gate.
  std::vector<Eigen::MatrixXd> gates;
  Eigen::MatrixXd probabilities;
};

ForwardPass run_forward(const NetworkModel& net, const Eigen::MatrixXd& input,
                        ForwardMode mode, Rng* rng, bool keep_gates) {
  const auto& layers = net.layers();
  const bool dropout = mode == ForwardMode::kTrain && net.dropout_rate() > 0.0;
  if (dropout && rng == nullptr) {
    throw InvalidInput("train-mode dropout needs a random source");
  }
  if (static_cast<std::size_t>(input.rows()) != net.input_dim()) {
    throw InvalidInput("input has " + std::to_string(input.rows()) +
                       " features, model expects " +
                       std::to_string(net.input_dim()));
  }
  ForwardPass pass;
  pass.activations.reserve(layers.size() + 1);
  pass.activations.push_back(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = layers[l].weights * pass.activations.back();
    z.colwise() += layers[l].bias;
    if (l + 1 == layers.size()) {
      softmax_columns(z);
      pass.probabilities = std::move(z);
      break;
    }
    Eigen::MatrixXd gate = (z.array() > 0.0).cast<double>().matrix();
    if (dropout) apply_dropout(gate, net.dropout_rate(), *rng);
    z = z.cwiseProduct(gate);
    pass.activations.push_back(std::move(z));
    if (keep_gates) pass.gates.push_back(std::move(gate));
  }
  return pass;
}

Eigen::MatrixXd assemble_inputs(const NetworkModel& net,
                                std::span<const LabeledSample> data) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(net.input_dim()),
                    static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = net.normalize(data[i].features);
  }
  return x;
}

void check_finite_loss(double value, int epoch, std::size_t batch) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "training diverged: non-finite loss " << value << " at epoch "
        << epoch << ", batch " << batch;
    throw NumericalError(msg.str());
  }
}

// Optimizer state shaped like the layers.
struct AdamState {
  std::vector<DenseLayer> m;
  std::vector<DenseLayer> v;
  long step = 0;
};

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  }
  return out;
}

void apply_update(std::vector<DenseLayer>& layers,
                  const std::vector<DenseLayer>& grads,
                  const NetworkConfig& cfg, AdamState& adam) {
  const double lr = cfg.learning_rate;
  if (cfg.optimizer == Optimizer::kSgd) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weights -= lr * grads[l].weights;
      layers[l].bias -= lr * grads[l].bias;
    }
    return;
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++adam.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
  const double step = lr * std::sqrt(c2) / c1;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
    param.array() -= step * m.array() / (v.array().sqrt() + kEps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, adam.m[l].weights, adam.v[l].weights,
           grads[l].weights);
    update(layers[l].bias, adam.m[l].bias, adam.v[l].bias, grads[l].bias);
  }
}

void write_hex(std::ostream& out, double v) {
  out << ' ' << std::hexfloat << v << std::defaultfloat;
}

// libstdc++ streams cannot read hex floats back, so parse with strtod.
double read_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw InvalidInput("model artifact truncated");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw InvalidInput("bad number in model artifact: " + token);
  }
  return v;
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v;
  if (!(in >> v)) throw InvalidInput(std::string("model artifact: bad ") + what);
  return v;
}

void expect_key(std::istream& in, const std::string& key) {
  std::string token;
  if (!(in >> token) || token != key) {
    throw InvalidInput("model artifact: expected '" + key + "', got '" +
                       token + "'");
  }
}

}  // namespace

void validate(const NetworkConfig& cfg) {
  for (auto w : cfg.hidden_layers) {
    if (w == 0) throw InvalidInput("hidden layer widths must be positive");
  }
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw InvalidInput("dropout rate must be in [0, 1)");
  }
  if (!(cfg.learning_rate > 0.0)) throw InvalidInput("learning rate must be > 0");
  if (cfg.epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (cfg.batch_size == 0) throw InvalidInput("batch size must be >= 1");
  if (!(cfg.normalization.rss_max_dbm > cfg.normalization.rss_min_dbm)) {
    throw InvalidInput("normalization bounds must satisfy min < max");
  }
}

NetworkModel::NetworkModel(std::vector<DenseLayer> layers, double dropout_rate,
                           TowerRegistry registry, VirtualGrid grid,
                           NormalizationBounds normalization,
                           std::vector<CellIndex> class_cells, GeoPoint origin,
                           bool use_active_bits)
    : layers_(std::move(layers)),
      dropout_rate_(dropout_rate),
      registry_(std::move(registry)),
      grid_(grid),
      normalization_(normalization),
      class_cells_(std::move(class_cells)),
      cell_to_class_(grid_.cell_count(), kNoClass),
      origin_(origin),
      use_active_bits_(use_active_bits) {
  if (layers_.empty()) throw InvalidInput("network needs at least one layer");
  if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0)) {
    throw InvalidInput("dropout rate must be in [0, 1)");
  }
  Eigen::Index width = static_cast<Eigen::Index>(2 * registry_.size());
  for (const auto& layer : layers_) {
    if (layer.weights.cols() != width || layer.bias.size() != layer.weights.rows()) {
      throw InvalidInput("layer dimensions do not chain");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw InvalidInput("non-finite network parameter");
    }
    width = layer.weights.rows();
  }
  if (class_cells_.empty() ||
      static_cast<std::size_t>(width) != class_cells_.size()) {
    throw InvalidInput("output width does not match class map");
  }
  for (std::size_t k = 0; k < class_cells_.size(); ++k) {
    const auto cell = class_cells_[k].value;
    if (cell >= grid_.cell_count() || cell_to_class_[cell] != kNoClass) {
      throw InvalidInput("invalid or duplicate cell in class map");
    }
    cell_to_class_[cell] = k;
  }
}

std::size_t NetworkModel::input_dim() const {
  return static_cast<std::size_t>(layers_.front().weights.cols());
}

std::size_t NetworkModel::output_dim() const {
  return static_cast<std::size_t>(layers_.back().weights.rows());
}

Eigen::VectorXd NetworkModel::normalize(const FeatureVector& features) const {
  const std::size_t m = registry_.size();
  if (features.towers() != m || features.active_bits.size() != m) {
    throw InvalidInput("feature vector width does not match tower registry");
  }
  const double lo = normalization_.rss_min_dbm;
  const double span = normalization_.rss_max_dbm - lo;
  Eigen::VectorXd x(static_cast<Eigen::Index>(2 * m));
  for (std::size_t j = 0; j < m; ++j) {
    const double rss = features.rss[j];
    x[static_cast<Eigen::Index>(j)] = rss == 0.0 ? 0.0 : (rss - lo) / span;
    x[static_cast<Eigen::Index>(m + j)] =
        use_active_bits_ ? features.active_bits[j] : 0.0;
  }
  return x;
}

std::vector<double> NetworkModel::cell_distribution(
    const FeatureVector& features) const {
  const Eigen::VectorXd p =
      forward(*this, normalize(features), ForwardMode::kInfer);
  std::vector<double> dist(grid_.cell_count(), 0.0);
  for (std::size_t k = 0; k < class_cells_.size(); ++k) {
    dist[class_cells_[k].value] = p[static_cast<Eigen::Index>(k)];
  }
  return dist;
}

std::size_t NetworkModel::class_of(CellIndex cell) const {
  if (cell.value >= cell_to_class_.size() ||
      cell_to_class_[cell.value] == kNoClass) {
    throw OutOfBounds("cell " + std::to_string(cell.value) +
                      " is not an output class");
  }
  return cell_to_class_[cell.value];
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::MatrixXd z = logits;
  softmax_columns(z);
  return z.col(0);
}

double cross_entropy(std::span<const double> probabilities,
                     std::span<const double> one_hot_label) {
  if (probabilities.size() != one_hot_label.size()) {
    throw InvalidInput("cross_entropy: length mismatch");
  }
  double d = 0.0;
  for (std::size_t j = 0; j < probabilities.size(); ++j) {
    if (one_hot_label[j] != 0.0) {
      d -= one_hot_label[j] *
           std::log(std::max(probabilities[j], kProbabilityFloor));
    }
  }
  return d;
}

Eigen::VectorXd forward(const NetworkModel& net, const Eigen::VectorXd& input,
                        ForwardMode mode, Rng* rng) {
  return run_forward(net, input, mode, rng, false).probabilities.col(0);
}

double loss(const NetworkModel& net, std::span<const Example> dataset) {
  if (dataset.empty()) throw InvalidInput("loss of an empty dataset");
  double total = 0.0;
  for (const auto& ex : dataset) {
    const Eigen::VectorXd p =
        forward(net, net.normalize(ex.features), ForwardMode::kInfer);
    total -= std::log(std::max(p[static_cast<Eigen::Index>(net.class_of(ex.cell))],
                               kProbabilityFloor));
  }
  return total / static_cast<double>(dataset.size());
}

LossGradient loss_and_gradient(const NetworkModel& net,
                               const Eigen::MatrixXd& inputs,
                               std::span<const std::size_t> labels,
                               ForwardMode mode, Rng* rng) {
  if (static_cast<std::size_t>(inputs.cols()) != labels.size() ||
      labels.empty()) {
    throw InvalidInput("batch inputs/labels mismatch");
  }
  ForwardPass pass = run_forward(net, inputs, mode, rng, true);
  const auto batch = static_cast<double>(labels.size());

  LossGradient out;
  Eigen::MatrixXd delta = std::move(pass.probabilities);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const auto y = static_cast<Eigen::Index>(labels[i]);
    if (y >= delta.rows()) throw InvalidInput("label beyond output width");
    out.loss -= std::log(std::max(delta(y, c), kProbabilityFloor));
    delta(y, c) -= 1.0;
  }
  out.loss /= batch;
  delta /= batch;

  const auto& layers = net.layers();
  out.gradients.resize(layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    out.gradients[l].weights = delta * pass.activations[l].transpose();
    out.gradients[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
      delta = back.cwiseProduct(pass.gates[l - 1]);
    }
  }
  return out;
}

NetworkModel initialize_network(const VirtualGrid& grid,
                                const TowerRegistry& registry,
                                const NetworkConfig& cfg,
                                std::vector<CellIndex> class_cells) {
  validate(cfg);
  Rng rng(derive_seed(cfg.seed, 0x1417));
  std::vector<std::size_t> widths{2 * registry.size()};
  widths.insert(widths.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
  widths.push_back(class_cells.size());
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(widths[l]);
    const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in),
                     Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index c = 0; c < fan_in; ++c) {
      for (Eigen::Index r = 0; r < fan_out; ++r) {
        layer.weights(r, c) = rng.uniform(-bound, bound);
      }
    }
    layers.push_back(std::move(layer));
  }
  return NetworkModel(std::move(layers), cfg.dropout_rate, registry, grid,
                      cfg.normalization, std::move(class_cells), GeoPoint{},
                      cfg.use_active_bits);
}

TrainResult train(std::span<const LabeledSample> data, const VirtualGrid& grid,
                  const TowerRegistry& registry, const NetworkConfig& cfg) {
  validate(cfg);
  if (data.empty()) throw InvalidInput("cannot train on an empty dataset");

  std::vector<CellIndex> sample_cells;
  sample_cells.reserve(data.size());
  for (const auto& s : data) sample_cells.push_back(grid.cell_of(s.location));

  std::vector<CellIndex> class_cells;
  if (cfg.prune_empty_cells) {
    class_cells = sample_cells;
    std::sort(class_cells.begin(), class_cells.end());
    class_cells.erase(std::unique(class_cells.begin(), class_cells.end()),
                      class_cells.end());
  } else {
    class_cells.resize(grid.cell_count());
    for (std::size_t k = 0; k < class_cells.size(); ++k) class_cells[k] = {k};
  }

  NetworkModel net = initialize_network(grid, registry, cfg, class_cells);
  const Eigen::MatrixXd inputs = assemble_inputs(net, data);
  std::vector<std::size_t> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    labels[i] = net.class_of(sample_cells[i]);
  }

  Rng shuffle_rng(derive_seed(cfg.seed, 0x5AF));
  Rng dropout_rng(derive_seed(cfg.seed, 0xD0));
  AdamState adam{zeros_like(net.layers()), zeros_like(net.layers()), 0};
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainingTrace trace;
  trace.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  Eigen::MatrixXd batch_inputs;
  std::vector<std::size_t> batch_labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_total = 0.0;
    for (std::size_t start = 0, b = 0; start < order.size();
         start += cfg.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch_inputs.resize(inputs.rows(), static_cast<Eigen::Index>(end - start));
      batch_labels.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        batch_inputs.col(static_cast<Eigen::Index>(i - start)) =
            inputs.col(static_cast<Eigen::Index>(order[i]));
        batch_labels[i - start] = labels[order[i]];
      }
      LossGradient lg = loss_and_gradient(net, batch_inputs, batch_labels,
                                          ForwardMode::kTrain, &dropout_rng);
      check_finite_loss(lg.loss, epoch, b);
      epoch_total += lg.loss * static_cast<double>(end - start);
      apply_update(net.mutable_layers(), lg.gradients, cfg, adam);
    }
    trace.epoch_loss.push_back(epoch_total / static_cast<double>(data.size()));
  }
  trace.final_loss = trace.epoch_loss.back();
  return {std::move(net), std::move(trace)};
}

void save_model(const NetworkModel& net, std::ostream& out) {
  out << kArtifactTag << " v" << kArtifactVersion << '\n';
  out << "towers " << net.registry().size();
  for (const auto& id : net.registry().ids()) {
    if (id.find_first_of(" \t\r\n") != std::string::npos) {
      throw InvalidInput("tower id with whitespace cannot be serialized: " + id);
    }
    out << ' ' << id;
  }
  out << '\n';
  const auto& g = net.grid();
  out << "grid";
  write_hex(out, g.min_corner().x);
  write_hex(out, g.min_corner().y);
  write_hex(out, g.cell_length_m());
  out << ' ' << g.n_cols() << ' ' << g.n_rows() << '\n';
  out << "origin";
  write_hex(out, net.origin().lat);
  write_hex(out, net.origin().lon);
  out << "\nnormalization";
  write_hex(out, net.normalization().rss_min_dbm);
  write_hex(out, net.normalization().rss_max_dbm);
  out << "\ndropout";
  write_hex(out, net.dropout_rate());
  out << "\nactive_bits " << (net.use_active_bits() ? 1 : 0);
  out << "\nclasses " << net.class_cells().size();
  for (const auto& c : net.class_cells()) out << ' ' << c.value;
  out << "\nlayers " << net.layers().size() << '\n';
  for (const auto& layer : net.layers()) {
    out << "layer " << layer.weights.rows() << ' ' << layer.weights.cols()
        << "\nweights";
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        write_hex(out, layer.weights(r, c));
      }
    }
    out << "\nbias";
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      write_hex(out, layer.bias[r]);
    }
    out << '\n';
  }
  if (!out) throw InvalidInput("failed writing model artifact");
}

NetworkModel load_model(std::istream& in) {
  std::string tag, version;
  in >> tag >> version;
  if (tag != kArtifactTag) throw InvalidInput("not a deepcell model artifact");
  if (version != "v" + std::to_string(kArtifactVersion)) {
    throw InvalidInput("unsupported model artifact version " + version);
  }
  expect_key(in, "towers");
  const auto m = read_value<std::size_t>(in, "tower count");
  std::vector<std::string> ids(m);
  for (auto& id : ids) id = read_value<std::string>(in, "tower id");

  expect_key(in, "grid");
  const double gx = read_double(in);
  const double gy = read_double(in);
  const double gs = read_double(in);
  const auto cols = read_value<std::size_t>(in, "grid cols");
  const auto rows = read_value<std::size_t>(in, "grid rows");

  expect_key(in, "origin");
  GeoPoint origin;
  origin.lat = read_double(in);
  origin.lon = read_double(in);

  expect_key(in, "normalization");
  NormalizationBounds norm;
  norm.rss_min_dbm = read_double(in);
  norm.rss_max_dbm = read_double(in);

  expect_key(in, "dropout");
  const double dropout = read_double(in);

  expect_key(in, "active_bits");
  const auto active_bits = read_value<int>(in, "active_bits flag");

  expect_key(in, "classes");
  std::vector<CellIndex> classes(read_value<std::size_t>(in, "class count"));
  for (auto& c : classes) c.value = read_value<std::size_t>(in, "class cell");

  expect_key(in, "layers");
  std::vector<DenseLayer> layers(read_value<std::size_t>(in, "layer count"));
  for (auto& layer : layers) {
    expect_key(in, "layer");
    const auto r = read_value<Eigen::Index>(in, "layer rows");
    const auto c = read_value<Eigen::Index>(in, "layer cols");
    if (r <= 0 || c <= 0) throw InvalidInput("model artifact: bad layer shape");
    layer.weights.resize(r, c);
    layer.bias.resize(r);
    expect_key(in, "weights");
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) layer.weights(i, j) = read_double(in);
    }
    expect_key(in, "bias");
    for (Eigen::Index i = 0; i < r; ++i) layer.bias[i] = read_double(in);
  }
  return NetworkModel(std::move(layers), dropout, TowerRegistry(std::move(ids)),
                      VirtualGrid({gx, gy}, gs, cols, rows), norm,
                      std::move(classes), origin, active_bits != 0);
}

void save_model(const NetworkModel& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path + " for writing");
  save_model(net, out);
}

NetworkModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("model artifact not found: " + path);
  return load_model(in);
}

}  // namespace deepcell
