#include "deepcell/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "deepcell/errors.h"
#include "deepcell/random.h"

namespace deepcell {
namespace {

std::vector<CellIndex> all_cells(std::size_t k) {
  std::vector<CellIndex> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = {i};
  return out;
}

NetworkModel random_net(std::size_t towers, std::vector<std::size_t> hidden,
                        std::size_t cells, double dropout, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (std::size_t j = 0; j < towers; ++j) ids.push_back("T" + std::to_string(j));
  NetworkConfig cfg;
  cfg.hidden_layers = std::move(hidden);
  cfg.dropout_rate = dropout;
  cfg.seed = seed;
  NetworkModel net = initialize_network(VirtualGrid({0, 0}, 100, cells, 1),
                                        TowerRegistry(ids), cfg, all_cells(cells));
  // Nonzero biases so the gradient check exercises them.
  Rng rng(seed + 100);
  for (auto& l : net.mutable_layers()) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.uniform(-0.2, 0.2);
  }
  return net;
}

double batch_loss(const NetworkModel& net, const Eigen::MatrixXd& x,
                  std::span<const std::size_t> labels) {
  return loss_and_gradient(net, x, labels, ForwardMode::kInfer).loss;
}

TEST(SoftmaxTest, Examples) {
  EXPECT_EQ(softmax(std::vector<double>{0, 0, 0, 0}),
            (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
  const auto p = softmax(std::vector<double>{1, 2, 3});
  EXPECT_NEAR(p[0], 0.09003, 1e-5);
  EXPECT_NEAR(p[1], 0.24473, 1e-5);
  EXPECT_NEAR(p[2], 0.66524, 1e-5);
  const auto big = softmax(std::vector<double>{1000, 0});
  EXPECT_NEAR(big[0], 1.0, 1e-12);
  EXPECT_NEAR(big[1], 0.0, 1e-12);
}

TEST(SoftmaxProperty, NormalizedAndOrderPreserving) {
  Rng rng(99);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    const double scale = std::pow(10.0, rng.uniform(-2, 3));
    std::vector<double> z(n);
    for (auto& v : z) v = rng.uniform(-scale, scale);
    const auto p = softmax(z);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    const auto zmax = std::max_element(z.begin(), z.end()) - z.begin();
    const auto pmax = std::max_element(p.begin(), p.end()) - p.begin();
    EXPECT_EQ(zmax, pmax);
    Eigen::VectorXd ze = Eigen::Map<Eigen::VectorXd>(z.data(), n);
    const Eigen::VectorXd pe = softmax(ze);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(pe[i], p[i], 1e-15);
  }
}

TEST(CrossEntropyTest, Examples) {
  EXPECT_EQ(cross_entropy(std::vector<double>{0, 1, 0},
                          std::vector<double>{0, 1, 0}),
            0.0);
  EXPECT_NEAR(cross_entropy(std::vector<double>(4, 0.25),
                            std::vector<double>{0, 0, 1, 0}),
              1.38629, 1e-5);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0.5, 0.5},
                            std::vector<double>{1, 0}),
              0.69315, 1e-5);
  // Zero probability on the hot index hits the floor instead of infinity.
  EXPECT_NEAR(cross_entropy(std::vector<double>{0, 1},
                            std::vector<double>{1, 0}),
              -std::log(kProbabilityFloor), 1e-9);
  EXPECT_THROW(cross_entropy(std::vector<double>{1},
                             std::vector<double>{1, 0}),
               InvalidInput);
}

TEST(CrossEntropyProperty, NonNegative) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(10);
    std::vector<double> z(k);
    for (auto& v : z) v = rng.uniform(-5, 5);
    const auto p = softmax(z);
    std::vector<double> l(k, 0.0);
    l[rng.uniform_index(k)] = 1.0;
    EXPECT_GT(cross_entropy(p, l), 0.0);
  }
}

TEST(ForwardTest, HandComputedOneHiddenUnit) {
  DenseLayer hidden{Eigen::MatrixXd(1, 2), Eigen::VectorXd(1)};
  hidden.weights << 0.5, -1.0;
  hidden.bias << 0.25;
  DenseLayer out{Eigen::MatrixXd(2, 1), Eigen::VectorXd(2)};
  out.weights << 2.0, -1.0;
  out.bias << 0.0, 0.5;
  const NetworkModel net({hidden, out}, 0.0, TowerRegistry({"T0"}),
                         VirtualGrid({0, 0}, 100, 2, 1), {}, all_cells(2));
  Eigen::VectorXd x(2);
  x << 0.8, 0.2;
  // h = relu(0.4 - 0.2 + 0.25) = 0.45; logits (0.9, 0.05).
  const Eigen::VectorXd p = forward(net, x, ForwardMode::kInfer);
  EXPECT_NEAR(p[0], 0.7005671424739729, 1e-10);
  EXPECT_NEAR(p[1], 0.2994328575260271, 1e-10);

  x << 0.0, 1.0;  // pre-activation -0.75: unit off, logits (0, 0.5)
  const Eigen::VectorXd q = forward(net, x, ForwardMode::kInfer);
  EXPECT_NEAR(q[1], 1.0 / (1.0 + std::exp(-0.5)), 1e-12);
}

TEST(ForwardTest, NoDropoutMeansTrainEqualsInfer) {
  const NetworkModel net = random_net(3, {8, 4}, 5, 0.0, 1);
  Rng rng(2);
  Eigen::VectorXd x = Eigen::VectorXd::Random(6);
  EXPECT_EQ(forward(net, x, ForwardMode::kTrain, &rng),
            forward(net, x, ForwardMode::kInfer));
}

TEST(ForwardTest, OutputSumsToOne) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const NetworkModel net = random_net(4, {16, 8}, 7, 0.3, trial);
    Eigen::VectorXd x(8);
    for (Eigen::Index i = 0; i < 8; ++i) x[i] = rng.uniform(-1, 2);
    EXPECT_NEAR(forward(net, x, ForwardMode::kInfer).sum(), 1.0, 1e-9);
    EXPECT_NEAR(forward(net, x, ForwardMode::kTrain, &rng).sum(), 1.0, 1e-9);
  }
}

TEST(ForwardTest, RejectsWrongWidthAndMissingRng) {
  const NetworkModel net = random_net(2, {4}, 3, 0.5, 1);
  EXPECT_THROW(forward(net, Eigen::VectorXd::Zero(3), ForwardMode::kInfer),
               InvalidInput);
  EXPECT_THROW(forward(net, Eigen::VectorXd::Zero(4), ForwardMode::kTrain),
               InvalidInput);
}

TEST(DropoutTest, TrainModeAveragesToInferMode) {
  NetworkModel net = random_net(3, {32}, 4, 0.2, 5);
  // Small output weights keep the softmax close to linear.
  net.mutable_layers().back().weights *= 0.2;
  Eigen::VectorXd x(6);
  x << 0.6, 0.3, 0.9, 1, 0, 1;
  const Eigen::VectorXd infer = forward(net, x, ForwardMode::kInfer);
  Rng rng(6);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  const int draws = 20'000;
  for (int i = 0; i < draws; ++i) mean += forward(net, x, ForwardMode::kTrain, &rng);
  mean /= draws;
  for (Eigen::Index k = 0; k < 4; ++k) {
    EXPECT_NEAR(mean[k], infer[k], 0.02 * infer[k]) << k;
  }
}

TEST(GradientTest, MatchesCentralDifferences) {
  // 4 inputs, 6 and 5 hidden units, 3 outputs: 83 parameters.
  const NetworkModel net = random_net(2, {6, 5}, 3, 0.0, 21);
  Rng rng(22);
  Eigen::MatrixXd x(4, 7);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1.5);
  const std::vector<std::size_t> labels{0, 2, 1, 1, 0, 2, 2};
  const LossGradient lg = loss_and_gradient(net, x, labels, ForwardMode::kInfer);

  const double h = 1e-5;
  std::size_t checked = 0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto check = [&](auto get_param, double analytic) {
      NetworkModel plus = net;
      NetworkModel minus = net;
      get_param(plus) += h;
      get_param(minus) -= h;
      const double numeric =
          (batch_loss(plus, x, labels) - batch_loss(minus, x, labels)) / (2 * h);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-4)
          << "layer " << l << " analytic " << analytic << " numeric " << numeric;
      ++checked;
    };
    const auto& w = net.layers()[l].weights;
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        check([&](NetworkModel& m) -> double& {
          return m.mutable_layers()[l].weights(r, c);
        }, lg.gradients[l].weights(r, c));
      }
      check([&](NetworkModel& m) -> double& {
        return m.mutable_layers()[l].bias[r];
      }, lg.gradients[l].bias[r]);
    }
  }
  EXPECT_EQ(checked, 83u);
}

TEST(LossTest, Examples) {
  // Zero weights: uniform softmax over K cells, loss ln K.
  NetworkModel net = random_net(2, {4}, 5, 0.0, 1);
  for (auto& l : net.mutable_layers()) {
    l.weights.setZero();
    l.bias.setZero();
  }
  FeatureVector f(2);
  f.rss = {-70, 0};
  f.active_bits = {1, 0};
  const std::vector<Example> data{{f, {3}}, {f, {0}}};
  EXPECT_NEAR(loss(net, data), std::log(5.0), 1e-12);

  // A net that puts all mass on cell 2 for this input.
  net.mutable_layers().back().bias[2] = 1000;
  const std::vector<Example> perfect{{f, {2}}};
  EXPECT_NEAR(loss(net, perfect), 0.0, 1e-12);
  EXPECT_THROW(loss(net, std::vector<Example>{}), InvalidInput);
}

TEST(LossTest, ConcatenationIsWeightedMean) {
  const NetworkModel net = random_net(3, {8}, 4, 0.0, 7);
  Rng rng(8);
  std::vector<Example> all;
  for (int i = 0; i < 9; ++i) {
    FeatureVector f(3);
    for (auto& v : f.rss) v = rng.bernoulli(0.7) ? rng.uniform(-110, -50) : 0.0;
    for (auto& v : f.active_bits) v = rng.bernoulli(0.5);
    all.push_back({f, {rng.uniform_index(4)}});
  }
  const std::span<const Example> s(all);
  const double whole = loss(net, s);
  const double parts = (4 * loss(net, s.first(4)) + 5 * loss(net, s.last(5))) / 9;
  EXPECT_NEAR(whole, parts, 1e-12);
}

TEST(NormalizeTest, AffineWithUnheardAtZero) {
  const NetworkModel net = random_net(3, {4}, 2, 0.0, 1);
  FeatureVector f(3);
  f.rss = {-113, 0, -40};
  f.active_bits = {1, 0, 1};
  const Eigen::VectorXd x = net.normalize(f);
  EXPECT_EQ(x[0], 0.0);
  EXPECT_EQ(x[1], 0.0);
  EXPECT_EQ(x[2], 1.0);
  EXPECT_EQ(x[3], 1.0);
  EXPECT_EQ(x[5], 1.0);
  EXPECT_THROW(net.normalize(FeatureVector(2)), InvalidInput);
}

// Two clusters, each hearing its own tower, in the two cells of a 2x1 grid.
std::vector<LabeledSample> two_clusters(Rng& rng, int per_cluster) {
  std::vector<LabeledSample> data;
  for (int i = 0; i < per_cluster; ++i) {
    LabeledSample a;
    a.location = {rng.uniform(5, 45), rng.uniform(5, 45)};
    a.features.rss = {rng.uniform(-70, -60), rng.uniform(-110, -100)};
    a.features.active_bits = {1, 0};
    data.push_back(a);
    LabeledSample b;
    b.location = {rng.uniform(55, 95), rng.uniform(5, 45)};
    b.features.rss = {rng.uniform(-110, -100), rng.uniform(-70, -60)};
    b.features.active_bits = {0, 1};
    data.push_back(b);
  }
  return data;
}

TEST(TrainTest, SeparatesTwoClusters) {
  Rng rng(12);
  const auto data = two_clusters(rng, 20);
  const VirtualGrid grid({0, 0}, 50, 2, 1);
  NetworkConfig cfg;
  cfg.hidden_layers = {16, 8};
  cfg.epochs = 200;
  cfg.learning_rate = 1e-3;
  cfg.seed = 3;
  const auto result = train(data, grid, TowerRegistry({"T0", "T1"}), cfg);
  for (const auto& s : data) {
    const auto dist = result.model.cell_distribution(s.features);
    const auto best = std::max_element(dist.begin(), dist.end()) - dist.begin();
    EXPECT_EQ(static_cast<std::size_t>(best), grid.cell_of(s.location).value);
  }
  EXPECT_LT(result.trace.final_loss, result.trace.epoch_loss.front());
}

TEST(TrainTest, FullBatchSgdLossDoesNotIncrease) {
  Rng rng(13);
  const auto data = two_clusters(rng, 10);
  NetworkConfig cfg;
  cfg.hidden_layers = {8};
  cfg.optimizer = Optimizer::kSgd;
  cfg.learning_rate = 1e-3;
  cfg.dropout_rate = 0.0;
  cfg.batch_size = data.size();
  cfg.epochs = 10;
  const auto r = train(data, VirtualGrid({0, 0}, 50, 2, 1),
                       TowerRegistry({"T0", "T1"}), cfg);
  ASSERT_EQ(r.trace.epoch_loss.size(), 10u);
  for (std::size_t e = 1; e < 10; ++e) {
    EXPECT_LE(r.trace.epoch_loss[e], r.trace.epoch_loss[e - 1] + 1e-3);
  }
}

TEST(TrainTest, SameSeedIsBitIdentical) {
  Rng rng(14);
  const auto data = two_clusters(rng, 15);
  NetworkConfig cfg;
  cfg.hidden_layers = {8, 8};
  cfg.epochs = 15;
  cfg.seed = 77;
  const VirtualGrid grid({0, 0}, 50, 2, 1);
  const TowerRegistry reg({"T0", "T1"});
  const auto a = train(data, grid, reg, cfg);
  const auto b = train(data, grid, reg, cfg);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.model, b.model);

  cfg.dropout_rate = 0.0;
  cfg.batch_size = data.size();
  EXPECT_EQ(train(data, grid, reg, cfg).model.layers(),
            train(data, grid, reg, cfg).model.layers());

  cfg.seed = 78;
  EXPECT_NE(train(data, grid, reg, cfg).model.layers(), a.model.layers());
}

TEST(TrainTest, PrunedCellsGetZeroProbability) {
  Rng rng(15);
  const auto data = two_clusters(rng, 5);
  NetworkConfig cfg;
  cfg.hidden_layers = {4};
  cfg.epochs = 2;
  cfg.prune_empty_cells = true;
  // Third column is empty.
  const auto r = train(data, VirtualGrid({0, 0}, 50, 3, 1),
                       TowerRegistry({"T0", "T1"}), cfg);
  EXPECT_EQ(r.model.output_dim(), 2u);
  EXPECT_EQ(r.model.cell_distribution(data[0].features)[2], 0.0);
  EXPECT_THROW(r.model.class_of({2}), OutOfBounds);
}

TEST(TrainTest, RejectsBadConfig) {
  Rng rng(16);
  const auto data = two_clusters(rng, 2);
  const VirtualGrid grid({0, 0}, 50, 2, 1);
  const TowerRegistry reg({"T0", "T1"});
  NetworkConfig cfg;
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(train(data, grid, reg, cfg), InvalidInput);
  cfg = NetworkConfig{};
  cfg.learning_rate = 0;
  EXPECT_THROW(train(data, grid, reg, cfg), InvalidInput);
  EXPECT_THROW(train({}, grid, reg, NetworkConfig{}), InvalidInput);
}

TEST(ArtifactTest, RoundTripIsExact) {
  Rng rng(17);
  const auto data = two_clusters(rng, 10);
  NetworkConfig cfg;
  cfg.hidden_layers = {8, 4};
  cfg.epochs = 5;
  cfg.use_active_bits = false;
  auto r = train(data, VirtualGrid({-3.25, 0.125}, 52, 2, 1),
                 TowerRegistry({"T0", "T1"}), cfg);
  r.model.set_origin({31.2000001, 29.9000002});
  std::stringstream buf;
  save_model(r.model, buf);
  const NetworkModel back = load_model(buf);
  EXPECT_EQ(back, r.model);
  EXPECT_FALSE(back.use_active_bits());
  for (const auto& s : data) {
    EXPECT_EQ(back.cell_distribution(s.features),
              r.model.cell_distribution(s.features));
  }
}

TEST(ArtifactTest, RejectsCorruptInput) {
  std::stringstream wrong("not-a-model v1\n");
  EXPECT_THROW(load_model(wrong), InvalidInput);
  std::stringstream empty;
  EXPECT_THROW(load_model(empty), InvalidInput);
  EXPECT_THROW(load_model(std::string("/nonexistent/model.txt")), NotFound);
}

}  // namespace
}  // namespace deepcell
