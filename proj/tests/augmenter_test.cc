#include "deepcell/augmenter.h"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "deepcell/errors.h"
#include "deepcell/random.h"

namespace deepcell {
namespace {

GpHyperparams zero_prior(double length_scale, double noise) {
  GpHyperparams hp;
  hp.length_scale_m = length_scale;
  hp.noise_variance = noise;
  hp.prior_mean = PriorMean::kZeroCentered;
  return hp;
}

// Posterior from an explicit inverse of the dense covariance, written out
// element by element without the library's kernel_matrix.
struct Oracle {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

Oracle dense_oracle(const std::vector<PlanarPoint>& x,
                    const std::vector<double>& y, double prior,
                    const std::vector<PlanarPoint>& probes, double ell,
                    double noise) {
  const auto k = [ell](const PlanarPoint& a, const PlanarPoint& b) {
    const double d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
    return std::exp(-d2 / (2 * ell * ell));
  };
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      c(i, j) = k(x[i], x[j]) + (i == j ? noise : 0.0);
    }
  }
  const Eigen::MatrixXd inv = c.inverse();
  Eigen::VectorXd centered(n);
  for (Eigen::Index i = 0; i < n; ++i) centered[i] = y[i] - prior;
  Oracle out{Eigen::VectorXd(probes.size()), Eigen::VectorXd(probes.size())};
  for (std::size_t p = 0; p < probes.size(); ++p) {
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks[i] = k(x[i], probes[p]);
    out.mean[p] = ks.dot(inv * centered) + prior;
    out.variance[p] = std::max(0.0, 1.0 - ks.dot(inv * ks));
  }
  return out;
}

TEST(KernelTest, KnownValues) {
  const PlanarPoint p{3, 4};
  EXPECT_EQ(kernel(p, p, 100), 1.0);
  EXPECT_NEAR(kernel({0, 0}, {100, 0}, 100), 0.60653, 1e-5);
  EXPECT_NEAR(kernel({0, 0}, {0, 300}, 100), 0.01111, 1e-5);
}

TEST(KernelTest, MatrixSymmetricWithUnitDiagonal) {
  Rng rng(3);
  std::vector<PlanarPoint> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({rng.uniform(0, 500), rng.uniform(0, 500)});
  const Eigen::MatrixXd k = kernel_matrix(pts, pts, 80);
  EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  for (Eigen::Index i = 0; i < k.rows(); ++i) EXPECT_EQ(k(i, i), 1.0);
}

TEST(GaussianProcessTest, SinglePointAtMeanHasZeroAlpha) {
  const std::vector<PlanarPoint> x{{0, 0}};
  const std::vector<double> y{-70};
  GpHyperparams hp;
  hp.prior_mean = PriorMean::kConstantTrainingMean;
  const auto gp = GaussianProcess::fit(x, y, hp);
  EXPECT_EQ(gp.prior_mean(), -70.0);
  EXPECT_EQ(gp.alpha()[0], 0.0);
}

TEST(GaussianProcessTest, NoiselessInterpolationOfFarApartPoints) {
  const std::vector<PlanarPoint> x{{0, 0}, {1000, 0}};
  const std::vector<double> y{-60, -90};
  const auto gp = GaussianProcess::fit(x, y, zero_prior(100, 0.0));
  const auto pred = gp.predict(x);
  EXPECT_NEAR(pred.mean[0], -60, 1e-8);
  EXPECT_NEAR(pred.mean[1], -90, 1e-8);
  EXPECT_NEAR(pred.variance[0], 0.0, 1e-8);
  EXPECT_NEAR(pred.variance[1], 0.0, 1e-8);
}

TEST(GaussianProcessTest, FarProbeRevertsToPrior) {
  const std::vector<PlanarPoint> x{{0, 0}, {50, 0}};
  const std::vector<double> y{-60, -80};
  GpHyperparams hp;
  const auto gp = GaussianProcess::fit(x, y, hp);
  const std::vector<PlanarPoint> far{{100'000, 0}};
  const auto pred = gp.predict(far);
  EXPECT_NEAR(pred.mean[0], -70.0, 1e-12);
  EXPECT_NEAR(pred.variance[0], 1.0, 1e-12);
}

TEST(GaussianProcessTest, MidpointMatchesDenseOracle) {
  const std::vector<PlanarPoint> x{{0, 0}, {120, 0}};
  const std::vector<double> y{-65, -85};
  const std::vector<PlanarPoint> mid{{60, 0}};
  const auto gp = GaussianProcess::fit(x, y, zero_prior(100, 0.1));
  const auto want = dense_oracle(x, y, 0.0, mid, 100, 0.1);
  const auto got = gp.predict(mid);
  EXPECT_NEAR(got.mean[0], want.mean[0], 1e-8);
  EXPECT_NEAR(got.variance[0], want.variance[0], 1e-8);
}

TEST(GaussianProcessProperty, MatchesDenseOracleOnRandomInstances) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(50);
    const double ell = rng.uniform(30, 300);
    const double noise = rng.uniform(0.05, 5.0);
    std::vector<PlanarPoint> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back({rng.uniform(0, 1000), rng.uniform(0, 1000)});
      y.push_back(rng.uniform(-110, -50));
    }
    std::vector<PlanarPoint> probes;
    for (int i = 0; i < 10; ++i) {
      probes.push_back({rng.uniform(-100, 1100), rng.uniform(-100, 1100)});
    }
    GpHyperparams hp = zero_prior(ell, noise);
    hp.prior_mean = trial % 2 ? PriorMean::kConstantTrainingMean
                              : PriorMean::kZeroCentered;
    const double prior =
        trial % 2 ? std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n)
                  : 0.0;
    const auto gp = GaussianProcess::fit(x, y, hp);
    const auto got = gp.predict(probes);
    const auto want = dense_oracle(x, y, prior, probes, ell, noise);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      EXPECT_NEAR(got.mean[p], want.mean[p], 1e-8) << "trial " << trial;
      EXPECT_NEAR(got.variance[p], want.variance[p], 1e-8) << "trial " << trial;
      EXPECT_GE(got.variance[p], 0.0);
    }
    EXPECT_LE((gp.predict_mean(probes) - got.mean).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(GaussianProcessTest, RejectsBadInput) {
  const std::vector<PlanarPoint> x{{0, 0}};
  const std::vector<double> y{-70, -71};
  EXPECT_THROW(GaussianProcess::fit(x, y, GpHyperparams{}), InvalidInput);
  EXPECT_THROW(GaussianProcess::fit({}, {}, GpHyperparams{}), InvalidInput);
  GpHyperparams bad;
  bad.length_scale_m = 0;
  EXPECT_THROW(GaussianProcess::fit(x, std::vector<double>{-70}, bad),
               InvalidInput);
}

TEST(GaussianProcessTest, DuplicatePointsWithoutNoiseAreSingular) {
  const std::vector<PlanarPoint> x{{5, 5}, {5, 5}};
  const std::vector<double> y{-70, -72};
  EXPECT_THROW(GaussianProcess::fit(x, y, zero_prior(100, 0.0)),
               NumericalError);
}

LabeledSample sample(PlanarPoint at, std::vector<double> rss,
                     std::vector<double> bits) {
  LabeledSample s;
  s.location = at;
  s.features.rss = std::move(rss);
  s.features.active_bits = std::move(bits);
  return s;
}

TEST(TowerGpTest, UnheardTowerIsUnmodeled) {
  const std::vector<LabeledSample> data{sample({0, 0}, {-70, 0}, {1, 0})};
  const auto gp = TowerGp::fit(data, 1, GpHyperparams{});
  EXPECT_FALSE(gp.modeled());
  EXPECT_EQ(gp.support_size(), 0u);
  const std::vector<PlanarPoint> probe{{0, 0}};
  EXPECT_EQ(gp.predict_rss(probe).mean[0], 0.0);
  const auto heard = TowerGp::fit(data, 0, GpHyperparams{});
  EXPECT_TRUE(heard.modeled());
  EXPECT_EQ(heard.support_size(), 1u);
}

TEST(ResampleTest, EvenArcLengthSpacing) {
  const std::vector<std::vector<PlanarPoint>> traces{
      {{0, 0}, {25, 0}, {25, 10}}, {{100, 100}}};
  const auto pts = resample_traces(traces, 10);
  // 35 m of path: 0, 10, 20, corner+5, corner+10, plus the lone point.
  ASSERT_EQ(pts.size(), 5u);
  EXPECT_EQ(pts[0], (PlanarPoint{0, 0}));
  EXPECT_NEAR(pts[2].x, 20, 1e-12);
  EXPECT_NEAR(pts[3].x, 25, 1e-12);
  EXPECT_NEAR(pts[3].y, 5, 1e-12);
  EXPECT_EQ(pts[4], (PlanarPoint{100, 100}));
}

std::vector<std::vector<PlanarPoint>> line_trace(double length) {
  return {{{0, 0}, {length, 0}}};
}

TEST(AugmentTest, ZeroRequestedReturnsInput) {
  const std::vector<LabeledSample> data{sample({0, 0}, {-70}, {1})};
  AugmentConfig cfg;
  cfg.n_augmented = 0;
  const auto r = augment(data, line_trace(500), cfg, GpHyperparams{},
                         TowerRegistry({"T0"}));
  EXPECT_EQ(r.samples, data);
  EXPECT_EQ(r.synthesized, 0u);
}

TEST(AugmentTest, EmptySparseWarns) {
  const auto r = augment({}, line_trace(500), AugmentConfig{}, GpHyperparams{},
                         TowerRegistry({"T0"}));
  EXPECT_TRUE(r.samples.empty());
  EXPECT_EQ(r.warnings, 1u);
}

TEST(AugmentTest, ConstantFieldStaysConstant) {
  std::vector<LabeledSample> data;
  for (int i = 0; i <= 20; ++i) {
    data.push_back(sample({i * 25.0, 0}, {-70}, {1}));
  }
  const auto before = data;
  AugmentConfig cfg;
  cfg.n_augmented = 30;
  cfg.seed = 9;
  const auto r = augment(data, line_trace(500), cfg, GpHyperparams{},
                         TowerRegistry({"T0"}));
  EXPECT_EQ(data, before);
  ASSERT_EQ(r.samples.size(), data.size() + 30);
  EXPECT_EQ(r.synthesized, 30u);
  for (std::size_t i = data.size(); i < r.samples.size(); ++i) {
    EXPECT_NEAR(r.samples[i].features.rss[0], -70.0, 1e-6);
    EXPECT_EQ(r.samples[i].features.active_bits[0], 1.0);
    EXPECT_EQ(r.samples[i].source, SampleSource::kAugmented);
    EXPECT_EQ(r.samples[i].location.y, 0.0);
  }
}

TEST(AugmentTest, CountLimitedByAvailableLocations) {
  const std::vector<LabeledSample> data{sample({0, 0}, {-70}, {1})};
  AugmentConfig cfg;
  cfg.n_augmented = 1000;
  // 100 m line at 10 m spacing: 11 locations.
  const auto r = augment(data, line_trace(100), cfg, GpHyperparams{},
                         TowerRegistry({"T0"}));
  EXPECT_EQ(r.synthesized, 11u);
  EXPECT_EQ(r.samples.size(), 12u);
}

TEST(AugmentTest, DoesNotInventCoverageFarFromData) {
  // Tower 1 is only heard near x = 0; far along the trace it must stay off.
  std::vector<LabeledSample> data;
  for (int i = 0; i <= 40; ++i) {
    const double x = i * 50.0;
    data.push_back(sample({x, 0}, {-70, x < 200 ? -80.0 : 0.0},
                          {1, 0}));
  }
  AugmentConfig cfg;
  cfg.n_augmented = 200;
  const auto r = augment(data, line_trace(2000), cfg, GpHyperparams{},
                         TowerRegistry({"T0", "T1"}));
  for (std::size_t i = data.size(); i < r.samples.size(); ++i) {
    const auto& s = r.samples[i];
    if (s.location.x > 600) EXPECT_FALSE(s.features.heard(1)) << s.location.x;
    if (s.location.x < 100) EXPECT_TRUE(s.features.heard(1)) << s.location.x;
  }
}

TEST(AugmentTest, DeterministicForSeed) {
  std::vector<LabeledSample> data;
  Rng rng(1);
  for (int i = 0; i < 30; ++i) {
    data.push_back(sample({rng.uniform(0, 300), rng.uniform(0, 300)},
                          {rng.uniform(-100, -60), rng.uniform(-100, -60)},
                          {1, 0}));
  }
  const std::vector<std::vector<PlanarPoint>> traces{{{0, 0}, {300, 300}}};
  AugmentConfig cfg;
  cfg.n_augmented = 20;
  cfg.seed = 4;
  const TowerRegistry reg({"T0", "T1"});
  const auto a = augment(data, traces, cfg, GpHyperparams{}, reg);
  const auto b = augment(data, traces, cfg, GpHyperparams{}, reg);
  EXPECT_EQ(a.samples, b.samples);
}

}  // namespace
}  // namespace deepcell
