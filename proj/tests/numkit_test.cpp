#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include "fedfair/numkit.hpp"
#include "test_support.hpp"

using namespace fedfair;
using fedfair::testing::random_batch;
using fedfair::testing::random_params;

namespace {

// Central differences on the loss, independent of the analytic backward pass.
std::vector<double> finite_difference_gradient(ModelParams p, const LabeledBatch &data, double h = 1e-5) {
  std::vector<double> g(p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double orig = p.values[i];
    p.values[i] = orig + h;
    const double up = loss(p, data);
    p.values[i] = orig - h;
    const double down = loss(p, data);
    p.values[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(const std::vector<double> &a, const std::vector<double> &b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

} // namespace

TEST(RngStream, SameSeedAndStreamGiveSameDraws) {
  RngStream a(7, 3), b(7, 3), c(7, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(RngStream, DerivedStreamsDoNotDependOnParentConsumption) {
  RngStream a(11, 0), b(11, 0);
  for (int i = 0; i < 50; ++i) b.uniform();
  auto ca = a.derive({5, 9});
  auto cb = b.derive({5, 9});
  for (int i = 0; i < 20; ++i) EXPECT_EQ(ca.next_u64(), cb.next_u64());
}

TEST(RngStream, GammaMeanMatchesShape) {
  RngStream rng(3, 1);
  for (double shape : {0.3, 1.0, 4.0}) {
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) sum += rng.gamma(shape);
    // Var = shape; 5 standard errors
    EXPECT_NEAR(sum / n, shape, 5.0 * std::sqrt(shape / n)) << "shape " << shape;
  }
}

TEST(Gradient, MatchesFiniteDifferencesForBothModelKinds) {
  RngStream rng(2024, 1);
  for (auto kind : {ModelKind::logistic, ModelKind::mlp}) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const auto batch = random_batch(20, 5, 3, rng);
      const auto params = random_params(kind, 5, 3, rng);
      worst = std::max(worst, max_relative_error(gradient(params, batch), finite_difference_gradient(params, batch)));
    }
    EXPECT_LT(worst, 1e-4) << to_string(kind);
  }
}

TEST(Gradient, DuplicatedDatasetGivesSameGradient) {
  RngStream rng(5, 5);
  const auto batch = random_batch(15, 4, 2, rng);
  const auto params = random_params(ModelKind::mlp, 4, 2, rng);
  std::vector<std::size_t> twice;
  for (std::size_t i = 0; i < batch.size(); ++i) twice.insert(twice.end(), {i, i});
  const auto g1 = gradient(params, batch);
  const auto g2 = gradient(params, batch.subset(twice));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-14 * std::max(1.0, std::abs(g1[i])));
}

TEST(Gradient, VanishesAtOneDimensionalMinimum) {
  RngStream rng(8, 2);
  const auto batch = random_batch(30, 3, 2, rng);
  auto params = random_params(ModelKind::logistic, 3, 2, rng);
  const std::size_t coord = 1;
  // The loss is convex in a single logistic weight: golden-section search for the minimum.
  double lo = -50.0, hi = 50.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double v) {
    params.values[coord] = v;
    return loss(params, batch);
  };
  while (hi - lo > 1e-11) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    if (f(a) < f(b)) hi = b;
    else lo = a;
  }
  params.values[coord] = (lo + hi) / 2.0;
  EXPECT_NEAR(gradient(params, batch)[coord], 0.0, 1e-6);
}

TEST(TrainLocal, ReachesHighAccuracyOnSeparableBlobs) {
  const auto data = fedfair::testing::blobs(200, 3.0, 17);
  RngStream rng(17, 1);
  const auto init = make_model(ModelKind::logistic, 2, 2, rng);
  const auto trained = train_local(init, data, 5, 0.5, rng);
  EXPECT_GE(evaluate(trained, data).accuracy, 0.95);
}

TEST(TrainLocal, ZeroLearningRateIsIdentity) {
  RngStream rng(1, 1);
  const auto data = random_batch(40, 3, 2, rng);
  const auto p = random_params(ModelKind::mlp, 3, 2, rng);
  EXPECT_EQ(train_local(p, data, 3, 0.0, rng).values, p.values);
}

TEST(TrainLocal, RejectsBadPreconditions) {
  RngStream rng(1, 1);
  const auto data = random_batch(10, 3, 2, rng);
  const auto p = random_params(ModelKind::logistic, 3, 2, rng);
  EXPECT_THROW(train_local(p, data, 0, 0.1, rng), ConfigError);
  EXPECT_THROW(train_local(p, LabeledBatch{}, 1, 0.1, rng), ConfigError);
  const auto wide = random_batch(10, 4, 2, rng);
  EXPECT_THROW(train_local(p, wide, 1, 0.1, rng), ConfigError);
}

TEST(TrainLocal, DeterministicAcrossThreads) {
  RngStream setup(9, 9);
  const auto data = random_batch(100, 4, 2, setup);
  const auto p = random_params(ModelKind::mlp, 4, 2, setup);
  auto run = [&] {
    RngStream rng(123, 4);
    return train_local(p, data, 3, 0.1, rng, 16);
  };
  const auto ref = run();
  std::vector<ModelParams> outs(4);
  std::vector<std::thread> pool;
  for (auto &o : outs) pool.emplace_back([&o, &run] { o = run(); });
  for (auto &t : pool) t.join();
  for (const auto &o : outs) EXPECT_EQ(o.values, ref.values);
}

TEST(Averaging, CopiesAverageToThemselvesExactly) {
  RngStream rng(4, 4);
  const auto p = random_params(ModelKind::mlp, 6, 3, rng);
  for (std::size_t n : {1u, 2u, 3u, 7u}) {
    std::vector<ModelParams> copies(n, p);
    EXPECT_EQ(average(copies).values, p.values);
  }
}

TEST(Averaging, RejectsIncompatibleShapes) {
  RngStream rng(4, 4);
  std::vector<ModelParams> mixed{random_params(ModelKind::logistic, 3, 2, rng),
                                 random_params(ModelKind::mlp, 3, 2, rng)};
  EXPECT_THROW(average(mixed), ProtocolError);
}

TEST(Evaluate, ConstantPredictorOnSingleClassData) {
  RngStream rng(2, 2);
  auto data = random_batch(25, 3, 2, rng);
  std::fill(data.labels.begin(), data.labels.end(), 0);
  auto p = make_model(ModelKind::logistic, 3, 2, rng);
  std::fill(p.values.begin(), p.values.end(), 0.0); // tie on every sample -> class 0
  const auto r = evaluate(p, data);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
}

TEST(Evaluate, ConstantPredictorOnBalancedRandomLabels) {
  RngStream rng(31, 2);
  const std::size_t n = 1000;
  const auto data = random_batch(n, 3, 2, rng);
  auto p = make_model(ModelKind::logistic, 3, 2, rng);
  std::fill(p.values.begin(), p.values.end(), 0.0);
  std::size_t zeros = 0;
  for (int y : data.labels) zeros += y == 0;
  const double acc = evaluate(p, data).accuracy;
  EXPECT_DOUBLE_EQ(acc, static_cast<double>(zeros) / n); // direct count
  EXPECT_NEAR(acc, 0.5, 2.576 * std::sqrt(0.25 / n));   // binomial 99% band
}

TEST(Evaluate, ConfusionCountsMatchHandTally) {
  // sample:     0  1  2  3  4  5
  // label:      1  1  0  0  1  0
  // predicted:  1  0  1  0  1  0
  // attribute:  1  1  1  0  0  0
  // group a=1 (0,1,2): TP=1 FN=1 FP=1 TN=0; group a=0 (3,4,5): TP=1 FN=0 FP=0 TN=2
  const std::vector<int> labels{1, 1, 0, 0, 1, 0};
  const std::vector<int> preds{1, 0, 1, 0, 1, 0};
  const std::vector<std::uint8_t> flags{1, 1, 1, 0, 0, 0};
  const auto c = tally_confusion(preds, labels, flags, 1);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].groups[1], (ConfusionCounts{1, 1, 0, 1}));
  EXPECT_EQ(c[0].groups[0], (ConfusionCounts{1, 0, 2, 0}));
}

TEST(Evaluate, ConfusionFromEvaluateUsesModelPredictions) {
  RngStream rng(12, 1);
  const auto data = random_batch(60, 3, 2, rng, 2);
  const auto p = random_params(ModelKind::logistic, 3, 2, rng);
  const auto r = evaluate(p, data);
  const auto expected = tally_confusion(predict(p, data), data.labels, data.attribute_flags, 2);
  EXPECT_EQ(r.confusion, expected);
}
