#include <gtest/gtest.h>

#include <random>

#include "tacdss/datagen.hpp"
#include "tacdss/lm_opt.hpp"
#include "tacdss/pipeline.hpp"

using namespace tacdss;
using lm::Matrix;
using lm::Vector;

namespace {

struct LinearFixture {
  Matrix a;
  Vector t;
};

LinearFixture linear_fixture(std::uint64_t seed, int rows = 8, int cols = 3) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  LinearFixture f{Matrix(rows, cols), Vector(rows)};
  for (auto& v : f.a.reshaped()) v = unif(gen);
  for (auto& v : f.t) v = unif(gen);
  return f;
}

double relative(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(LmStep, NewtonLimitReachesLeastSquaresOptimum) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const LinearFixture f = linear_fixture(seed);
    const Vector x0 = Vector::Constant(3, 0.25);
    // e(x) = t - A x, so de/dx = -A.
    const Vector e = f.t - f.a * x0;
    const Vector x1 = x0 - lm::lm_step(-f.a, e, 0.0);
    const Vector optimum = f.a.householderQr().solve(f.t);
    EXPECT_LT(relative(x1, optimum), 1e-10);
    // The combined sign descends.
    EXPECT_LT((f.t - f.a * x1).squaredNorm(), e.squaredNorm());
  }
}

TEST(LmStep, LargeDampingIsShortGradientStep) {
  const LinearFixture f = linear_fixture(3);
  const Vector e = f.t;
  const Vector g = (-f.a).transpose() * e;
  const double mu = 1e12;
  EXPECT_LT(relative(lm::lm_step(-f.a, e, mu), g / mu), 1e-6);
}

TEST(LmStep, HandSolvedTwoByTwo) {
  // (J^T J + I) = [11 14; 14 21], J^T e = (4, 6) -> delta = (0, 2/7).
  Matrix j(2, 2);
  j << 1, 2,
       3, 4;
  const Vector delta = lm::lm_step(j, Vector::Ones(2), 1.0);
  EXPECT_NEAR(delta(0), 0.0, 1e-15);
  EXPECT_NEAR(delta(1), 2.0 / 7.0, 1e-15);
}

TEST(LmStep, SingularWithoutDamping) {
  Matrix j(3, 2);
  j << 1, 0,
       2, 0,
       3, 0;
  EXPECT_THROW(lm::lm_step(j, Vector::Ones(3), 0.0), SingularMatrix);
  EXPECT_NO_THROW(lm::lm_step(j, Vector::Ones(3), 1e-3));
  EXPECT_THROW(lm::lm_step(j, Vector::Ones(2), 1.0), InvalidArgument);
  EXPECT_THROW(lm::lm_step(j, Vector::Ones(3), -1.0), InvalidArgument);
}

TEST(LmStep, StepShrinksTenfoldOnceDampingDominates) {
  const LinearFixture f = linear_fixture(9);
  const Matrix j = -f.a;
  const double top = Eigen::SelfAdjointEigenSolver<Matrix>(j.transpose() * j).eigenvalues().maxCoeff();
  for (double mu = 100 * top; mu < 1e8 * top; mu *= 10) {
    const double ratio = lm::lm_step(j, f.t, mu).norm() / lm::lm_step(j, f.t, 10 * mu).norm();
    EXPECT_NEAR(ratio, 10.0, 2.0) << "mu=" << mu;
  }
}

TEST(LmConfig, Validation) {
  lm::LmConfig c;
  EXPECT_NO_THROW(c.validate());
  c.mu0 = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.mu_inc = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.mu_dec = 0.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.mu_max = c.mu0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.max_epochs = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Train, ZeroInitialResidualStopsImmediately) {
  const nnet::Network net = nnet::Network::random({4, 5, 3}, 2);
  nnet::Batch batch;
  for (int k = 0; k < 5; ++k) {
    const Vector x = Vector::Constant(4, 0.2 * k);
    batch.push_back({x, nnet::forward(net, x)});
  }
  const auto [out, report] = lm::train(net, batch, {});
  EXPECT_EQ(report.loss_trace, std::vector<double>{0.0});
  EXPECT_EQ(report.epochs_run, 0);
  EXPECT_EQ(report.stop_reason, lm::StopReason::kLossTol);
  EXPECT_EQ(out, net);
}

TEST(Train, LinearUnitConvergesInThreeEpochs) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vector w = (Vector(4) << 0.7, -0.3, 0.2, 0.9).finished();
  nnet::Batch batch;
  for (int k = 0; k < 12; ++k) {
    Vector x(4);
    for (auto& v : x) v = unif(gen);
    batch.push_back({x, Vector::Constant(1, w.dot(x) - 0.4)});
  }
  lm::LmConfig config;
  config.mu0 = 1e-9;
  config.max_epochs = 3;
  const auto [net, report] = lm::train(nnet::Network({4, 1}), batch, config);
  EXPECT_LT(report.final_sse, 1e-20);
  EXPECT_LE(report.epochs_run, 3);
  EXPECT_LT(nnet::sse(net, batch), 1e-20);
}

TEST(Train, PipelineRowsReachLowErrorMonotonically) {
  const MasterDataset master = generate_master(100, 42);
  fcm::FcmConfig fcm_config;
  fcm_config.seed = 42;
  const Eigen::MatrixXd x = normalize_all(master.events);
  const RegionTargets regions = build_targets(x, fcm_config);
  const auto [net, report] =
      lm::train(nnet::Network::random({4, 10, 3}, 42), make_batch(x, regions.targets), lm::LmConfig{});
  EXPECT_LT(report.final_mse, 1e-3);
  for (std::size_t k = 1; k < report.loss_trace.size(); ++k) EXPECT_LT(report.loss_trace[k], report.loss_trace[k - 1]);
  EXPECT_EQ(report.loss_trace.size(), report.mu_trace.size());
  EXPECT_EQ(report.accepted_steps, report.epochs_run);
  EXPECT_DOUBLE_EQ(report.final_rmse, std::sqrt(report.final_mse));
}

TEST(Train, Deterministic) {
  const MasterDataset master = generate_master(60, 3);
  const Eigen::MatrixXd x = normalize_all(master.events);
  fcm::FcmConfig fcm_config;
  const RegionTargets regions = build_targets(x, fcm_config);
  lm::LmConfig config;
  config.max_epochs = 50;
  const auto net = nnet::Network::random({4, 6, 3}, 8);
  const auto a = lm::train(net, make_batch(x, regions.targets), config);
  const auto b = lm::train(net, make_batch(x, regions.targets), config);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Train, StallsWhenNoStepCanHelp) {
  // Contradictory targets for one input: zero parameters are already optimal.
  nnet::Batch batch{{Vector::Ones(1), Vector::Constant(1, 1.0)}, {Vector::Ones(1), Vector::Constant(1, -1.0)}};
  lm::LmConfig config;
  config.mu_max = 1.0;
  try {
    lm::train(nnet::Network({1, 1}), batch, config);
    FAIL() << "expected StalledOptimizer";
  } catch (const lm::StalledOptimizer& e) {
    EXPECT_EQ(e.report().accepted_steps, 0);
    EXPECT_GT(e.report().rejected_steps, 0);
    EXPECT_EQ(e.report().loss_trace, std::vector<double>{2.0});
    EXPECT_EQ(e.report().stop_reason, lm::StopReason::kMuMax);
  }
}

TEST(Train, RejectsEmptyBatch) {
  EXPECT_THROW(lm::train(nnet::Network({4, 3}), {}, {}), InvalidArgument);
}
