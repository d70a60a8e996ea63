#include <gtest/gtest.h>

#include <numeric>

#include "aeroforecast/error.hpp"
#include "aeroforecast/trainers.hpp"
#include "oracles.hpp"

using namespace aerofc;

namespace {

// r_i = a * x_i + b - y_i
class LinearFit : public LeastSquaresProblem {
 public:
  LinearFit(Eigen::VectorXd x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {}
  std::size_t num_params() const override { return 2; }
  std::size_t num_residuals() const override { return static_cast<std::size_t>(x_.size()); }
  Eigen::VectorXd residuals(const Eigen::VectorXd& th) const override {
    return (th(0) * x_.array() + th(1) - y_.array()).matrix();
  }
  void residuals_and_jacobian(const Eigen::VectorXd& th, Eigen::VectorXd& e, Eigen::MatrixXd& J) const override {
    e = residuals(th);
    J.resize(x_.size(), 2);
    J.col(0) = x_;
    J.col(1).setOnes();
  }

 private:
  Eigen::VectorXd x_, y_;
};

// r_i = a * exp(-b t_i) - y_i
class ExpDecay : public LeastSquaresProblem {
 public:
  ExpDecay(Eigen::VectorXd t, Eigen::VectorXd y) : t_(std::move(t)), y_(std::move(y)) {}
  std::size_t num_params() const override { return 2; }
  std::size_t num_residuals() const override { return static_cast<std::size_t>(t_.size()); }
  Eigen::VectorXd residuals(const Eigen::VectorXd& th) const override {
    return (th(0) * (-th(1) * t_.array()).exp() - y_.array()).matrix();
  }
  void residuals_and_jacobian(const Eigen::VectorXd& th, Eigen::VectorXd& e, Eigen::MatrixXd& J) const override {
    e = residuals(th);
    J.resize(t_.size(), 2);
    J.col(0) = (-th(1) * t_.array()).exp().matrix();
    J.col(1) = (-th(0) * t_.array() * (-th(1) * t_.array()).exp()).matrix();
  }
  double sse(double a, double b) const {
    Eigen::VectorXd th(2);
    th << a, b;
    return residuals(th).squaredNorm();
  }

 private:
  Eigen::VectorXd t_, y_;
};

// 0.5 x^T A x - b^T x
class Quadratic : public Objective {
 public:
  Quadratic(Eigen::MatrixXd A, Eigen::VectorXd b) : A_(std::move(A)), b_(std::move(b)) {}
  std::size_t num_params() const override { return static_cast<std::size_t>(b_.size()); }
  double value(const Eigen::VectorXd& x) const override { return 0.5 * x.dot(A_ * x) - b_.dot(x); }
  double value_and_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override {
    g = A_ * x - b_;
    return value(x);
  }

 private:
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
};

SequenceDataset linear_sequence(std::size_t T, std::uint64_t seed) {
  Rng rng(seed);
  SequenceDataset d;
  d.inputs.resize(static_cast<Eigen::Index>(T), 1);
  d.targets.resize(static_cast<Eigen::Index>(T));
  for (Eigen::Index t = 0; t < d.inputs.rows(); ++t) {
    d.inputs(t, 0) = rng.uniform(-1, 1);
    d.targets(t) = 2.0 * d.inputs(t, 0) + 1.0;
  }
  return d;
}

SequenceDataset noise_sequence(std::size_t T, std::size_t n_in, std::uint64_t seed) {
  Rng rng(seed);
  SequenceDataset d;
  d.inputs.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(n_in));
  d.targets.resize(static_cast<Eigen::Index>(T));
  for (Eigen::Index t = 0; t < d.inputs.rows(); ++t) {
    for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) d.inputs(t, j) = rng.uniform(-1, 1);
    d.targets(t) = rng.normal();
  }
  return d;
}

std::vector<std::size_t> range(std::size_t from, std::size_t to) {
  std::vector<std::size_t> v(to - from);
  std::iota(v.begin(), v.end(), from);
  return v;
}

RnnModel identity_model(std::uint64_t seed) {
  auto m = RnnModel::initialized(1, 1, 1, seed);
  m.hidden = Activation::identity;
  return m;
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.max_epochs = 1001;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.max_epochs = 0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_EQ(parse_algorithm("LM"), Algorithm::lm);
  EXPECT_EQ(parse_algorithm("scg"), Algorithm::scg);
  EXPECT_THROW(parse_algorithm("adam"), Error);
}

TEST(Lm, GenericLinearFit) {
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, -1, 1);
  Eigen::VectorXd y = 2.0 * x.array() + 1.0;
  LinearFit p(x, y);
  auto res = minimize_lm(p, Eigen::VectorXd::Zero(2), TrainConfig{});
  EXPECT_NEAR(res.weights(0), 2.0, 1e-8);
  EXPECT_NEAR(res.weights(1), 1.0, 1e-8);
  EXPECT_LE(res.record.total_epochs, 20u);
  EXPECT_EQ(res.record.stop_reason, StopReason::converged);
}

TEST(Lm, IdentityRnnRecoversLine) {
  auto data = linear_sequence(60, 1);
  auto train = range(0, 60);
  auto out = train_lm(identity_model(2), data, train, {}, TrainConfig{});
  const auto& m = out.model;
  const double slope = m.V(0) * m.U(0, 0);
  const double intercept = m.V(0) * m.b_h(0) + m.b_y;
  EXPECT_NEAR(slope, 2.0, 1e-8);
  EXPECT_NEAR(intercept, 1.0, 1e-8);
  EXPECT_NEAR(m.W(0, 0) * m.V(0), 0.0, 1e-8);
  EXPECT_LE(out.record.total_epochs, 20u);
}

TEST(Lm, OptimalStartConvergesAtEpochOne) {
  auto data = linear_sequence(30, 3);
  auto m = identity_model(0);
  m.U(0, 0) = 1.0;
  m.W(0, 0) = 0.0;
  m.V(0) = 2.0;
  m.b_h(0) = 0.0;
  m.b_y = 1.0;
  auto train = range(0, 30);
  auto out = train_lm(m, data, train, {}, TrainConfig{});
  EXPECT_EQ(out.record.total_epochs, 1u);
  EXPECT_EQ(out.record.stop_reason, StopReason::converged);
  EXPECT_EQ(out.model, m);
}

TEST(Lm, ExponentialDecayMatchesGridSearch) {
  Rng rng(12);
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(40, 0, 4);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) y(i) = 3.0 * std::exp(-0.7 * t(i)) + 0.05 * rng.normal();
  ExpDecay p(t, y);
  Eigen::VectorXd start(2);
  start << 1.0, 0.1;
  auto res = minimize_lm(p, start, TrainConfig{});
  const double lm_sse = p.sse(res.weights(0), res.weights(1));

  // Dense grid, then repeated zooms around the best cell.
  double ca = 2.5, cb = 0.5, wa = 2.0, wb = 1.0, best = std::numeric_limits<double>::infinity();
  for (int level = 0; level < 12; ++level) {
    double ba = ca, bb = cb;
    for (int i = 0; i <= 100; ++i)
      for (int j = 0; j <= 100; ++j) {
        const double a = ca - wa + 2 * wa * i / 100.0, b = cb - wb + 2 * wb * j / 100.0;
        const double s = p.sse(a, b);
        if (s < best) {
          best = s;
          ba = a;
          bb = b;
        }
      }
    ca = ba;
    cb = bb;
    wa *= 0.1;
    wb *= 0.1;
  }
  EXPECT_NEAR(lm_sse, best, 1e-6);
  EXPECT_LE(lm_sse, best + 1e-12);
}

TEST(Lm, ReturnsBestValidationWeights) {
  auto data = noise_sequence(80, 2, 4);
  auto train = range(0, 50), val = range(50, 65);
  auto out = train_lm(RnnModel::initialized(2, 6, 1, 4), data, train, val, TrainConfig{});
  const auto& rec = out.record;
  ASSERT_EQ(rec.val_mse.size(), rec.total_epochs + 1);
  const double best = *std::min_element(rec.val_mse.begin(), rec.val_mse.end());
  EXPECT_DOUBLE_EQ(subset_mse(out.model, data, val), best);
  EXPECT_DOUBLE_EQ(rec.val_mse[rec.best_epoch], best);
  EXPECT_LE(rec.best_epoch, rec.total_epochs);
  for (const auto& s : rec.accepted_steps) EXPECT_LT(s.after, s.before);
}

TEST(Lm, DeterministicRecord) {
  auto data = noise_sequence(60, 2, 5);
  auto train = range(0, 40), val = range(40, 50);
  TrainConfig cfg;
  cfg.max_epochs = 30;
  auto a = train_lm(RnnModel::initialized(2, 4, 1, 9), data, train, val, cfg);
  auto b = train_lm(RnnModel::initialized(2, 4, 1, 9), data, train, val, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.record.train_mse, b.record.train_mse);
  EXPECT_EQ(a.record.total_epochs, b.record.total_epochs);
}

TEST(Lm, BptttRouteMatchesForwardRoute) {
  auto data = noise_sequence(50, 2, 6);
  auto train = range(0, 50);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  auto a = train_lm(RnnModel::initialized(2, 3, 1, 1), data, train, {}, cfg);
  cfg.jacobian = JacobianRoute::bptt;
  auto b = train_lm(RnnModel::initialized(2, 3, 1, 1), data, train, {}, cfg);
  EXPECT_LE((a.model.params() - b.model.params()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Scg, QuadraticReachesDirectSolve) {
  Rng rng(3);
  Eigen::MatrixXd M(10, 10);
  for (Eigen::Index i = 0; i < 10; ++i)
    for (Eigen::Index j = 0; j < 10; ++j) M(i, j) = rng.normal();
  Eigen::MatrixXd A = M.transpose() * M + Eigen::MatrixXd::Identity(10, 10);
  Eigen::VectorXd b(10);
  for (Eigen::Index i = 0; i < 10; ++i) b(i) = rng.normal();
  Quadratic q(A, b);
  TrainConfig cfg;
  cfg.max_epochs = 30;
  cfg.grad_tol = 1e-12;
  auto res = minimize_scg(q, Eigen::VectorXd::Zero(10), cfg);
  const Eigen::VectorXd x_star = A.ldlt().solve(b);
  EXPECT_LE((res.weights - x_star).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE(res.record.total_epochs, 30u);
  for (const auto& s : res.record.accepted_steps) EXPECT_LE(s.after, s.before);
}

TEST(Scg, StartAtOptimumConvergesImmediately) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3) * 2.0;
  Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
  Quadratic q(A, b);
  auto res = minimize_scg(q, Eigen::VectorXd::Constant(3, 0.5), TrainConfig{});
  EXPECT_EQ(res.record.total_epochs, 1u);
  EXPECT_EQ(res.record.stop_reason, StopReason::converged);
}

TEST(Scg, RnnStepsNeverIncreaseMse) {
  auto data = noise_sequence(60, 3, 7);
  auto train = range(0, 45), val = range(45, 52);
  TrainConfig cfg;
  cfg.algorithm = Algorithm::scg;
  cfg.max_epochs = 200;
  auto out = aerofc::train(RnnModel::initialized(3, 5, 1, 2), data, train, val, cfg);
  ASSERT_FALSE(out.record.accepted_steps.empty());
  for (const auto& s : out.record.accepted_steps) EXPECT_LE(s.after, s.before);
  EXPECT_LT(out.record.train_mse.back(), out.record.train_mse.front());
}

TEST(Br, EffectiveParametersLimits) {
  Rng rng(1);
  Eigen::MatrixXd J(8, 5);
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) J(i, j) = rng.normal();
  EXPECT_EQ(effective_parameters(J, 0.0, 1.0), 5.0);
  const double g = effective_parameters(J, 0.3, 2.0);
  EXPECT_GT(g, 0.0);
  EXPECT_LT(g, 5.0);
  // Direct formula on the full Hessian.
  Eigen::MatrixXd H = 2.0 * 2.0 * J.transpose() * J + 2.0 * 0.3 * Eigen::MatrixXd::Identity(5, 5);
  EXPECT_NEAR(g, 5.0 - 2.0 * 0.3 * H.inverse().trace(), 1e-10);
  Eigen::MatrixXd wide = J.transpose();  // 5 residuals, 8 parameters
  Eigen::MatrixXd Hw = 2.0 * wide.transpose() * wide + 2.0 * 0.3 * Eigen::MatrixXd::Identity(8, 8);
  EXPECT_NEAR(effective_parameters(wide, 0.3, 1.0), 8.0 - 2.0 * 0.3 * Hw.inverse().trace(), 1e-10);
}

TEST(Br, GammaBoundedAndObjectiveMonotone) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto data = noise_sequence(60, 2, 20 + seed);
    auto train = range(0, 45), val = range(45, 52);
    TrainConfig cfg;
    cfg.algorithm = Algorithm::br;
    cfg.max_epochs = 100;
    auto model = RnnModel::initialized(2, 6, 1, seed);
    auto out = aerofc::train(model, data, train, val, cfg);
    const double P = static_cast<double>(model.num_params());
    ASSERT_FALSE(out.record.gamma.empty());
    for (double g : out.record.gamma) {
      EXPECT_GE(g, 0.0);
      EXPECT_LE(g, P);
    }
    for (const auto& s : out.record.accepted_steps) EXPECT_LT(s.after, s.before);
    for (std::size_t i = 0; i < out.record.alpha.size(); ++i) {
      EXPECT_GT(out.record.alpha[i], 0.0);
      EXPECT_GT(out.record.beta[i], 0.0);
    }
  }
}

TEST(Br, PullsWeightsTowardZeroOnNoise) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto data = noise_sequence(50, 2, 100 + seed);
    auto train = range(0, 50);
    TrainConfig cfg;
    cfg.max_epochs = 100;
    auto model = RnnModel::initialized(2, 5, 1, seed);
    auto lm = train_lm(model, data, train, {}, cfg);
    auto br = train_br(model, data, train, {}, cfg);
    if (br.model.params().norm() <= lm.model.params().norm()) ++wins;
  }
  EXPECT_GT(wins, 10);
}

TEST(Br, OwnGradientThreshold) {
  auto data = noise_sequence(40, 1, 31);
  auto train = range(0, 40);
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.br_grad_tol = 1e30;
  auto model = RnnModel::initialized(1, 3, 1, 4);
  auto br = train_br(model, data, train, {}, cfg);
  EXPECT_EQ(br.record.stop_reason, StopReason::converged);
  EXPECT_EQ(br.record.total_epochs, 1u);
  auto lm = train_lm(model, data, train, {}, cfg);
  EXPECT_GT(lm.record.total_epochs, 1u);
  cfg.br_grad_tol = -1.0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Trainers, EpochCapHolds) {
  auto data = noise_sequence(30, 1, 8);
  auto train = range(0, 30);
  for (auto algo : {Algorithm::lm, Algorithm::br, Algorithm::scg}) {
    TrainConfig cfg;
    cfg.algorithm = algo;
    cfg.max_epochs = 15;
    auto out = aerofc::train(RnnModel::initialized(1, 3, 1, 1), data, train, {}, cfg);
    EXPECT_LE(out.record.total_epochs, 15u);
    EXPECT_EQ(out.record.train_mse.size(), out.record.total_epochs + 1);
  }
}
