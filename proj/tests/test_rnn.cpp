#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "aeroforecast/error.hpp"
#include "aeroforecast/rnn.hpp"
#include "oracles.hpp"

using namespace aerofc;

namespace {

SequenceDataset random_sequence(std::uint64_t seed, std::size_t T, std::size_t n_in) {
  Rng rng(seed);
  SequenceDataset d;
  d.inputs.resize(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(n_in));
  d.targets.resize(static_cast<Eigen::Index>(T));
  for (Eigen::Index t = 0; t < d.inputs.rows(); ++t) {
    for (Eigen::Index j = 0; j < d.inputs.cols(); ++j) d.inputs(t, j) = rng.uniform(-1, 1);
    d.targets(t) = rng.uniform(-1, 1);
  }
  return d;
}

std::vector<std::size_t> every_other(std::size_t T) {
  std::vector<std::size_t> s;
  for (std::size_t i = 1; i < T; i += 2) s.push_back(i);
  return s;
}

}  // namespace

TEST(BuildSupervised, PairsAndSizes) {
  Eigen::MatrixXd f(10, 2);
  for (int i = 0; i < 10; ++i) f.row(i) << i, -i;
  std::vector<double> close(10);
  std::iota(close.begin(), close.end(), 100.0);
  std::vector<Date> dates;
  for (int i = 0; i < 10; ++i) dates.push_back(make_date(2020, 1, 1) + std::chrono::days(i));
  auto d = build_supervised(f, close, 3, dates);
  ASSERT_EQ(d.size(), 7u);
  EXPECT_EQ(d.inputs(2, 0), 2.0);
  EXPECT_EQ(d.targets(2), 105.0);
  EXPECT_EQ(d.target_dates[2], dates[5]);
  EXPECT_THROW(build_supervised(f, close, 10), Error);
  EXPECT_THROW(build_supervised(f, close, 0), Error);
}

TEST(Forward, MatchesPlainRecurrence) {
  auto model = RnnModel::initialized(3, 5, 1, 17);
  auto data = random_sequence(4, 40, 3);
  auto y = forward(model, data);
  auto ref = oracle::rnn_forward(model.U, model.W, model.V, model.b_h, model.b_y, data.inputs);
  EXPECT_LE((y - ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Forward, ReportsNonFiniteStep) {
  auto model = RnnModel::initialized(2, 3, 1, 1);
  auto data = random_sequence(1, 10, 2);
  data.inputs(6, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    forward(model, data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::numeric);
    EXPECT_NE(std::string(e.what()).find("6"), std::string::npos);
  }
}

TEST(Model, ParameterLayoutAndInit) {
  auto m = RnnModel::initialized(4, 3, 5, 99);
  EXPECT_EQ(m.num_params(), 3u * (4 + 3 + 2) + 1);
  auto theta = m.params();
  EXPECT_EQ(theta(0), m.U(0, 0));
  EXPECT_EQ(theta(1), m.U(0, 1));
  EXPECT_EQ(theta(12), m.W(0, 0));
  EXPECT_EQ(theta(theta.size() - 1), m.b_y);
  auto z = RnnModel::zeros(4, 3, 5);
  z.set_params(theta);
  EXPECT_EQ(z, m);
  EXPECT_EQ(RnnModel::initialized(4, 3, 5, 99), m);
  EXPECT_NE(RnnModel::initialized(4, 3, 5, 98), m);
  EXPECT_LE(m.U.cwiseAbs().maxCoeff(), 0.5 / std::sqrt(7.0));
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n_in = 1 + seed % 4, n_h = 2 + 3 * seed, T = 30 + 20 * seed;
    auto model = RnnModel::initialized(n_in, n_h, 1, seed);
    auto data = random_sequence(seed + 50, T, n_in);
    auto subset = every_other(T);
    auto g = gradient_bptt(model, data, subset);
    auto sse = [&](const Eigen::VectorXd& th) {
      RnnModel m = model;
      m.set_params(th);
      auto y = forward(m, data);
      double s = 0.0;
      for (auto i : subset) s += (y(static_cast<Eigen::Index>(i)) - data.targets(static_cast<Eigen::Index>(i))) *
                                 (y(static_cast<Eigen::Index>(i)) - data.targets(static_cast<Eigen::Index>(i)));
      return s;
    };
    auto fd = oracle::fd_gradient(sse, model.params());
    EXPECT_NEAR(g.sse, sse(model.params()), 1e-10);
    for (Eigen::Index i = 0; i < fd.size(); ++i)
      EXPECT_LE(oracle::rel_err(g.gradient(i), fd(i), 1e-3), 1e-5) << "seed " << seed << " coord " << i;
  }
}

TEST(Jacobian, BothRoutesAgreeWithFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const std::size_t n_in = 2 + seed, n_h = 3 + 2 * seed, T = 25 + 10 * seed;
    auto model = RnnModel::initialized(n_in, n_h, 1, seed + 10);
    auto data = random_sequence(seed + 70, T, n_in);
    auto subset = every_other(T);
    auto jb = jacobian_bptt(model, data, subset);
    auto jf = jacobian_forward(model, data, subset);
    auto resid = [&](const Eigen::VectorXd& th) {
      RnnModel m = model;
      m.set_params(th);
      auto y = forward(m, data);
      Eigen::VectorXd e(static_cast<Eigen::Index>(subset.size()));
      for (std::size_t r = 0; r < subset.size(); ++r)
        e(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(subset[r])) - data.targets(static_cast<Eigen::Index>(subset[r]));
      return e;
    };
    auto fd = oracle::fd_jacobian(resid, model.params());
    EXPECT_LE((jf.errors - resid(model.params())).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((jb - jf.jacobian).cwiseAbs().maxCoeff(), 1e-10);
    for (Eigen::Index r = 0; r < fd.rows(); ++r)
      for (Eigen::Index c = 0; c < fd.cols(); ++c)
        EXPECT_LE(oracle::rel_err(jb(r, c), fd(r, c), 1e-3), 1e-5) << "seed " << seed << " at " << r << "," << c;
  }
}

TEST(Jacobian, UnsortedSubsetKeepsRowOrder) {
  auto model = RnnModel::initialized(2, 4, 1, 3);
  auto data = random_sequence(3, 20, 2);
  std::vector<std::size_t> fwd = {3, 9, 15}, rev = {15, 3, 9};
  auto a = jacobian_forward(model, data, fwd);
  auto b = jacobian_forward(model, data, rev);
  EXPECT_EQ(a.jacobian.row(0), b.jacobian.row(1));
  EXPECT_EQ(a.jacobian.row(2), b.jacobian.row(0));
  EXPECT_EQ(jacobian_bptt(model, data, rev).row(0), jacobian_bptt(model, data, fwd).row(2));
}

TEST(Loss, MseDefinition) {
  std::vector<double> p = {1, 2, 3}, t = {1, 1, 1};
  EXPECT_DOUBLE_EQ(loss_mse(p, t), 5.0 / 3.0);
  EXPECT_THROW(loss_mse(std::vector<double>{1}, t), Error);
}

TEST(Scaling, FitOnRowsAndInvert) {
  auto data = random_sequence(5, 30, 3);
  data.inputs.col(2).setConstant(4.0);
  std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto s = MinMaxScaling::fit(data, rows);
  auto scaled = s.apply(data);
  for (auto r : rows) {
    EXPECT_GE(scaled.inputs(static_cast<Eigen::Index>(r), 0), -1.0 - 1e-12);
    EXPECT_LE(scaled.inputs(static_cast<Eigen::Index>(r), 0), 1.0 + 1e-12);
  }
  EXPECT_EQ(scaled.inputs(3, 2), 0.0);
  for (Eigen::Index i = 0; i < 30; ++i) EXPECT_NEAR(s.unscale_target(scaled.targets(i)), data.targets(i), 1e-12);
}

TEST(ModelFile, SaveLoadIsBitExact) {
  ModelFile f{RnnModel::initialized(3, 4, 10, 8), std::nullopt};
  f.model.b_y = 0.1 + 0.2;
  std::ostringstream out;
  save_model(out, f);
  std::istringstream in(out.str());
  EXPECT_EQ(load_model(in), f);

  auto data = random_sequence(2, 20, 3);
  std::vector<std::size_t> rows(20);
  std::iota(rows.begin(), rows.end(), 0);
  f.scaling = MinMaxScaling::fit(data, rows);
  std::ostringstream out2;
  save_model(out2, f);
  std::istringstream in2(out2.str());
  auto back = load_model(in2);
  EXPECT_EQ(back, f);
  std::ostringstream again;
  save_model(again, back);
  EXPECT_EQ(again.str(), out2.str());

  std::istringstream bad("aeroforecast-rnn 1\nn_input x\n");
  EXPECT_THROW(load_model(bad), Error);
}
