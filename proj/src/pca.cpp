#include "aeroforecast/pca.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <fstream>
#include <numeric>

#include "aeroforecast/error.hpp"

namespace aerofc {

PcaModel fit_pca(const Eigen::MatrixXd& data, std::size_t k, ScaleMode mode) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  require(n > 1, "PCA needs more than one sample");
  require(d >= 1, "PCA needs at least one feature");
  require(k >= 1 && k <= static_cast<std::size_t>(d),
          "component count " + std::to_string(k) + " out of range [1, " + std::to_string(d) + "]");
  if (data.hasNaN() || !data.allFinite()) fail(ErrorCode::data, "PCA input contains missing or non-finite values");

  PcaModel m;
  m.k = k;
  m.mean = data.colwise().mean().transpose();
  Eigen::MatrixXd centered = data.rowwise() - m.mean.transpose();
  m.scale = Eigen::VectorXd::Ones(d);
  if (mode == ScaleMode::z_score) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n - 1));
      if (sd == 0.0) fail(ErrorCode::data, "feature " + std::to_string(j) + " has zero variance; cannot z-score");
      m.scale(j) = sd;
      centered.col(j) /= sd;
    }
  }

  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) fail(ErrorCode::numeric, "covariance eigendecomposition failed");

  // Eigen returns ascending order.
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double top = std::max(values(0), 0.0);
  for (Eigen::Index i = 0; i < d; ++i) {
    if (values(i) < 0.0) {
      if (values(i) < -1e-10 * std::max(top, 1.0))
        fail(ErrorCode::numeric, "covariance has a significantly negative eigenvalue");
      values(i) = 0.0;
    }
  }
  const double total = values.sum();
  if (!(total > 0.0)) fail(ErrorCode::data, "degenerate data: all eigenvalues are zero");

  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }

  m.eigenvalues = values;
  m.explained_ratio = values / total;
  m.mapping = vectors.leftCols(static_cast<Eigen::Index>(k)).transpose();
  return m;
}

Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& data) {
  if (static_cast<std::size_t>(data.cols()) != model.dimension())
    fail(ErrorCode::invalid_argument, "PCA transform: expected " + std::to_string(model.dimension()) +
                                          " columns, got " + std::to_string(data.cols()));
  Eigen::MatrixXd z = data.rowwise() - model.mean.transpose();
  z = z.array().rowwise() / model.scale.transpose().array();
  return z * model.mapping.transpose();
}

Eigen::MatrixXd inverse_transform(const PcaModel& model, const Eigen::MatrixXd& projected) {
  require(static_cast<std::size_t>(projected.cols()) == model.k, "inverse_transform: column count must equal k");
  Eigen::MatrixXd z = projected * model.mapping;
  z = z.array().rowwise() * model.scale.transpose().array();
  return z.rowwise() + model.mean.transpose();
}

std::vector<VarianceRow> variance_table(const PcaModel& model) {
  std::vector<VarianceRow> rows;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < model.explained_ratio.size(); ++i) {
    cum += model.explained_ratio(i);
    rows.push_back({static_cast<std::size_t>(i) + 1, model.explained_ratio(i), std::min(cum, 1.0)});
  }
  return rows;
}

std::string format_cumulative_pct(double cumulative_fraction) {
  return format_fixed(100.0 * cumulative_fraction, 2) + "%";
}

void write_pca_report(const std::filesystem::path& path, const PcaModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << "component,individual,cumulative_pct\n";
  for (const auto& r : variance_table(model))
    out << r.component << ',' << format_number(r.individual) << ',' << format_cumulative_pct(r.cumulative) << '\n';
}

void write_pca_scatter(const std::filesystem::path& path, std::span<const Date> dates,
                       const Eigen::MatrixXd& projected) {
  require(dates.size() == static_cast<std::size_t>(projected.rows()), "scatter: dates/rows mismatch");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << "date";
  for (Eigen::Index c = 0; c < projected.cols(); ++c) out << ",pc" << (c + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < projected.rows(); ++r) {
    out << format_date(dates[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < projected.cols(); ++c) out << ',' << format_number(projected(r, c));
    out << '\n';
  }
}

}  // namespace aerofc
