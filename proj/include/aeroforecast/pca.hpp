#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aeroforecast/common.hpp"

namespace aerofc {

enum class ScaleMode { center_only, z_score };

/// Fitted principal-component mapping.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  ///< all ones in center-only mode
  /// k x n_features; rows are unit eigenvectors in descending eigenvalue order.
  Eigen::MatrixXd mapping;
  Eigen::VectorXd eigenvalues;  ///< all n_features of them, descending
  Eigen::VectorXd explained_ratio;
  std::size_t k = 0;

  std::size_t dimension() const { return static_cast<std::size_t>(mean.size()); }
};

/// Standardise, form the 1/(n-1) covariance, eigendecompose, keep the top-k
/// eigenvectors. Each eigenvector is signed so that its largest-magnitude
/// entry is positive. Throws on k out of range, zero-variance features in
/// z-score mode, and all-zero spectra.
PcaModel fit_pca(const Eigen::MatrixXd& data, std::size_t k, ScaleMode mode = ScaleMode::center_only);

/// ((data - mean) / scale) * mapping^T
Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& data);
/// Maps projected coordinates back into feature space.
Eigen::MatrixXd inverse_transform(const PcaModel& model, const Eigen::MatrixXd& projected);

struct VarianceRow {
  std::size_t component = 0;  ///< 1-based
  double individual = 0.0;
  double cumulative = 0.0;    ///< fraction in [0, 1]
};

std::vector<VarianceRow> variance_table(const PcaModel& model);

/// Percentage with two decimals and a trailing '%', e.g. 0.6606753 -> "66.07%".
std::string format_cumulative_pct(double cumulative_fraction);

/// `component,individual,cumulative_pct`, one row per original dimension.
void write_pca_report(const std::filesystem::path& path, const PcaModel& model);
/// `date,pc1,...,pck`, one row per sample.
void write_pca_scatter(const std::filesystem::path& path, std::span<const Date> dates,
                       const Eigen::MatrixXd& projected);

}  // namespace aerofc
