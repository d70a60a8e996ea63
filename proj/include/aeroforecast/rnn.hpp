#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "aeroforecast/common.hpp"

namespace aerofc {

enum class Activation { tanh, identity };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

/// Single-hidden-layer recurrent network whose output at step t is read as
/// the close `delay` trading days later:
///
///   h_t = f_h(U x_t + W h_{t-1} + b_h),   h_{-1} = 0
///   y_t = f_y(V . h_t + b_y)
///
/// Weights are shared across time steps. The flat parameter vector is laid
/// out as U (row-major), W (row-major), V, b_h, b_y.
struct RnnModel {
  std::size_t n_input = 0;
  std::size_t n_hidden = 0;
  std::size_t delay = 1;
  Eigen::MatrixXd U;    ///< n_hidden x n_input
  Eigen::MatrixXd W;    ///< n_hidden x n_hidden
  Eigen::VectorXd V;    ///< n_hidden
  Eigen::VectorXd b_h;  ///< n_hidden
  double b_y = 0.0;
  Activation hidden = Activation::tanh;
  Activation output = Activation::identity;

  static RnnModel zeros(std::size_t n_input, std::size_t n_hidden, std::size_t delay);
  /// Uniform weights in [-0.5, 0.5] / sqrt(fan_in), deterministic per seed.
  static RnnModel initialized(std::size_t n_input, std::size_t n_hidden, std::size_t delay, std::uint64_t seed);

  std::size_t num_params() const { return n_hidden * (n_input + n_hidden + 2) + 1; }
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& theta);
  void validate() const;

  bool operator==(const RnnModel&) const = default;
};

/// Input/target pairs with row t labelled by the close at t + delay.
struct SequenceDataset {
  Eigen::MatrixXd inputs;  ///< size() x n_input, time-ordered
  Eigen::VectorXd targets;
  std::vector<Date> target_dates;  ///< may be empty
  std::size_t delay = 1;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
  std::size_t n_input() const { return static_cast<std::size_t>(inputs.cols()); }
};

/// Exactly T - tau pairs: (features[t], close[t + tau]) for t in [0, T - tau).
/// `dates`, when given, must have T entries; target_dates[t] = dates[t + tau].
SequenceDataset build_supervised(const Eigen::MatrixXd& features, std::span<const double> close, std::size_t tau,
                                 std::span<const Date> dates = {});

/// Predictions for every row of the dataset. Throws Error(numeric) naming the
/// first time index with a non-finite value.
Eigen::VectorXd forward(const RnnModel& model, const SequenceDataset& data);

double loss_mse(std::span<const double> predictions, std::span<const double> targets);
double loss_mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

/// Subset MSE of the model's predictions.
double subset_mse(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> subset);

struct GradientResult {
  double sse = 0.0;           ///< sum over the subset of e_i^2, e_i = y_i - target_i
  Eigen::VectorXd gradient;   ///< d sse / d theta
};

/// Exact gradient by one full (untruncated) backward sweep through time.
GradientResult gradient_bptt(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> subset);

/// Row r is d e_{subset[r]} / d theta, computed by a separate backward sweep
/// from each subset step to t = 0.
Eigen::MatrixXd jacobian_bptt(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> subset);

struct JacobianResult {
  Eigen::VectorXd errors;    ///< e_{subset[r]}
  Eigen::MatrixXd jacobian;  ///< rows follow subset order
};

/// Same Jacobian via forward propagation of hidden-state sensitivities; one
/// pass costs O(T * n_hidden^2 * params) regardless of the subset size.
JacobianResult jacobian_forward(const RnnModel& model, const SequenceDataset& data,
                                std::span<const std::size_t> subset);

/// Affine map of inputs (per column) and targets onto [-1, 1], fitted on a
/// row subset. Constant columns map to 0.
struct MinMaxScaling {
  Eigen::VectorXd input_min, input_max;
  double target_min = 0.0, target_max = 1.0;

  static MinMaxScaling fit(const SequenceDataset& data, std::span<const std::size_t> rows);
  SequenceDataset apply(const SequenceDataset& data) const;
  double unscale_target(double v) const;
  bool operator==(const MinMaxScaling&) const = default;
};

struct ModelFile {
  RnnModel model;
  std::optional<MinMaxScaling> scaling;
  bool operator==(const ModelFile&) const = default;
};

/// Line-oriented text format; doubles are written in shortest round-trip form
/// so save followed by load is bit-exact.
void save_model(std::ostream& out, const ModelFile& file);
ModelFile load_model(std::istream& in);

}  // namespace aerofc
