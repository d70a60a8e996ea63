#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "aeroforecast/common.hpp"
#include "aeroforecast/rnn.hpp"

namespace aerofc {

enum class Algorithm { lm, br, scg };
enum class StopReason { converged, max_epochs, val_patience };
enum class JacobianRoute { forward, bptt };

std::string_view to_string(Algorithm a) noexcept;
std::string_view display_name(Algorithm a) noexcept;  ///< "LM", "BR", "SCG"
Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(StopReason r) noexcept;

inline constexpr std::size_t kEpochCap = 1000;

struct TrainConfig {
  Algorithm algorithm = Algorithm::lm;
  std::size_t max_epochs = kEpochCap;
  double grad_tol = 1e-7;
  /// Overrides grad_tol for Bayesian regularization when set.
  std::optional<double> br_grad_tol;
  double mu0 = 1e-3;
  double mu_inc = 10.0;
  double mu_dec = 0.1;
  double mu_max = 1e10;
  double scg_sigma = 5e-5;
  double scg_lambda0 = 5e-7;
  std::size_t val_patience = 6;
  /// Bayesian regularization stops on validation patience only when set.
  bool br_validation_stop = false;
  JacobianRoute jacobian = JacobianRoute::forward;
  std::uint64_t seed = 0;
  /// Carried for provenance; none of the three optimizers uses a fixed step.
  double learning_rate = 0.02;

  void validate() const;
};

struct StepLog {
  std::size_t epoch = 0;
  double before = 0.0;  ///< objective before the accepted step
  double after = 0.0;   ///< objective after it, same hyperparameters
};

struct TrainRecord {
  /// Index = epoch; entry 0 is the starting point.
  std::vector<double> train_mse;
  std::vector<double> val_mse;  ///< NaN when there is no validation set
  std::size_t total_epochs = 0;
  std::size_t best_epoch = 0;
  Eigen::VectorXd best_weights;
  double wall_seconds = 0.0;
  StopReason stop_reason = StopReason::max_epochs;
  std::vector<StepLog> accepted_steps;
  // Bayesian regularization evidence trace, one entry per accepted step.
  std::vector<double> gamma, alpha, beta;
  std::size_t gamma_clamps = 0;
};

struct TrainResult {
  Eigen::VectorXd weights;  ///< best-validation weights (final weights without validation)
  TrainRecord record;
};

/// e(theta) with Jacobian de/dtheta, the interface LM and BR consume.
class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;
  virtual std::size_t num_params() const = 0;
  virtual std::size_t num_residuals() const = 0;
  virtual Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const = 0;
  virtual void residuals_and_jacobian(const Eigen::VectorXd& theta, Eigen::VectorXd& e, Eigen::MatrixXd& J) const = 0;
  /// Sum of squared residuals and its gradient; defaults to 2 J^T e.
  virtual double sse_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const;
  /// NaN when the problem has no validation set.
  virtual double validation_mse(const Eigen::VectorXd& /*theta*/) const { return kMissing; }
};

/// Smooth scalar objective, the interface SCG consumes.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual std::size_t num_params() const = 0;
  virtual double value(const Eigen::VectorXd& theta) const = 0;
  virtual double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const = 0;
  virtual double validation_mse(const Eigen::VectorXd& /*theta*/) const { return kMissing; }
};

/// Mean of squared residuals of a least-squares problem.
class MseObjective : public Objective {
 public:
  explicit MseObjective(const LeastSquaresProblem& problem) : problem_(problem) {}
  std::size_t num_params() const override { return problem_.num_params(); }
  double value(const Eigen::VectorXd& theta) const override;
  double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const override;
  double validation_mse(const Eigen::VectorXd& theta) const override { return problem_.validation_mse(theta); }

 private:
  const LeastSquaresProblem& problem_;
};

/// Levenberg-Marquardt on the sum of squared residuals: per epoch solve
/// (J^T J + mu I) d = -J^T e, accept when SSE drops (mu *= mu_dec), otherwise
/// mu *= mu_inc and retry within the same epoch.
TrainResult minimize_lm(const LeastSquaresProblem& problem, Eigen::VectorXd theta, const TrainConfig& cfg);

/// LM steps on F = beta * SSE + alpha * |theta|^2 with evidence re-estimation
/// of alpha and beta after each accepted step.
TrainResult minimize_br(const LeastSquaresProblem& problem, Eigen::VectorXd theta, const TrainConfig& cfg);

/// Moller's scaled conjugate gradient.
TrainResult minimize_scg(const Objective& objective, Eigen::VectorXd theta, const TrainConfig& cfg);

/// Effective number of parameters, P - 2 alpha tr(H^-1) with H = 2 beta J^T J + 2 alpha I.
double effective_parameters(const Eigen::MatrixXd& J, double alpha, double beta);

/// Squared-error problem for an RNN over a subset of the sequence.
class RnnProblem : public LeastSquaresProblem {
 public:
  RnnProblem(RnnModel prototype, const SequenceDataset& data, std::span<const std::size_t> train,
             std::span<const std::size_t> val, JacobianRoute route = JacobianRoute::forward);

  std::size_t num_params() const override { return prototype_.num_params(); }
  std::size_t num_residuals() const override { return train_.size(); }
  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const override;
  void residuals_and_jacobian(const Eigen::VectorXd& theta, Eigen::VectorXd& e, Eigen::MatrixXd& J) const override;
  double sse_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const override;
  double validation_mse(const Eigen::VectorXd& theta) const override;

 private:
  RnnModel with(const Eigen::VectorXd& theta) const;

  RnnModel prototype_;
  const SequenceDataset& data_;
  std::vector<std::size_t> train_, val_;
  JacobianRoute route_;
};

struct TrainOutcome {
  RnnModel model;  ///< carries the best-validation weights
  TrainRecord record;
};

TrainOutcome train_lm(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                      std::span<const std::size_t> val, const TrainConfig& cfg);
TrainOutcome train_br(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                      std::span<const std::size_t> val, const TrainConfig& cfg);
TrainOutcome train_scg(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                       std::span<const std::size_t> val, const TrainConfig& cfg);
/// Dispatches on cfg.algorithm.
TrainOutcome train(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                   std::span<const std::size_t> val, const TrainConfig& cfg);

}  // namespace aerofc
