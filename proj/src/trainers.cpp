#include "aeroforecast/trainers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "aeroforecast/error.hpp"

namespace aerofc {

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::lm: return "lm";
    case Algorithm::br: return "br";
    case Algorithm::scg: return "scg";
  }
  return "?";
}

std::string_view display_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::lm: return "LM";
    case Algorithm::br: return "BR";
    case Algorithm::scg: return "SCG";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "lm" || s == "trainlm") return Algorithm::lm;
  if (s == "br" || s == "trainbr") return Algorithm::br;
  if (s == "scg" || s == "trainscg") return Algorithm::scg;
  fail(ErrorCode::invalid_argument, "unknown algorithm '" + std::string(name) + "' (expected LM, BR or SCG)");
}

std::string_view to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::val_patience: return "val_patience";
  }
  return "?";
}

void TrainConfig::validate() const {
  require(max_epochs >= 1, "max_epochs must be at least 1");
  require(max_epochs <= kEpochCap, "max_epochs must not exceed " + std::to_string(kEpochCap));
  require(grad_tol >= 0.0, "grad_tol must be non-negative");
  require(!br_grad_tol || *br_grad_tol >= 0.0, "br_grad_tol must be non-negative");
  require(mu0 > 0.0 && mu_inc > 1.0 && mu_dec > 0.0 && mu_dec < 1.0 && mu_max > mu0, "invalid damping schedule");
  require(scg_sigma > 0.0 && scg_lambda0 > 0.0, "SCG sigma and lambda must be positive");
  require(val_patience >= 1, "val_patience must be at least 1");
}

double LeastSquaresProblem::sse_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const {
  Eigen::VectorXd e;
  Eigen::MatrixXd J;
  residuals_and_jacobian(theta, e, J);
  gradient = 2.0 * (J.transpose() * e);
  return e.squaredNorm();
}

double MseObjective::value(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd e = problem_.residuals(theta);
  return e.size() == 0 ? 0.0 : e.squaredNorm() / static_cast<double>(e.size());
}

double MseObjective::value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const {
  const double n = static_cast<double>(std::max<std::size_t>(problem_.num_residuals(), 1));
  const double sse = problem_.sse_and_gradient(theta, gradient);
  gradient /= n;
  return sse / n;
}

namespace {

using Clock = std::chrono::steady_clock;

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Solves (beta J^T J + c I) x = v, through the smaller of the two Gram
// matrices.
class DampedGram {
 public:
  DampedGram(const Eigen::MatrixXd& J, double beta) : J_(J), beta_(beta), tall_(J.cols() <= J.rows()) {
    gram_ = tall_ ? Eigen::MatrixXd(J.transpose() * J) : Eigen::MatrixXd(J * J.transpose());
  }

  bool solve(double c, const Eigen::VectorXd& v, Eigen::VectorXd& x) const {
    Eigen::MatrixXd a = beta_ * gram_;
    a.diagonal().array() += c;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    if (tall_) {
      x = llt.solve(v);
    } else {
      // Woodbury: (cI + b J^T J)^-1 v = (v - b J^T (cI + b J J^T)^-1 J v) / c
      const Eigen::VectorXd jv = J_ * v;
      x = (v - beta_ * (J_.transpose() * llt.solve(jv))) / c;
    }
    return finite(x);
  }

  // tr((beta J^T J + c I)^-1)
  double trace_inverse(double c) const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
    double tr = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) tr += 1.0 / (beta_ * lambda(i) + c);
    const Eigen::Index p = J_.cols();
    if (!tall_) tr += static_cast<double>(p - gram_.rows()) / c;
    return tr;
  }

 private:
  const Eigen::MatrixXd& J_;
  double beta_;
  bool tall_;
  Eigen::MatrixXd gram_;
};

// Curves, best-validation weights and validation patience shared by all
// three optimizers.
class Tracker {
 public:
  Tracker(const TrainConfig& cfg, bool patience_enabled)
      : cfg_(cfg), patience_enabled_(patience_enabled), start_(Clock::now()) {}

  // Returns true when validation patience is exhausted.
  bool record(std::size_t epoch, const Eigen::VectorXd& theta, double train_mse, double val_mse) {
    rec_.train_mse.push_back(train_mse);
    rec_.val_mse.push_back(val_mse);
    rec_.total_epochs = epoch;
    if (std::isnan(val_mse)) {
      rec_.best_epoch = epoch;
      rec_.best_weights = theta;
      return false;
    }
    if (!have_best_ || val_mse < best_val_) {
      have_best_ = true;
      best_val_ = val_mse;
      rec_.best_epoch = epoch;
      rec_.best_weights = theta;
    }
    if (epoch > 0 && val_mse > last_val_) ++fails_;
    last_val_ = val_mse;
    return patience_enabled_ && fails_ >= cfg_.val_patience;
  }

  TrainRecord& rec() { return rec_; }

  TrainResult finish(StopReason reason) {
    rec_.stop_reason = reason;
    rec_.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    TrainResult out;
    out.weights = rec_.best_weights;
    out.record = std::move(rec_);
    return out;
  }

 private:
  const TrainConfig& cfg_;
  bool patience_enabled_;
  Clock::time_point start_;
  TrainRecord rec_;
  bool have_best_ = false;
  double best_val_ = std::numeric_limits<double>::infinity();
  double last_val_ = std::numeric_limits<double>::infinity();
  std::size_t fails_ = 0;
};

void check_start(const LeastSquaresProblem& problem, const Eigen::VectorXd& theta) {
  require(static_cast<std::size_t>(theta.size()) == problem.num_params(), "parameter vector has the wrong length");
  if (!finite(theta)) fail(ErrorCode::numeric, "initial parameters are not finite");
}

double mse_of(const Eigen::VectorXd& e) {
  return e.size() == 0 ? 0.0 : e.squaredNorm() / static_cast<double>(e.size());
}

}  // namespace

TrainResult minimize_lm(const LeastSquaresProblem& problem, Eigen::VectorXd theta, const TrainConfig& cfg) {
  cfg.validate();
  check_start(problem, theta);
  Tracker tr(cfg, true);

  Eigen::VectorXd e;
  Eigen::MatrixXd J;
  problem.residuals_and_jacobian(theta, e, J);
  if (!finite(e)) fail(ErrorCode::numeric, "non-finite residuals at the initial parameters");
  double sse = e.squaredNorm();
  double mu = cfg.mu0;
  if (tr.record(0, theta, mse_of(e), problem.validation_mse(theta))) return tr.finish(StopReason::val_patience);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const Eigen::VectorXd jte = J.transpose() * e;
    if ((2.0 * jte).norm() < cfg.grad_tol || mu > cfg.mu_max) {
      // Nothing left to do; the epoch is counted but the weights stay put.
      tr.record(epoch, theta, mse_of(e), problem.validation_mse(theta));
      return tr.finish(StopReason::converged);
    }
    DampedGram gram(J, 1.0);
    bool accepted = false;
    Eigen::VectorXd step, trial, e_trial;
    while (mu <= cfg.mu_max) {
      if (gram.solve(mu, -jte, step)) {
        trial = theta + step;
        e_trial = problem.residuals(trial);
        const double sse_trial = e_trial.squaredNorm();
        if (std::isfinite(sse_trial) && sse_trial < sse) {
          tr.rec().accepted_steps.push_back({epoch, sse, sse_trial});
          accepted = true;
          mu = std::max(mu * cfg.mu_dec, 1e-20);
          break;
        }
      }
      mu *= cfg.mu_inc;
    }
    if (!accepted) {
      tr.record(epoch, theta, mse_of(e), problem.validation_mse(theta));
      return tr.finish(StopReason::converged);
    }
    theta = trial;
    problem.residuals_and_jacobian(theta, e, J);
    sse = e.squaredNorm();
    if (tr.record(epoch, theta, mse_of(e), problem.validation_mse(theta))) return tr.finish(StopReason::val_patience);
  }
  return tr.finish(StopReason::max_epochs);
}

double effective_parameters(const Eigen::MatrixXd& J, double alpha, double beta) {
  const double p = static_cast<double>(J.cols());
  if (!(alpha > 0.0)) return p;
  DampedGram gram(J, beta);
  return p - alpha * gram.trace_inverse(alpha);
}

TrainResult minimize_br(const LeastSquaresProblem& problem, Eigen::VectorXd theta, const TrainConfig& cfg) {
  cfg.validate();
  check_start(problem, theta);
  Tracker tr(cfg, cfg.br_validation_stop);
  constexpr double kFloor = 1e-12;

  Eigen::VectorXd e;
  Eigen::MatrixXd J;
  problem.residuals_and_jacobian(theta, e, J);
  if (!finite(e)) fail(ErrorCode::numeric, "non-finite residuals at the initial parameters");
  const double n = static_cast<double>(e.size());
  const double p = static_cast<double>(theta.size());
  double alpha = 0.0, beta = 1.0, mu = cfg.mu0;
  double sse = e.squaredNorm(), ssw = theta.squaredNorm();
  if (tr.record(0, theta, mse_of(e), problem.validation_mse(theta))) return tr.finish(StopReason::val_patience);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const Eigen::VectorXd half_grad = beta * (J.transpose() * e) + alpha * theta;
    const double objective = beta * sse + alpha * ssw;
    if ((2.0 * half_grad).norm() < cfg.br_grad_tol.value_or(cfg.grad_tol) || mu > cfg.mu_max) {
      tr.record(epoch, theta, mse_of(e), problem.validation_mse(theta));
      return tr.finish(StopReason::converged);
    }
    DampedGram gram(J, beta);
    bool accepted = false;
    Eigen::VectorXd step, trial, e_trial;
    double sse_trial = 0.0, ssw_trial = 0.0;
    while (mu <= cfg.mu_max) {
      if (gram.solve(alpha + mu, -half_grad, step)) {
        trial = theta + step;
        e_trial = problem.residuals(trial);
        sse_trial = e_trial.squaredNorm();
        ssw_trial = trial.squaredNorm();
        const double f_trial = beta * sse_trial + alpha * ssw_trial;
        if (std::isfinite(f_trial) && f_trial < objective) {
          tr.rec().accepted_steps.push_back({epoch, objective, f_trial});
          accepted = true;
          mu = std::max(mu * cfg.mu_dec, 1e-20);
          break;
        }
      }
      mu *= cfg.mu_inc;
    }
    if (!accepted) {
      tr.record(epoch, theta, mse_of(e), problem.validation_mse(theta));
      return tr.finish(StopReason::converged);
    }

    // Evidence update with the Hessian approximation at the pre-step point.
    double gamma = p;
    if (alpha > 0.0) gamma = p - alpha * gram.trace_inverse(alpha);
    if (!(gamma >= 0.0 && gamma <= p)) {
      ++tr.rec().gamma_clamps;
      gamma = std::isnan(gamma) ? p : std::clamp(gamma, 0.0, p);
    }
    theta = trial;
    sse = sse_trial;
    ssw = ssw_trial;
    alpha = ssw > 0.0 ? std::max(gamma / (2.0 * ssw), kFloor) : alpha;
    if (sse > 0.0) beta = std::max((n - gamma) / (2.0 * sse), kFloor);
    tr.rec().gamma.push_back(gamma);
    tr.rec().alpha.push_back(alpha);
    tr.rec().beta.push_back(beta);

    problem.residuals_and_jacobian(theta, e, J);
    if (tr.record(epoch, theta, mse_of(e), problem.validation_mse(theta))) return tr.finish(StopReason::val_patience);
  }
  return tr.finish(StopReason::max_epochs);
}

TrainResult minimize_scg(const Objective& objective, Eigen::VectorXd theta, const TrainConfig& cfg) {
  cfg.validate();
  require(static_cast<std::size_t>(theta.size()) == objective.num_params(), "parameter vector has the wrong length");
  if (!finite(theta)) fail(ErrorCode::numeric, "initial parameters are not finite");
  Tracker tr(cfg, true);
  const std::size_t n_params = objective.num_params();

  Eigen::VectorXd g;
  double f = objective.value_and_gradient(theta, g);
  if (!std::isfinite(f)) fail(ErrorCode::numeric, "non-finite objective at the initial parameters");
  Eigen::VectorXd r = -g;
  Eigen::VectorXd p = r;
  double lambda = cfg.scg_lambda0, lambda_bar = 0.0, delta = 0.0;
  bool success = true;
  std::size_t k = 1;
  if (tr.record(0, theta, f, objective.validation_mse(theta))) return tr.finish(StopReason::val_patience);

  Eigen::VectorXd g_sigma, g_new;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (g.norm() < cfg.grad_tol) {
      tr.record(epoch, theta, f, objective.validation_mse(theta));
      return tr.finish(StopReason::converged);
    }
    const double pp = p.squaredNorm();
    if (success) {
      const double sigma = cfg.scg_sigma / std::sqrt(pp);
      objective.value_and_gradient(theta + sigma * p, g_sigma);
      delta = p.dot(g_sigma - g) / sigma;
    }
    delta += (lambda - lambda_bar) * pp;
    if (delta <= 0.0) {
      lambda_bar = 2.0 * (lambda - delta / pp);
      delta = -delta + lambda * pp;
      lambda = lambda_bar;
    }
    const double mu = p.dot(r);
    const double alpha = mu / delta;
    const Eigen::VectorXd trial = theta + alpha * p;
    const double f_trial = objective.value(trial);
    const double cmp = 2.0 * delta * (f - f_trial) / (mu * mu);

    if (cmp >= 0.0) {
      tr.rec().accepted_steps.push_back({epoch, f, f_trial});
      theta = trial;
      f = objective.value_and_gradient(theta, g_new);
      const Eigen::VectorXd r_new = -g_new;
      lambda_bar = 0.0;
      success = true;
      if (k % n_params == 0) {
        p = r_new;
      } else {
        const double b = (r_new.squaredNorm() - r_new.dot(r)) / mu;
        p = r_new + b * p;
      }
      r = r_new;
      g = g_new;
      if (cmp >= 0.75) lambda *= 0.25;
    } else {
      lambda_bar = lambda;
      success = false;
    }
    if (!(cmp >= 0.25)) lambda += delta * (1.0 - (std::isfinite(cmp) ? cmp : 0.0)) / pp;
    if (!std::isfinite(lambda) || lambda > 1e300) {
      tr.record(epoch, theta, f, objective.validation_mse(theta));
      return tr.finish(StopReason::converged);
    }
    ++k;
    if (tr.record(epoch, theta, f, objective.validation_mse(theta))) return tr.finish(StopReason::val_patience);
  }
  return tr.finish(StopReason::max_epochs);
}

RnnProblem::RnnProblem(RnnModel prototype, const SequenceDataset& data, std::span<const std::size_t> train,
                       std::span<const std::size_t> val, JacobianRoute route)
    : prototype_(std::move(prototype)), data_(data), train_(train.begin(), train.end()),
      val_(val.begin(), val.end()), route_(route) {
  prototype_.validate();
  require(prototype_.n_input == data.n_input(), "model input width does not match the dataset");
  require(!train_.empty(), "training subset is empty");
  for (auto i : train_) require(i < data.size(), "training index out of range");
  for (auto i : val_) require(i < data.size(), "validation index out of range");
}

RnnModel RnnProblem::with(const Eigen::VectorXd& theta) const {
  RnnModel m = prototype_;
  m.set_params(theta);
  return m;
}

Eigen::VectorXd RnnProblem::residuals(const Eigen::VectorXd& theta) const {
  const RnnModel m = with(theta);
  Eigen::VectorXd y;
  try {
    y = forward(m, data_);
  } catch (const Error&) {
    // Diverged trial point: report it as unusable rather than aborting the run.
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(train_.size()),
                                     std::numeric_limits<double>::infinity());
  }
  Eigen::VectorXd e(static_cast<Eigen::Index>(train_.size()));
  for (std::size_t r = 0; r < train_.size(); ++r)
    e(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(train_[r])) - data_.targets(static_cast<Eigen::Index>(train_[r]));
  return e;
}

void RnnProblem::residuals_and_jacobian(const Eigen::VectorXd& theta, Eigen::VectorXd& e, Eigen::MatrixXd& J) const {
  const RnnModel m = with(theta);
  if (route_ == JacobianRoute::forward) {
    JacobianResult jr = jacobian_forward(m, data_, train_);
    e = std::move(jr.errors);
    J = std::move(jr.jacobian);
  } else {
    e = residuals(theta);
    J = jacobian_bptt(m, data_, train_);
  }
}

double RnnProblem::sse_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const {
  const RnnModel m = with(theta);
  try {
    GradientResult gr = gradient_bptt(m, data_, train_);
    gradient = std::move(gr.gradient);
    return gr.sse;
  } catch (const Error&) {
    gradient = Eigen::VectorXd::Zero(theta.size());
    return std::numeric_limits<double>::infinity();
  }
}

double RnnProblem::validation_mse(const Eigen::VectorXd& theta) const {
  if (val_.empty()) return kMissing;
  try {
    return subset_mse(with(theta), data_, val_);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

namespace {

TrainOutcome finish_outcome(const RnnModel& model, TrainResult res) {
  TrainOutcome out{model, std::move(res.record)};
  out.model.set_params(res.weights);
  return out;
}

}  // namespace

TrainOutcome train_lm(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                      std::span<const std::size_t> val, const TrainConfig& cfg) {
  RnnProblem problem(model, data, train, val, cfg.jacobian);
  return finish_outcome(model, minimize_lm(problem, model.params(), cfg));
}

TrainOutcome train_br(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                      std::span<const std::size_t> val, const TrainConfig& cfg) {
  RnnProblem problem(model, data, train, val, cfg.jacobian);
  return finish_outcome(model, minimize_br(problem, model.params(), cfg));
}

TrainOutcome train_scg(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                       std::span<const std::size_t> val, const TrainConfig& cfg) {
  RnnProblem problem(model, data, train, val, cfg.jacobian);
  MseObjective objective(problem);
  return finish_outcome(model, minimize_scg(objective, model.params(), cfg));
}

TrainOutcome train(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> train,
                   std::span<const std::size_t> val, const TrainConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::lm: return train_lm(model, data, train, val, cfg);
    case Algorithm::br: return train_br(model, data, train, val, cfg);
    case Algorithm::scg: return train_scg(model, data, train, val, cfg);
  }
  fail(ErrorCode::internal, "unhandled algorithm");
}

}  // namespace aerofc
