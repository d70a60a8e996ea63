#include "aeroforecast/rnn.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include "aeroforecast/error.hpp"

namespace aerofc {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Derivative of the activation expressed through its output value.
double derivative_from_output(Activation a, double y) { return a == Activation::tanh ? 1.0 - y * y : 1.0; }

double activate(Activation a, double v) { return a == Activation::tanh ? std::tanh(v) : v; }

struct Trace {
  Eigen::MatrixXd h;   ///< n_hidden x steps, column t = h_t
  Eigen::VectorXd y;   ///< outputs
};

Trace run(const RnnModel& m, const SequenceDataset& data, std::size_t steps) {
  if (data.n_input() != m.n_input)
    fail(ErrorCode::invalid_argument, "dataset has " + std::to_string(data.n_input()) + " inputs, model expects " +
                                          std::to_string(m.n_input));
  const auto nh = static_cast<Eigen::Index>(m.n_hidden);
  Trace tr{Eigen::MatrixXd(nh, static_cast<Eigen::Index>(steps)), Eigen::VectorXd(static_cast<Eigen::Index>(steps))};
  Eigen::VectorXd a(nh);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    a.noalias() = m.U * data.inputs.row(ti).transpose() + m.b_h;
    if (t > 0) a.noalias() += m.W * tr.h.col(ti - 1);
    for (Eigen::Index i = 0; i < nh; ++i) tr.h(i, ti) = activate(m.hidden, a(i));
    const double y = activate(m.output, m.V.dot(tr.h.col(ti)) + m.b_y);
    if (!std::isfinite(y) || !tr.h.col(ti).allFinite())
      fail(ErrorCode::numeric, "non-finite network state at time index " + std::to_string(t));
    tr.y(ti) = y;
  }
  return tr;
}

std::size_t subset_end(std::span<const std::size_t> subset, std::size_t n) {
  std::size_t end = 0;
  for (auto i : subset) {
    if (i >= n) fail(ErrorCode::invalid_argument, "subset index " + std::to_string(i) + " out of range");
    end = std::max(end, i + 1);
  }
  return end;
}

struct Layout {
  Eigen::Index n_in, nh, u, w, v, bh, by, total;
  explicit Layout(const RnnModel& m)
      : n_in(static_cast<Eigen::Index>(m.n_input)),
        nh(static_cast<Eigen::Index>(m.n_hidden)),
        u(0),
        w(nh * n_in),
        v(w + nh * nh),
        bh(v + nh),
        by(bh + nh),
        total(by + 1) {}
};

}  // namespace

std::string_view to_string(Activation a) noexcept { return a == Activation::tanh ? "tanh" : "identity"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  fail(ErrorCode::parse, "unknown activation '" + std::string(name) + "'");
}

RnnModel RnnModel::zeros(std::size_t n_input, std::size_t n_hidden, std::size_t delay) {
  require(n_input >= 1 && n_hidden >= 1, "model needs at least one input and one hidden unit");
  require(delay >= 1, "delay must be >= 1");
  RnnModel m;
  m.n_input = n_input;
  m.n_hidden = n_hidden;
  m.delay = delay;
  const auto nh = static_cast<Eigen::Index>(n_hidden);
  m.U = Eigen::MatrixXd::Zero(nh, static_cast<Eigen::Index>(n_input));
  m.W = Eigen::MatrixXd::Zero(nh, nh);
  m.V = Eigen::VectorXd::Zero(nh);
  m.b_h = Eigen::VectorXd::Zero(nh);
  return m;
}

RnnModel RnnModel::initialized(std::size_t n_input, std::size_t n_hidden, std::size_t delay, std::uint64_t seed) {
  RnnModel m = zeros(n_input, n_hidden, delay);
  Rng rng(seed);
  const double hidden_span = 1.0 / std::sqrt(static_cast<double>(n_input + n_hidden));
  const double output_span = 1.0 / std::sqrt(static_cast<double>(n_hidden));
  auto draw = [&](double span) { return rng.uniform(-0.5, 0.5) * span; };
  for (Eigen::Index i = 0; i < m.U.rows(); ++i)
    for (Eigen::Index j = 0; j < m.U.cols(); ++j) m.U(i, j) = draw(hidden_span);
  for (Eigen::Index i = 0; i < m.W.rows(); ++i)
    for (Eigen::Index j = 0; j < m.W.cols(); ++j) m.W(i, j) = draw(hidden_span);
  for (Eigen::Index i = 0; i < m.V.size(); ++i) m.V(i) = draw(output_span);
  for (Eigen::Index i = 0; i < m.b_h.size(); ++i) m.b_h(i) = draw(hidden_span);
  m.b_y = draw(output_span);
  return m;
}

Eigen::VectorXd RnnModel::params() const {
  Layout L(*this);
  Eigen::VectorXd theta(L.total);
  Eigen::Map<RowMajor>(theta.data() + L.u, L.nh, L.n_in) = U;
  Eigen::Map<RowMajor>(theta.data() + L.w, L.nh, L.nh) = W;
  theta.segment(L.v, L.nh) = V;
  theta.segment(L.bh, L.nh) = b_h;
  theta(L.by) = b_y;
  return theta;
}

void RnnModel::set_params(const Eigen::VectorXd& theta) {
  Layout L(*this);
  require(theta.size() == L.total, "parameter vector has wrong length");
  U = Eigen::Map<const RowMajor>(theta.data() + L.u, L.nh, L.n_in);
  W = Eigen::Map<const RowMajor>(theta.data() + L.w, L.nh, L.nh);
  V = theta.segment(L.v, L.nh);
  b_h = theta.segment(L.bh, L.nh);
  b_y = theta(L.by);
}

void RnnModel::validate() const {
  const auto nh = static_cast<Eigen::Index>(n_hidden);
  require(n_input >= 1 && n_hidden >= 1 && delay >= 1, "model dimensions must be positive");
  require(U.rows() == nh && U.cols() == static_cast<Eigen::Index>(n_input), "U has wrong shape");
  require(W.rows() == nh && W.cols() == nh, "W has wrong shape");
  require(V.size() == nh && b_h.size() == nh, "V or b_h has wrong length");
  if (!params().allFinite()) fail(ErrorCode::numeric, "model has non-finite weights");
}

SequenceDataset build_supervised(const Eigen::MatrixXd& features, std::span<const double> close, std::size_t tau,
                                 std::span<const Date> dates) {
  const auto T = static_cast<std::size_t>(features.rows());
  require(tau >= 1, "delay must be >= 1");
  require(close.size() == T, "close series length must match feature rows");
  require(dates.empty() || dates.size() == T, "date count must match feature rows");
  if (tau >= T)
    fail(ErrorCode::invalid_argument,
         "delay " + std::to_string(tau) + " leaves no pairs in a series of length " + std::to_string(T));
  const std::size_t n = T - tau;
  SequenceDataset out;
  out.delay = tau;
  out.inputs = features.topRows(static_cast<Eigen::Index>(n));
  out.targets.resize(static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) out.targets(static_cast<Eigen::Index>(t)) = close[t + tau];
  if (!dates.empty()) out.target_dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(tau), dates.end());
  return out;
}

Eigen::VectorXd forward(const RnnModel& model, const SequenceDataset& data) {
  return run(model, data, data.size()).y;
}

double loss_mse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    fail(ErrorCode::invalid_argument, "loss_mse: length mismatch");
  require(!predictions.empty(), "loss_mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
  return s / static_cast<double>(predictions.size());
}

double loss_mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
  return loss_mse(std::span<const double>(predictions.data(), static_cast<std::size_t>(predictions.size())),
                  std::span<const double>(targets.data(), static_cast<std::size_t>(targets.size())));
}

double subset_mse(const RnnModel& model, const SequenceDataset& data, std::span<const std::size_t> subset) {
  require(!subset.empty(), "subset_mse: empty subset");
  auto tr = run(model, data, subset_end(subset, data.size()));
  double s = 0.0;
  for (auto i : subset) {
    const double e = tr.y(static_cast<Eigen::Index>(i)) - data.targets(static_cast<Eigen::Index>(i));
    s += e * e;
  }
  return s / static_cast<double>(subset.size());
}

GradientResult gradient_bptt(const RnnModel& m, const SequenceDataset& data, std::span<const std::size_t> subset) {
  const std::size_t steps = subset_end(subset, data.size());
  Layout L(m);
  GradientResult out{0.0, Eigen::VectorXd::Zero(L.total)};
  if (steps == 0) return out;
  auto tr = run(m, data, steps);

  Eigen::VectorXd d_out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(steps));
  for (auto i : subset) {
    const auto ti = static_cast<Eigen::Index>(i);
    const double e = tr.y(ti) - data.targets(ti);
    out.sse += e * e;
    d_out(ti) += 2.0 * e * derivative_from_output(m.output, tr.y(ti));
  }

  Eigen::MatrixXd gU = Eigen::MatrixXd::Zero(L.nh, L.n_in);
  Eigen::MatrixXd gW = Eigen::MatrixXd::Zero(L.nh, L.nh);
  Eigen::VectorXd gV = Eigen::VectorXd::Zero(L.nh);
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(L.nh);
  double gby = 0.0;
  Eigen::VectorXd da_next = Eigen::VectorXd::Zero(L.nh);
  Eigen::VectorXd dh(L.nh), da(L.nh);
  for (auto t = static_cast<Eigen::Index>(steps) - 1; t >= 0; --t) {
    const double g = d_out(t);
    gV += g * tr.h.col(t);
    gby += g;
    dh.noalias() = m.V * g + m.W.transpose() * da_next;
    for (Eigen::Index i = 0; i < L.nh; ++i) da(i) = dh(i) * derivative_from_output(m.hidden, tr.h(i, t));
    gU.noalias() += da * data.inputs.row(t);
    if (t > 0) gW.noalias() += da * tr.h.col(t - 1).transpose();
    gb += da;
    da_next = da;
  }
  Eigen::Map<RowMajor>(out.gradient.data() + L.u, L.nh, L.n_in) = gU;
  Eigen::Map<RowMajor>(out.gradient.data() + L.w, L.nh, L.nh) = gW;
  out.gradient.segment(L.v, L.nh) = gV;
  out.gradient.segment(L.bh, L.nh) = gb;
  out.gradient(L.by) = gby;
  return out;
}

Eigen::MatrixXd jacobian_bptt(const RnnModel& m, const SequenceDataset& data, std::span<const std::size_t> subset) {
  const std::size_t steps = subset_end(subset, data.size());
  Layout L(m);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(subset.size()), L.total);
  if (steps == 0) return J;
  auto tr = run(m, data, steps);

  RowMajor gU(L.nh, L.n_in), gW(L.nh, L.nh);
  Eigen::VectorXd gb(L.nh), dh(L.nh), da(L.nh);
  for (std::size_t r = 0; r < subset.size(); ++r) {
    const auto t0 = static_cast<Eigen::Index>(subset[r]);
    const double g = derivative_from_output(m.output, tr.y(t0));
    gU.setZero();
    gW.setZero();
    gb.setZero();
    dh = m.V * g;
    for (Eigen::Index t = t0; t >= 0; --t) {
      for (Eigen::Index i = 0; i < L.nh; ++i) da(i) = dh(i) * derivative_from_output(m.hidden, tr.h(i, t));
      gU.noalias() += da * data.inputs.row(t);
      if (t > 0) gW.noalias() += da * tr.h.col(t - 1).transpose();
      gb += da;
      dh.noalias() = m.W.transpose() * da;
    }
    const auto row = static_cast<Eigen::Index>(r);
    J.row(row).segment(L.u, L.nh * L.n_in) = Eigen::Map<const Eigen::RowVectorXd>(gU.data(), L.nh * L.n_in);
    J.row(row).segment(L.w, L.nh * L.nh) = Eigen::Map<const Eigen::RowVectorXd>(gW.data(), L.nh * L.nh);
    J.row(row).segment(L.v, L.nh) = g * tr.h.col(t0).transpose();
    J.row(row).segment(L.bh, L.nh) = gb.transpose();
    J(row, L.by) = g;
  }
  return J;
}

JacobianResult jacobian_forward(const RnnModel& m, const SequenceDataset& data, std::span<const std::size_t> subset) {
  const std::size_t steps = subset_end(subset, data.size());
  Layout L(m);
  JacobianResult out{Eigen::VectorXd(static_cast<Eigen::Index>(subset.size())),
                     Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(subset.size()), L.total)};
  if (steps == 0) return out;

  // rows_at[t] lists the Jacobian rows that read step t.
  std::vector<std::vector<Eigen::Index>> rows_at(steps);
  for (std::size_t r = 0; r < subset.size(); ++r) rows_at[subset[r]].push_back(static_cast<Eigen::Index>(r));

  // Sensitivity columns: U block, W block, b_h block (V and b_y do not reach h).
  const Eigen::Index uw = L.nh * L.n_in + L.nh * L.nh;
  const Eigen::Index ph = uw + L.nh;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(L.nh, ph);
  Eigen::MatrixXd A(L.nh, ph);
  Eigen::VectorXd h_prev = Eigen::VectorXd::Zero(L.nh);
  Eigen::VectorXd a(L.nh), h(L.nh);
  Eigen::RowVectorXd vs(ph);

  for (std::size_t step = 0; step < steps; ++step) {
    const auto t = static_cast<Eigen::Index>(step);
    const auto x = data.inputs.row(t);
    a.noalias() = m.U * x.transpose() + m.b_h;
    if (step > 0) {
      a.noalias() += m.W * h_prev;
      A.noalias() = m.W * S;
    } else {
      A.setZero();
    }
    for (Eigen::Index i = 0; i < L.nh; ++i) {
      A.row(i).segment(i * L.n_in, L.n_in) += x;
      A.row(i).segment(L.nh * L.n_in + i * L.nh, L.nh) += h_prev.transpose();
      A(i, uw + i) += 1.0;
      h(i) = activate(m.hidden, a(i));
    }
    for (Eigen::Index i = 0; i < L.nh; ++i) S.row(i) = derivative_from_output(m.hidden, h(i)) * A.row(i);
    const double y = activate(m.output, m.V.dot(h) + m.b_y);
    if (!std::isfinite(y) || !h.allFinite())
      fail(ErrorCode::numeric, "non-finite network state at time index " + std::to_string(step));

    if (!rows_at[step].empty()) {
      const double g = derivative_from_output(m.output, y);
      vs.noalias() = g * (m.V.transpose() * S);
      for (auto row : rows_at[step]) {
        out.errors(row) = y - data.targets(t);
        out.jacobian.row(row).segment(0, uw) = vs.head(uw);
        out.jacobian.row(row).segment(L.v, L.nh) = g * h.transpose();
        out.jacobian.row(row).segment(L.bh, L.nh) = vs.tail(L.nh);
        out.jacobian(row, L.by) = g;
      }
    }
    h_prev = h;
  }
  return out;
}

MinMaxScaling MinMaxScaling::fit(const SequenceDataset& data, std::span<const std::size_t> rows) {
  require(!rows.empty(), "scaling needs at least one row");
  MinMaxScaling s;
  const auto first = static_cast<Eigen::Index>(rows[0]);
  s.input_min = data.inputs.row(first).transpose();
  s.input_max = s.input_min;
  s.target_min = s.target_max = data.targets(first);
  for (auto r : rows) {
    const auto ri = static_cast<Eigen::Index>(r);
    s.input_min = s.input_min.cwiseMin(data.inputs.row(ri).transpose());
    s.input_max = s.input_max.cwiseMax(data.inputs.row(ri).transpose());
    s.target_min = std::min(s.target_min, data.targets(ri));
    s.target_max = std::max(s.target_max, data.targets(ri));
  }
  return s;
}

namespace {
double to_unit(double v, double lo, double hi) { return hi > lo ? 2.0 * (v - lo) / (hi - lo) - 1.0 : 0.0; }
}  // namespace

SequenceDataset MinMaxScaling::apply(const SequenceDataset& data) const {
  require(static_cast<Eigen::Index>(data.n_input()) == input_min.size(), "scaling dimension mismatch");
  SequenceDataset out = data;
  for (Eigen::Index j = 0; j < out.inputs.cols(); ++j)
    for (Eigen::Index i = 0; i < out.inputs.rows(); ++i)
      out.inputs(i, j) = to_unit(data.inputs(i, j), input_min(j), input_max(j));
  for (Eigen::Index i = 0; i < out.targets.size(); ++i) out.targets(i) = to_unit(data.targets(i), target_min, target_max);
  return out;
}

double MinMaxScaling::unscale_target(double v) const {
  if (!(target_max > target_min)) return target_min;
  return (v + 1.0) * 0.5 * (target_max - target_min) + target_min;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kMagic = "aeroforecast-rnn";
constexpr int kFormatVersion = 1;

void write_values(std::ostream& out, std::string_view key, const double* v, Eigen::Index n) {
  out << key;
  for (Eigen::Index i = 0; i < n; ++i) out << ' ' << format_number(v[i]);
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) fail(ErrorCode::parse, "model file truncated");
    return w;
  }
  void expect(std::string_view key) {
    auto w = word();
    if (w != key) fail(ErrorCode::parse, "model file: expected '" + std::string(key) + "', found '" + w + "'");
  }
  double number() { return parse_number(word()); }
  std::size_t count() {
    auto w = word();
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || p != w.data() + w.size()) fail(ErrorCode::parse, "model file: bad count '" + w + "'");
    return v;
  }
  void values(std::string_view key, double* v, Eigen::Index n) {
    expect(key);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = number();
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_model(std::ostream& out, const ModelFile& file) {
  const RnnModel& m = file.model;
  m.validate();
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "n_input " << m.n_input << '\n';
  out << "n_hidden " << m.n_hidden << '\n';
  out << "delay " << m.delay << '\n';
  out << "hidden_activation " << to_string(m.hidden) << '\n';
  out << "output_activation " << to_string(m.output) << '\n';
  RowMajor u = m.U, w = m.W;
  write_values(out, "U", u.data(), u.size());
  write_values(out, "W", w.data(), w.size());
  write_values(out, "V", m.V.data(), m.V.size());
  write_values(out, "b_h", m.b_h.data(), m.b_h.size());
  write_values(out, "b_y", &m.b_y, 1);
  if (file.scaling) {
    const auto& s = *file.scaling;
    out << "scaling minmax\n";
    write_values(out, "input_min", s.input_min.data(), s.input_min.size());
    write_values(out, "input_max", s.input_max.data(), s.input_max.size());
    write_values(out, "target_min", &s.target_min, 1);
    write_values(out, "target_max", &s.target_max, 1);
  } else {
    out << "scaling none\n";
  }
  out << "end\n";
  if (!out) fail(ErrorCode::io, "failed writing model");
}

ModelFile load_model(std::istream& in) {
  Reader r(in);
  r.expect(kMagic);
  if (r.count() != kFormatVersion) fail(ErrorCode::parse, "unsupported model format version");
  r.expect("n_input");
  const auto n_in = r.count();
  r.expect("n_hidden");
  const auto nh = r.count();
  r.expect("delay");
  const auto delay = r.count();
  ModelFile file;
  file.model = RnnModel::zeros(n_in, nh, delay);
  RnnModel& m = file.model;
  r.expect("hidden_activation");
  m.hidden = parse_activation(r.word());
  r.expect("output_activation");
  m.output = parse_activation(r.word());
  RowMajor u(m.U.rows(), m.U.cols()), w(m.W.rows(), m.W.cols());
  r.values("U", u.data(), u.size());
  r.values("W", w.data(), w.size());
  m.U = u;
  m.W = w;
  r.values("V", m.V.data(), m.V.size());
  r.values("b_h", m.b_h.data(), m.b_h.size());
  r.values("b_y", &m.b_y, 1);
  r.expect("scaling");
  auto kind = r.word();
  if (kind == "minmax") {
    MinMaxScaling s;
    s.input_min.resize(static_cast<Eigen::Index>(n_in));
    s.input_max.resize(static_cast<Eigen::Index>(n_in));
    r.values("input_min", s.input_min.data(), s.input_min.size());
    r.values("input_max", s.input_max.data(), s.input_max.size());
    r.values("target_min", &s.target_min, 1);
    r.values("target_max", &s.target_max, 1);
    file.scaling = s;
  } else if (kind != "none") {
    fail(ErrorCode::parse, "model file: unknown scaling '" + kind + "'");
  }
  r.expect("end");
  m.validate();
  return file;
}

}  // namespace aerofc
