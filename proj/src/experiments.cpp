#include "aeroforecast/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "aeroforecast/error.hpp"

namespace aerofc {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  return out;
}

std::string timing(double seconds, const ReportOptions& opt) {
  return opt.include_timing ? format_number(seconds) : std::string("NA");
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kMissing;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(FeatureSet s) noexcept {
  switch (s) {
    case FeatureSet::fundamental: return "fundamental";
    case FeatureSet::technical: return "technical";
    case FeatureSet::mixed: return "mixed";
  }
  return "?";
}

std::string_view display_name(FeatureSet s) noexcept {
  switch (s) {
    case FeatureSet::fundamental: return "Fundamental";
    case FeatureSet::technical: return "Technical";
    case FeatureSet::mixed: return "Mixed";
  }
  return "?";
}

FeatureSet parse_feature_set(std::string_view name) {
  const auto s = lower(name);
  if (s == "fundamental") return FeatureSet::fundamental;
  if (s == "technical") return FeatureSet::technical;
  if (s == "mixed") return FeatureSet::mixed;
  fail(ErrorCode::invalid_argument,
       "unknown feature set '" + std::string(name) + "' (expected fundamental, technical or mixed)");
}

std::string_view to_string(SplitMode m) noexcept { return m == SplitMode::random ? "random" : "contiguous"; }

SplitMode parse_split_mode(std::string_view name) {
  const auto s = lower(name);
  if (s == "random") return SplitMode::random;
  if (s == "contiguous") return SplitMode::contiguous;
  fail(ErrorCode::invalid_argument, "unknown split mode '" + std::string(name) + "'");
}

std::string_view to_string(PcaScope s) noexcept { return s == PcaScope::full_series ? "full" : "train"; }

PcaScope parse_pca_scope(std::string_view name) {
  const auto s = lower(name);
  if (s == "full" || s == "full_series") return PcaScope::full_series;
  if (s == "train" || s == "train_only") return PcaScope::train_only;
  fail(ErrorCode::invalid_argument, "unknown PCA scope '" + std::string(name) + "'");
}

std::string_view to_string(ScaleMode m) noexcept { return m == ScaleMode::center_only ? "center" : "zscore"; }

ScaleMode parse_scale_mode(std::string_view name) {
  const auto s = lower(name);
  if (s == "center" || s == "center_only") return ScaleMode::center_only;
  if (s == "zscore" || s == "z_score") return ScaleMode::z_score;
  fail(ErrorCode::invalid_argument, "unknown PCA scale mode '" + std::string(name) + "'");
}

Split split_70_15_15(std::size_t n_samples, std::uint64_t seed, SplitMode mode) {
  require(n_samples >= 20, "split needs at least 20 samples, got " + std::to_string(n_samples));
  const auto r = static_cast<std::size_t>(std::lround(0.15 * static_cast<double>(n_samples)));
  std::vector<std::size_t> idx(n_samples);
  std::iota(idx.begin(), idx.end(), 0);
  if (mode == SplitMode::random) {
    Rng rng(seed);
    for (std::size_t i = n_samples - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
  }
  const std::size_t n_train = n_samples - 2 * r;
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
  s.val.assign(idx.begin() + static_cast<long>(n_train), idx.begin() + static_cast<long>(n_train + r));
  s.test.assign(idx.begin() + static_cast<long>(n_train + r), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::string ExperimentSpec::label() const {
  return company + "_" + std::string(to_string(algorithm)) + "_" + std::string(to_string(feature_set)) + "_n" +
         std::to_string(n_hidden) + "_d" + std::to_string(delay);
}

std::optional<std::size_t> ExperimentResult::best_repeat() const {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < repeats.size(); ++i)
    if (repeats[i].ok && (!best || repeats[i].test_mse < repeats[*best].test_mse)) best = i;
  return best;
}

namespace {

void run_one(const ExperimentSpec& spec, const Eigen::MatrixXd& X, const AlignedDataset& data,
             const std::optional<PcaModel>& shared_pca, const Eigen::MatrixXd* shared_z, RepeatRecord& rec) {
  const std::size_t n_pairs = data.rows() - spec.delay;
  const Split split = split_70_15_15(n_pairs, derive_seed(rec.seed, "split"), spec.split);

  Eigen::MatrixXd local_z;
  const Eigen::MatrixXd* z = &X;
  if (spec.pca_k > 0) {
    if (shared_z != nullptr) {
      z = shared_z;
      rec.pca = shared_pca;
    } else {
      Eigen::MatrixXd rows(static_cast<Eigen::Index>(split.train.size()), X.cols());
      for (std::size_t i = 0; i < split.train.size(); ++i)
        rows.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(split.train[i]));
      rec.pca = fit_pca(rows, spec.pca_k, spec.pca_scale);
      local_z = transform(*rec.pca, X);
      z = &local_z;
    }
  }

  const SequenceDataset pairs = build_supervised(*z, data.target, spec.delay, data.dates);
  SequenceDataset scaled_store;
  const SequenceDataset* net_data = &pairs;
  if (spec.scale_data) {
    rec.model.scaling = MinMaxScaling::fit(pairs, split.train);
    scaled_store = rec.model.scaling->apply(pairs);
    net_data = &scaled_store;
  }

  TrainConfig cfg = spec.train;
  cfg.algorithm = spec.algorithm;
  cfg.seed = rec.seed;
  const auto init = RnnModel::initialized(pairs.n_input(), spec.n_hidden, spec.delay, derive_seed(rec.seed, "init"));
  TrainOutcome out = train(init, *net_data, split.train, split.val, cfg);

  const Eigen::VectorXd y = forward(out.model, *net_data);
  double sse = 0.0;
  for (auto i : split.test) {
    const auto t = static_cast<Eigen::Index>(i);
    const double pred = rec.model.scaling ? rec.model.scaling->unscale_target(y(t)) : y(t);
    const double target = pairs.targets(t);
    rec.test_dates.push_back(pairs.target_dates[i]);
    rec.test_targets.push_back(target);
    rec.test_predictions.push_back(pred);
    sse += (target - pred) * (target - pred);
  }
  rec.test_mse = sse / static_cast<double>(split.test.size());
  if (!std::isfinite(rec.test_mse)) fail(ErrorCode::numeric, "non-finite test MSE");

  rec.model.model = std::move(out.model);
  rec.total_epochs = out.record.total_epochs;
  rec.best_epoch = out.record.best_epoch;
  rec.wall_seconds = out.record.wall_seconds;
  rec.stop_reason = out.record.stop_reason;
  rec.record = std::move(out.record);
  rec.ok = true;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const AlignedDataset& data) {
  ExperimentResult res;
  res.spec = spec;
  res.repeats.resize(spec.repeats);
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    res.repeats[r].repeat = r;
    res.repeats[r].seed = spec.base_seed + r;
  }

  Eigen::MatrixXd X;
  std::optional<PcaModel> shared_pca;
  Eigen::MatrixXd shared_z;
  std::string setup_error;
  try {
    require(spec.repeats >= 1, "repeats must be at least 1");
    require(spec.n_hidden >= 1, "n_hidden must be at least 1");
    require(spec.delay >= 1, "delay must be at least 1");
    require(data.rows() > spec.delay, "series of " + std::to_string(data.rows()) + " rows is too short for delay " +
                                          std::to_string(spec.delay));
    X = data.select(spec.feature_set);
    require(spec.pca_k <= static_cast<std::size_t>(X.cols()),
            "pca_k " + std::to_string(spec.pca_k) + " exceeds the " + std::to_string(X.cols()) + " features");
    if (spec.pca_k > 0 && spec.pca_scope == PcaScope::full_series) {
      shared_pca = fit_pca(X, spec.pca_k, spec.pca_scale);
      shared_z = transform(*shared_pca, X);
    }
  } catch (const std::exception& e) {
    setup_error = e.what();
  }

  std::vector<double> epochs, best, mse, secs;
  for (auto& rec : res.repeats) {
    if (!setup_error.empty()) {
      rec.error = setup_error;
      continue;
    }
    try {
      run_one(spec, X, data, shared_pca, shared_pca ? &shared_z : nullptr, rec);
    } catch (const std::exception& e) {
      RepeatRecord failed;
      failed.repeat = rec.repeat;
      failed.seed = rec.seed;
      failed.error = e.what();
      rec = std::move(failed);
      continue;
    }
    epochs.push_back(static_cast<double>(rec.total_epochs));
    best.push_back(static_cast<double>(rec.best_epoch));
    mse.push_back(rec.test_mse);
    secs.push_back(rec.wall_seconds);
  }
  res.n_ok = mse.size();
  res.avg_total_epochs = mean_of(epochs);
  res.avg_best_epochs = mean_of(best);
  res.avg_test_mse = mean_of(mse);
  res.avg_runtime_seconds = mean_of(secs);
  return res;
}

std::uint64_t cell_seed(std::uint64_t seed, const ExperimentSpec& s) {
  return derive_seed(seed, "cell/" + s.company + "/" + std::string(to_string(s.algorithm)) + "/" +
                               std::string(to_string(s.feature_set)) + "/" + std::to_string(s.n_hidden) + "/" +
                               std::to_string(s.delay));
}

std::vector<ExperimentSpec> enumerate_grid(const std::vector<std::string>& companies, const GridConfig& cfg) {
  std::vector<ExperimentSpec> specs;
  for (const auto& company : companies)
    for (auto algo : cfg.algorithms)
      for (auto fs : cfg.feature_sets)
        for (auto n : cfg.neurons)
          for (auto d : cfg.delays) {
            ExperimentSpec s = cfg.cell;
            s.company = company;
            s.algorithm = algo;
            s.feature_set = fs;
            s.n_hidden = n;
            s.delay = d;
            s.base_seed = cell_seed(cfg.seed, s);
            specs.push_back(std::move(s));
          }
  return specs;
}

std::size_t GridReport::runs() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.repeats.size();
  return n;
}

std::size_t GridReport::failed_runs() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.repeats.size() - c.n_ok;
  return n;
}

std::vector<ExperimentResult> run_cells(const std::vector<ExperimentSpec>& specs,
                                        const std::function<const AlignedDataset&(const ExperimentSpec&)>& data_for,
                                        std::size_t jobs, const ProgressFn& progress) {
  std::vector<ExperimentResult> results(specs.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(specs.size(), 1));

  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      results[i] = run_experiment(specs[i], data_for(specs[i]));
      if (progress) {
        std::lock_guard<std::mutex> lock(mu);
        progress(++done, specs.size());
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

GridReport run_grid(const std::vector<CompanyBundle>& companies, const GridConfig& cfg, const ProgressFn& progress) {
  require(!companies.empty(), "grid needs at least one company");
  std::vector<std::string> labels;
  std::map<std::string, const AlignedDataset*> by_label;
  for (const auto& c : companies) {
    require(!by_label.count(c.label), "duplicate company label '" + c.label + "'");
    labels.push_back(c.label);
    by_label[c.label] = &c.data;
  }
  GridReport report;
  report.cells = run_cells(
      enumerate_grid(labels, cfg), [&](const ExperimentSpec& s) -> const AlignedDataset& { return *by_label.at(s.company); },
      cfg.jobs, progress);
  return report;
}

std::string_view to_string(Dimension d) noexcept {
  switch (d) {
    case Dimension::algorithm: return "algorithm";
    case Dimension::feature_set: return "feature_set";
    case Dimension::neurons: return "neurons";
    case Dimension::delay: return "delay";
  }
  return "?";
}

namespace {

std::string level_of(const ExperimentSpec& s, Dimension d) {
  switch (d) {
    case Dimension::algorithm: return std::string(display_name(s.algorithm));
    case Dimension::feature_set: return std::string(display_name(s.feature_set));
    case Dimension::neurons: return std::to_string(s.n_hidden) + " neurons";
    case Dimension::delay: return std::to_string(s.delay) + " delays";
  }
  return "?";
}

std::string_view column_title(Dimension d) {
  switch (d) {
    case Dimension::algorithm: return "algorithms";
    case Dimension::feature_set: return "features";
    case Dimension::neurons: return "neurons";
    case Dimension::delay: return "delays";
  }
  return "?";
}

constexpr const char* kMetricHeader =
    "average_total_epochs,average_best_performance_epochs,average_mse,average_running_time_s";

}  // namespace

std::vector<MarginalRow> marginals(const GridReport& report, Dimension dim) {
  struct Acc {
    std::vector<double> epochs, best, mse, secs;
  };
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& cell : report.cells) {
    const auto key = std::make_pair(cell.spec.company, level_of(cell.spec, dim));
    if (!acc.count(key)) order.push_back(key);
    auto& a = acc[key];
    if (cell.n_ok == 0) continue;
    a.epochs.push_back(cell.avg_total_epochs);
    a.best.push_back(cell.avg_best_epochs);
    a.mse.push_back(cell.avg_test_mse);
    a.secs.push_back(cell.avg_runtime_seconds);
  }
  std::vector<MarginalRow> rows;
  for (const auto& key : order) {
    const auto& a = acc.at(key);
    rows.push_back({key.first, key.second, a.mse.size(), mean_of(a.epochs), mean_of(a.best), mean_of(a.mse),
                    mean_of(a.secs)});
  }
  return rows;
}

void write_grid_results(const std::filesystem::path& path, const GridReport& report, const ReportOptions& opt) {
  auto out = open_out(path);
  out << "company,algorithm,feature_set,neurons,delays,pca_k,repeats,ok_repeats,base_seed," << kMetricHeader << '\n';
  for (const auto& c : report.cells) {
    const auto& s = c.spec;
    out << s.company << ',' << display_name(s.algorithm) << ',' << to_string(s.feature_set) << ',' << s.n_hidden
        << ',' << s.delay << ',' << s.pca_k << ',' << c.repeats.size() << ',' << c.n_ok << ',' << s.base_seed << ','
        << format_number(c.avg_total_epochs) << ',' << format_number(c.avg_best_epochs) << ','
        << format_number(c.avg_test_mse) << ',' << (c.n_ok ? timing(c.avg_runtime_seconds, opt) : "") << '\n';
  }
}

void write_marginals(const std::filesystem::path& path, Dimension dim, const std::vector<MarginalRow>& rows,
                     const ReportOptions& opt) {
  auto out = open_out(path);
  out << "company," << column_title(dim) << ",cells," << kMetricHeader << '\n';
  for (const auto& r : rows)
    out << r.company << ',' << r.level << ',' << r.n_cells << ',' << format_number(r.avg_total_epochs) << ','
        << format_number(r.avg_best_epochs) << ',' << format_number(r.avg_test_mse) << ','
        << (r.n_cells ? timing(r.avg_runtime_seconds, opt) : "") << '\n';
}

void write_predictions(const std::filesystem::path& path, const RepeatRecord& run) {
  auto out = open_out(path);
  out << "date,target,prediction,error\n";
  for (std::size_t i = 0; i < run.test_targets.size(); ++i)
    out << (i < run.test_dates.size() ? format_date(run.test_dates[i]) : std::to_string(i)) << ','
        << format_number(run.test_targets[i]) << ',' << format_number(run.test_predictions[i]) << ','
        << format_number(run.test_targets[i] - run.test_predictions[i]) << '\n';
}

void write_training_curve(const std::filesystem::path& path, const TrainRecord& record) {
  auto out = open_out(path);
  out << "epoch,train_mse,val_mse\n";
  for (std::size_t e = 0; e < record.train_mse.size(); ++e)
    out << e << ',' << format_number(record.train_mse[e]) << ','
        << (e < record.val_mse.size() ? format_number(record.val_mse[e]) : "") << '\n';
}

void write_failures(const std::filesystem::path& path, const GridReport& report) {
  auto out = open_out(path);
  out << "cell,company,repeat,seed,error\n";
  for (const auto& c : report.cells)
    for (const auto& r : c.repeats) {
      if (r.ok) continue;
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << c.spec.label() << ',' << c.spec.company << ',' << r.repeat << ',' << r.seed << ',' << msg << '\n';
    }
}

std::vector<PcaAssessment> assess_pca(const GridReport& report, const std::vector<CompanyBundle>& companies,
                                      std::size_t jobs) {
  std::vector<std::string> order;
  std::map<std::string, const ExperimentResult*> best;
  for (const auto& cell : report.cells) {
    if (!best.count(cell.spec.company)) {
      order.push_back(cell.spec.company);
      best[cell.spec.company] = nullptr;
    }
    if (cell.spec.pca_k == 0 || cell.n_ok == 0) continue;
    auto& b = best[cell.spec.company];
    if (b == nullptr || cell.avg_test_mse < b->avg_test_mse) b = &cell;
  }
  std::vector<ExperimentSpec> raw_specs;
  std::vector<std::string> assessed;
  for (const auto& company : order) {
    if (best[company] == nullptr) continue;
    ExperimentSpec s = best[company]->spec;
    s.pca_k = 0;
    raw_specs.push_back(s);
    assessed.push_back(company);
  }
  std::map<std::string, const AlignedDataset*> by_label;
  for (const auto& c : companies) by_label[c.label] = &c.data;
  auto raw = run_cells(
      raw_specs, [&](const ExperimentSpec& s) -> const AlignedDataset& { return *by_label.at(s.company); }, jobs);
  std::vector<PcaAssessment> rows;
  for (std::size_t i = 0; i < assessed.size(); ++i) rows.push_back({assessed[i], *best[assessed[i]], std::move(raw[i])});
  return rows;
}

void write_pca_assessment(const std::filesystem::path& path, const std::vector<PcaAssessment>& rows,
                          const ReportOptions& opt) {
  auto out = open_out(path);
  out << "company,variant,cell," << kMetricHeader << '\n';
  for (const auto& r : rows) {
    for (const auto* res : {&r.with_pca, &r.without_pca}) {
      out << r.company << ',' << (res == &r.with_pca ? "With PCA" : "Without PCA") << ',' << res->spec.label() << ','
          << format_number(res->avg_total_epochs) << ',' << format_number(res->avg_best_epochs) << ','
          << format_number(res->avg_test_mse) << ',' << (res->n_ok ? timing(res->avg_runtime_seconds, opt) : "")
          << '\n';
    }
  }
}

}  // namespace aerofc
