#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aeroforecast/market_data.hpp"
#include "aeroforecast/pca.hpp"
#include "aeroforecast/rnn.hpp"
#include "aeroforecast/trainers.hpp"

namespace aerofc {

std::string_view to_string(FeatureSet s) noexcept;
std::string_view display_name(FeatureSet s) noexcept;  ///< "Fundamental", ...
FeatureSet parse_feature_set(std::string_view name);

enum class SplitMode { random, contiguous };
enum class PcaScope { full_series, train_only };

std::string_view to_string(SplitMode m) noexcept;
SplitMode parse_split_mode(std::string_view name);
std::string_view to_string(PcaScope s) noexcept;
PcaScope parse_pca_scope(std::string_view name);
std::string_view to_string(ScaleMode m) noexcept;
ScaleMode parse_scale_mode(std::string_view name);

struct Split {
  std::vector<std::size_t> train, val, test;  ///< each sorted ascending
};

/// |val| = |test| = round(0.15 n), train gets the rest. Random mode assigns a
/// seeded shuffle of the indices; contiguous mode takes time-ordered blocks.
Split split_70_15_15(std::size_t n_samples, std::uint64_t seed, SplitMode mode = SplitMode::random);

struct ExperimentSpec {
  std::string company;
  Algorithm algorithm = Algorithm::lm;
  FeatureSet feature_set = FeatureSet::mixed;
  std::size_t n_hidden = 10;
  std::size_t delay = 5;
  std::size_t pca_k = 3;  ///< 0 feeds the raw features
  ScaleMode pca_scale = ScaleMode::center_only;
  PcaScope pca_scope = PcaScope::full_series;
  std::size_t repeats = 10;
  std::uint64_t base_seed = 0;
  SplitMode split = SplitMode::random;
  /// Min-max scaling of network inputs and target, fitted on training rows.
  bool scale_data = true;
  TrainConfig train;  ///< train.algorithm is overwritten by `algorithm`

  /// e.g. "MFG_br_mixed_n15_d5"
  std::string label() const;
};

struct RepeatRecord {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::size_t total_epochs = 0;
  std::size_t best_epoch = 0;
  double test_mse = kMissing;
  double wall_seconds = 0.0;
  StopReason stop_reason = StopReason::max_epochs;
  TrainRecord record;
  ModelFile model;
  std::optional<PcaModel> pca;
  std::vector<Date> test_dates;
  std::vector<double> test_targets, test_predictions;  ///< original units
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<RepeatRecord> repeats;
  std::size_t n_ok = 0;
  double avg_total_epochs = kMissing;
  double avg_best_epochs = kMissing;
  double avg_test_mse = kMissing;
  double avg_runtime_seconds = kMissing;

  bool partial() const { return n_ok < repeats.size(); }
  /// Index of the successful repeat with the lowest test MSE, if any.
  std::optional<std::size_t> best_repeat() const;
};

/// Per repeat r (seed = base_seed + r): fit PCA, build delayed pairs, split,
/// scale, train, and score test MSE in original price units. Failures are
/// recorded on the repeat and leave the remaining repeats running.
ExperimentResult run_experiment(const ExperimentSpec& spec, const AlignedDataset& data);

struct CompanyBundle {
  std::string label;
  AlignedDataset data;
};

struct GridConfig {
  std::vector<Algorithm> algorithms = {Algorithm::lm, Algorithm::br, Algorithm::scg};
  std::vector<FeatureSet> feature_sets = {FeatureSet::fundamental, FeatureSet::technical, FeatureSet::mixed};
  std::vector<std::size_t> neurons = {5, 10, 15, 20};
  std::vector<std::size_t> delays = {5, 10, 15};
  std::uint64_t seed = 0;
  /// Template for every cell; company, algorithm, feature set, neurons,
  /// delay and base_seed are filled in per cell.
  ExperimentSpec cell;
  std::size_t jobs = 0;  ///< 0 = hardware concurrency
};

/// derive_seed(seed, "cell/<company>/<algorithm>/<feature set>/<neurons>/<delay>")
std::uint64_t cell_seed(std::uint64_t seed, const ExperimentSpec& spec);

/// Cell order: company, algorithm, feature set, neurons, delay (outermost
/// first). Each cell's base seed is cell_seed(cfg.seed, cell).
std::vector<ExperimentSpec> enumerate_grid(const std::vector<std::string>& companies, const GridConfig& cfg);

struct GridReport {
  std::vector<ExperimentResult> cells;  ///< enumeration order

  std::size_t runs() const;
  std::size_t failed_runs() const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Runs every cell, in parallel when jobs > 1; results do not depend on the
/// worker count.
GridReport run_grid(const std::vector<CompanyBundle>& companies, const GridConfig& cfg,
                    const ProgressFn& progress = {});

/// Runs the given specs against `data_for(spec)` with the same worker pool.
std::vector<ExperimentResult> run_cells(const std::vector<ExperimentSpec>& specs,
                                        const std::function<const AlignedDataset&(const ExperimentSpec&)>& data_for,
                                        std::size_t jobs, const ProgressFn& progress = {});

enum class Dimension { algorithm, feature_set, neurons, delay };
std::string_view to_string(Dimension d) noexcept;

struct MarginalRow {
  std::string company;
  std::string level;  ///< "LM", "Mixed", "5 neurons", "10 delays"
  std::size_t n_cells = 0;
  double avg_total_epochs = kMissing;
  double avg_best_epochs = kMissing;
  double avg_test_mse = kMissing;
  double avg_runtime_seconds = kMissing;
};

/// Mean of the cell averages per company and level, over cells with at least
/// one successful repeat.
std::vector<MarginalRow> marginals(const GridReport& report, Dimension dim);

struct ReportOptions {
  /// Wall-clock columns are written as "NA" unless set, keeping files
  /// byte-identical between runs.
  bool include_timing = false;
};

void write_grid_results(const std::filesystem::path& path, const GridReport& report, const ReportOptions& opt);
void write_marginals(const std::filesystem::path& path, Dimension dim, const std::vector<MarginalRow>& rows,
                     const ReportOptions& opt);
/// `date,target,prediction,error` for the best repeat; error = target - prediction.
void write_predictions(const std::filesystem::path& path, const RepeatRecord& run);
void write_training_curve(const std::filesystem::path& path, const TrainRecord& record);
/// One row per failed repeat: `cell,company,repeat,seed,error`.
void write_failures(const std::filesystem::path& path, const GridReport& report);

struct PcaAssessment {
  std::string company;
  ExperimentResult with_pca, without_pca;
};

/// Reruns each company's best cell with the raw features.
std::vector<PcaAssessment> assess_pca(const GridReport& report, const std::vector<CompanyBundle>& companies,
                                      std::size_t jobs);
void write_pca_assessment(const std::filesystem::path& path, const std::vector<PcaAssessment>& rows,
                          const ReportOptions& opt);

}  // namespace aerofc
