#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aeroforecast/experiments.hpp"
#include "aeroforecast/indicators.hpp"
#include "aeroforecast/market_data.hpp"

namespace aerofc {

/// One company's input files. Empty paths mean the company is generated from
/// the [synthetic] settings.
struct CompanySource {
  std::string label;
  std::filesystem::path prices;
  std::filesystem::path fundamentals;
};

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr const char* kSeedEnv = "AEROFORECAST_SEED";

struct RunConfig {
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  /// Company used by features, pca and train; empty selects the first one.
  std::string company;
  /// Empty runs the synthetic demo over `synthetic_labels`.
  std::vector<CompanySource> companies;
  std::vector<std::string> synthetic_labels = {"SYN_A", "SYN_B"};
  SyntheticSpec synthetic;

  IndicatorConfig indicators;

  std::size_t pca_k = 3;
  ScaleMode pca_scale = ScaleMode::center_only;
  PcaScope pca_scope = PcaScope::full_series;

  FeatureSet feature_set = FeatureSet::mixed;
  Algorithm algorithm = Algorithm::lm;
  std::size_t neurons = 10;
  std::size_t delay = 5;
  std::size_t train_repeats = 1;
  SplitMode split = SplitMode::random;
  bool scale_data = true;
  TrainConfig train;

  std::vector<Algorithm> grid_algorithms = {Algorithm::lm, Algorithm::br, Algorithm::scg};
  std::vector<FeatureSet> grid_feature_sets = {FeatureSet::fundamental, FeatureSet::technical, FeatureSet::mixed};
  std::vector<std::size_t> grid_neurons = {5, 10, 15, 20};
  std::vector<std::size_t> grid_delays = {5, 10, 15};
  std::size_t grid_repeats = 10;
  bool pca_assessment = true;

  std::size_t jobs = 0;  ///< 0 = hardware concurrency
  bool include_timing = false;

  /// Explicit seed, else $AEROFORECAST_SEED, else 42.
  std::uint64_t effective_seed() const;
  void validate() const;

  /// Cell template shared by train and grid.
  ExperimentSpec cell_template() const;
  GridConfig grid_config() const;
};

/// `key` is "section.name", e.g. "train.max_epochs" or "company.MFG.prices".
/// Unknown keys and malformed values throw Error(parse).
void set_option(RunConfig& cfg, std::string_view key, std::string_view value);

/// INI file with sections [run] [indicators] [pca] [train] [grid] [synthetic]
/// and one [company.<label>] per input company. Relative company paths are
/// resolved against the config file's directory.
RunConfig load_config(const std::filesystem::path& path);

struct CompanyInputs {
  std::string label;
  std::vector<PriceBar> bars;
  FundamentalsTable fundamentals;
};

/// Synthetic series for `label`, seeded from the run seed and the label.
SyntheticData synthetic_company(const RunConfig& cfg, const std::string& label);

/// Loads (or generates) every configured company, in configuration order.
std::vector<CompanyInputs> load_inputs(const RunConfig& cfg);
/// The company named by cfg.company, or the first one.
CompanyInputs select_input(const RunConfig& cfg);

AlignedDataset align_company(const CompanyInputs& in, const IndicatorConfig& indicators);
std::vector<CompanyBundle> load_companies(const RunConfig& cfg);

}  // namespace aerofc
