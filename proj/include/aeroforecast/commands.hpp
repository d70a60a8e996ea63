#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aeroforecast/config.hpp"

namespace aerofc {

struct CommandReport {
  std::vector<std::filesystem::path> files;  ///< in write order
  std::size_t failures = 0;                  ///< failed runs or steps
  std::vector<std::string> notes;            ///< short human-readable summary lines
};

/// <label>_prices.csv and <label>_fundamentals.csv per synthetic company, plus
/// synthetic.ini pointing a config at them.
CommandReport cmd_synth(const RunConfig& cfg);

/// technical.csv, fundamentals_daily.csv, aligned_summary.csv and
/// deleted_rows.csv for the selected company.
CommandReport cmd_features(const RunConfig& cfg);

/// pca_report.csv (all components of the configured feature set),
/// pca_scatter.csv (top pca.k scores per sample) and pca_variance_table.csv
/// (the three feature sets side by side).
CommandReport cmd_pca(const RunConfig& cfg);

/// Runs the configured cell on the selected company and keeps its best repeat:
/// model.txt, pca_mapping.csv (when PCA is on), training_curve.csv,
/// predictions.csv, train_summary.csv and failures.csv.
CommandReport cmd_train(const RunConfig& cfg);

/// grid_results.csv, marginals_<dimension>.csv, predictions_<cell>.csv,
/// best_cells.csv, pca_assessment.csv, failures.csv and grid_summary.csv.
CommandReport cmd_grid(const RunConfig& cfg, const ProgressFn& progress = {});

}  // namespace aerofc
