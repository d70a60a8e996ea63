#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aeroforecast/common.hpp"

namespace aerofc {

/// One trading day of OHLCV data.
struct PriceBar {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  bool operator==(const PriceBar&) const = default;
};

/// Statement line items (or precomputed ratios) reported at a quarter end.
/// Absent keys are missing values.
struct QuarterlyReport {
  Date quarter_end;
  std::map<std::string, double> values;

  bool operator==(const QuarterlyReport&) const = default;
};

enum class FundamentalsKind { statements, ratios };

struct FundamentalsTable {
  FundamentalsKind kind = FundamentalsKind::statements;
  std::vector<std::string> columns;
  std::vector<QuarterlyReport> reports;
};

/// Date-indexed matrix with named columns; NaN marks a missing value.
struct FeatureMatrix {
  std::vector<Date> dates;
  std::vector<std::string> names;
  Eigen::MatrixXd values;

  std::size_t rows() const { return dates.size(); }
  std::size_t cols() const { return names.size(); }
};

enum class FeatureSet { fundamental, technical, mixed };

/// Cleaned, gap-free features and close-price target on a shared calendar.
/// Technical columns come first, followed by fundamental columns.
struct AlignedDataset {
  std::vector<Date> dates;
  Eigen::MatrixXd features;
  std::vector<std::string> feature_names;
  std::size_t n_technical = 0;
  std::vector<double> target;
  /// Trading days dropped by the deletion rule, in calendar order.
  std::vector<Date> deleted_dates;

  std::size_t rows() const { return dates.size(); }
  Eigen::MatrixXd select(FeatureSet set) const;
  std::vector<std::string> names(FeatureSet set) const;
};

void validate_bars(std::span<const PriceBar> bars);

std::vector<PriceBar> load_prices(const std::filesystem::path& path);
void write_prices(const std::filesystem::path& path, std::span<const PriceBar> bars);

/// Column names must all belong to either the statement-field registry or the
/// ratio registry (see fundamentals.hpp). Empty cells are missing values.
FundamentalsTable load_fundamentals(const std::filesystem::path& path);
void write_fundamentals(const std::filesystem::path& path, const FundamentalsTable& table);

/// Removes every trading day on which any technical or fundamental value is
/// missing, from features and target alike. Surviving rows keep their order.
AlignedDataset clean_and_align(std::span<const PriceBar> bars, const FeatureMatrix& technical,
                               const FeatureMatrix& fundamental_daily);

struct QuarterlyPattern {
  double growth_per_quarter = 0.01;
  double seasonal_amplitude = 0.05;
  double noise = 0.02;
};

struct SyntheticSpec {
  std::uint64_t seed = 42;
  std::size_t n_days = 1260;
  double drift = 2e-4;        ///< per-day log drift
  double volatility = 0.015;  ///< per-day log volatility
  /// Optional deterministic cycle added to the log price path.
  double cycle_amplitude = 0.0;
  double cycle_period_days = 250.0;
  double start_price = 100.0;
  double base_volume = 1.0e6;
  /// Log-normal noise on volume; volume also tracks the price level.
  double volume_noise = 0.25;
  Date start = make_date(2013, 7, 1);
  QuarterlyPattern quarterly;
};

struct SyntheticData {
  std::vector<PriceBar> bars;
  std::vector<QuarterlyReport> reports;
};

/// Weekday calendar, geometric random walk closes, one statement report per
/// 91 calendar days starting a year before the first trading day so that
/// year-over-year growth is defined across the whole price history.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace aerofc
