#pragma once

#include <array>
#include <span>
#include <string_view>

#include "aeroforecast/common.hpp"
#include "aeroforecast/market_data.hpp"

namespace aerofc {

enum class CciMode {
  standard,       ///< (TP - SMA) / (0.015 * mean absolute deviation)
  printed,        ///< (TP - SMA) / (SMA - close * 0.015)
};

struct IndicatorConfig {
  std::size_t sma_window = 5;
  std::size_t bb_window = 20;
  double bb_k = 2.0;
  std::size_t cci_window = 13;
  double cci_scale = 0.015;
  std::size_t roc_lag = 1;
  std::size_t rsi_window = 14;
  std::size_t dmi_window = 14;
  std::size_t macd_fast = 12;
  std::size_t macd_slow = 26;
  std::size_t macd_signal = 9;
  std::size_t stoch_window = 9;
  std::size_t stoch_d = 3;
  std::size_t wr_window = 14;
  CciMode cci_mode = CciMode::standard;

  void validate() const;
  /// Shortest series accepted by compute_technical_matrix.
  std::size_t min_length() const;
};

inline constexpr std::array<std::string_view, 15> kTechnicalColumns = {
    "Volume", "BBWidth",  "PercentB",   "CCI",      "ROC",      "RSI",      "PlusDMI", "MinusDMI",
    "ADX",    "SMA",      "MACDLine",   "MACDSignal", "PercentK", "PercentD", "WR",
};

// All series below are aligned with their input; positions where an indicator
// is undefined (warm-up, zero denominators) hold kMissing.

Series sma(std::span<const double> x, std::size_t n);
/// Multiplier 2/(n+1), seeded by the SMA of the first n defined values.
Series ema(std::span<const double> x, std::size_t n);
/// Recursive average with weight 1/n, seeded by the mean of the first n
/// defined values. A missing input yields a missing output and leaves the
/// state untouched.
Series wilder(std::span<const double> x, std::size_t n);

struct MovingAverages {
  Series sma, ema_fast, ema_slow;
};
MovingAverages moving_averages(std::span<const double> closes, const IndicatorConfig& cfg);

struct BollingerFeatures {
  Series width, percent_b;
};
BollingerFeatures bollinger_features(std::span<const double> closes, const IndicatorConfig& cfg);

Series cci(std::span<const PriceBar> bars, const IndicatorConfig& cfg);
Series roc(std::span<const double> closes, const IndicatorConfig& cfg);
Series rsi(std::span<const double> closes, const IndicatorConfig& cfg);

struct DmiFeatures {
  Series plus_dmi, minus_dmi, adx;
};
DmiFeatures dmi_adx(std::span<const PriceBar> bars, const IndicatorConfig& cfg);

struct MacdFeatures {
  Series line, signal;
};
MacdFeatures macd_features(std::span<const double> closes, const IndicatorConfig& cfg);

struct StochasticFeatures {
  Series k, d;
};
StochasticFeatures stochastic_kd(std::span<const PriceBar> bars, const IndicatorConfig& cfg);

Series williams_r(std::span<const PriceBar> bars, const IndicatorConfig& cfg);

/// The fifteen technical columns in kTechnicalColumns order.
FeatureMatrix compute_technical_matrix(std::span<const PriceBar> bars, const IndicatorConfig& cfg);

}  // namespace aerofc
