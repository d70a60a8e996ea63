#include "aeroforecast/indicators.hpp"

#include <algorithm>
#include <cmath>

#include "aeroforecast/error.hpp"

namespace aerofc {

namespace {

void require_length(std::size_t have, std::size_t need, const char* what) {
  if (have < need)
    fail(ErrorCode::invalid_argument, std::string(what) + ": series of length " + std::to_string(have) +
                                          " is shorter than the required " + std::to_string(need));
}

Series closes_of(std::span<const PriceBar> bars) {
  Series c(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) c[i] = bars[i].close;
  return c;
}

/// Highest high and lowest low over the n bars ending at t.
std::pair<double, double> range_hl(std::span<const PriceBar> bars, std::size_t t, std::size_t n) {
  double hi = bars[t].high, lo = bars[t].low;
  for (std::size_t i = t + 1 - n; i < t; ++i) {
    hi = std::max(hi, bars[i].high);
    lo = std::min(lo, bars[i].low);
  }
  return {hi, lo};
}

}  // namespace

void IndicatorConfig::validate() const {
  for (auto w : {sma_window, bb_window, cci_window, roc_lag, rsi_window, dmi_window, macd_fast, macd_slow,
                 macd_signal, stoch_window, stoch_d, wr_window})
    require(w >= 1, "indicator windows must be >= 1");
  require(macd_fast < macd_slow, "macd_fast must be smaller than macd_slow");
  require(bb_k > 0.0 && cci_scale > 0.0, "bb_k and cci_scale must be positive");
}

std::size_t IndicatorConfig::min_length() const {
  return std::max({sma_window, bb_window, cci_window, roc_lag + 1, rsi_window + 1, 2 * dmi_window,
                   macd_slow + macd_signal, stoch_window + stoch_d, wr_window});
}

Series sma(std::span<const double> x, std::size_t n) {
  require(n >= 1, "window must be >= 1");
  Series out(x.size(), kMissing);
  for (std::size_t t = n - 1; t < x.size(); ++t) {
    double sum = 0.0;
    bool ok = true;
    for (std::size_t i = t + 1 - n; i <= t; ++i) {
      if (is_missing(x[i])) {
        ok = false;
        break;
      }
      sum += x[i];
    }
    if (ok) out[t] = sum / static_cast<double>(n);
  }
  return out;
}

namespace {

/// Shared driver for EMA and Wilder smoothing: seed with the mean of the first
/// n defined values, then s += alpha * (x - s) on every defined value.
Series seeded_recursive(std::span<const double> x, std::size_t n, double alpha) {
  require(n >= 1, "window must be >= 1");
  Series out(x.size(), kMissing);
  std::size_t seen = 0;
  double acc = 0.0;
  double state = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (is_missing(x[t])) continue;
    if (seen < n) {
      acc += x[t];
      if (++seen == n) {
        state = acc / static_cast<double>(n);
        out[t] = state;
      }
      continue;
    }
    state += alpha * (x[t] - state);
    out[t] = state;
  }
  return out;
}

}  // namespace

Series ema(std::span<const double> x, std::size_t n) {
  return seeded_recursive(x, n, 2.0 / (static_cast<double>(n) + 1.0));
}

Series wilder(std::span<const double> x, std::size_t n) {
  return seeded_recursive(x, n, 1.0 / static_cast<double>(n));
}

MovingAverages moving_averages(std::span<const double> closes, const IndicatorConfig& cfg) {
  require_length(closes.size(), std::max(cfg.macd_slow, cfg.sma_window), "moving_averages");
  return {sma(closes, cfg.sma_window), ema(closes, cfg.macd_fast), ema(closes, cfg.macd_slow)};
}

BollingerFeatures bollinger_features(std::span<const double> closes, const IndicatorConfig& cfg) {
  const std::size_t n = cfg.bb_window;
  require_length(closes.size(), n, "bollinger_features");
  BollingerFeatures out{Series(closes.size(), kMissing), Series(closes.size(), kMissing)};
  auto mid = sma(closes, n);
  for (std::size_t t = n - 1; t < closes.size(); ++t) {
    if (is_missing(mid[t])) continue;
    double ss = 0.0;
    for (std::size_t i = t + 1 - n; i <= t; ++i) ss += (closes[i] - mid[t]) * (closes[i] - mid[t]);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    const double upper = mid[t] + cfg.bb_k * sd;
    const double lower = mid[t] - cfg.bb_k * sd;
    if (mid[t] != 0.0) out.width[t] = 100.0 * (upper - lower) / mid[t];
    if (upper != lower) out.percent_b[t] = (closes[t] - lower) / (upper - lower);
  }
  return out;
}

Series cci(std::span<const PriceBar> bars, const IndicatorConfig& cfg) {
  const std::size_t n = cfg.cci_window;
  require_length(bars.size(), n, "cci");
  auto closes = closes_of(bars);
  auto avg = sma(closes, n);
  Series out(bars.size(), kMissing);
  for (std::size_t t = n - 1; t < bars.size(); ++t) {
    const double tp = (bars[t].high + bars[t].low + bars[t].close) / 3.0;
    double den;
    if (cfg.cci_mode == CciMode::standard) {
      double mad = 0.0;
      for (std::size_t i = t + 1 - n; i <= t; ++i) mad += std::abs(closes[i] - avg[t]);
      den = cfg.cci_scale * mad / static_cast<double>(n);
    } else {
      den = avg[t] - closes[t] * cfg.cci_scale;
    }
    if (den != 0.0) out[t] = (tp - avg[t]) / den;
  }
  return out;
}

Series roc(std::span<const double> closes, const IndicatorConfig& cfg) {
  const std::size_t lag = cfg.roc_lag;
  require_length(closes.size(), lag + 1, "roc");
  Series out(closes.size(), kMissing);
  for (std::size_t t = lag; t < closes.size(); ++t) {
    const double prev = closes[t - lag];
    if (prev != 0.0) out[t] = (closes[t] - prev) / prev;
  }
  return out;
}

Series rsi(std::span<const double> closes, const IndicatorConfig& cfg) {
  const std::size_t n = cfg.rsi_window;
  require_length(closes.size(), n + 1, "rsi");
  Series up(closes.size(), kMissing), down(closes.size(), kMissing);
  for (std::size_t t = 1; t < closes.size(); ++t) {
    const double d = closes[t] - closes[t - 1];
    up[t] = std::max(d, 0.0);
    down[t] = std::max(-d, 0.0);
  }
  auto su = wilder(up, n);
  auto sd = wilder(down, n);
  Series out(closes.size(), kMissing);
  for (std::size_t t = 0; t < closes.size(); ++t) {
    if (is_missing(su[t]) || is_missing(sd[t])) continue;
    if (sd[t] == 0.0)
      out[t] = su[t] == 0.0 ? 50.0 : 100.0;
    else
      out[t] = 100.0 - 100.0 / (1.0 + su[t] / sd[t]);
  }
  return out;
}

DmiFeatures dmi_adx(std::span<const PriceBar> bars, const IndicatorConfig& cfg) {
  const std::size_t n = cfg.dmi_window;
  require_length(bars.size(), 2 * n, "dmi_adx");
  const std::size_t len = bars.size();
  Series plus_dm(len, kMissing), minus_dm(len, kMissing), tr(len, kMissing);
  for (std::size_t t = 1; t < len; ++t) {
    const double up = bars[t].high - bars[t - 1].high;
    const double down = bars[t - 1].low - bars[t].low;
    plus_dm[t] = (up > down && up > 0.0) ? up : 0.0;
    minus_dm[t] = (down > up && down > 0.0) ? down : 0.0;
    const double pc = bars[t - 1].close;
    tr[t] = std::max({bars[t].high - bars[t].low, std::abs(bars[t].high - pc), std::abs(bars[t].low - pc)});
  }
  auto s_plus = wilder(plus_dm, n);
  auto s_minus = wilder(minus_dm, n);
  auto s_tr = wilder(tr, n);

  DmiFeatures out{Series(len, kMissing), Series(len, kMissing), {}};
  Series dx(len, kMissing);
  for (std::size_t t = 0; t < len; ++t) {
    if (is_missing(s_tr[t]) || s_tr[t] == 0.0) continue;
    const double p = 100.0 * s_plus[t] / s_tr[t];
    const double m = 100.0 * s_minus[t] / s_tr[t];
    out.plus_dmi[t] = p;
    out.minus_dmi[t] = m;
    if (p + m != 0.0) dx[t] = 100.0 * std::abs(p - m) / (p + m);
  }
  out.adx = wilder(dx, n);
  return out;
}

MacdFeatures macd_features(std::span<const double> closes, const IndicatorConfig& cfg) {
  require_length(closes.size(), cfg.macd_slow + cfg.macd_signal, "macd_features");
  auto fast = ema(closes, cfg.macd_fast);
  auto slow = ema(closes, cfg.macd_slow);
  MacdFeatures out{Series(closes.size(), kMissing), {}};
  for (std::size_t t = 0; t < closes.size(); ++t)
    if (!is_missing(fast[t]) && !is_missing(slow[t])) out.line[t] = fast[t] - slow[t];
  out.signal = ema(out.line, cfg.macd_signal);
  return out;
}

StochasticFeatures stochastic_kd(std::span<const PriceBar> bars, const IndicatorConfig& cfg) {
  const std::size_t n = cfg.stoch_window;
  require_length(bars.size(), n + cfg.stoch_d, "stochastic_kd");
  StochasticFeatures out{Series(bars.size(), kMissing), {}};
  for (std::size_t t = n - 1; t < bars.size(); ++t) {
    auto [hi, lo] = range_hl(bars, t, n);
    if (hi != lo) out.k[t] = 100.0 * (bars[t].close - lo) / (hi - lo);
  }
  out.d = sma(out.k, cfg.stoch_d);
  return out;
}

Series williams_r(std::span<const PriceBar> bars, const IndicatorConfig& cfg) {
  const std::size_t n = cfg.wr_window;
  require_length(bars.size(), n, "williams_r");
  Series out(bars.size(), kMissing);
  for (std::size_t t = n - 1; t < bars.size(); ++t) {
    auto [hi, lo] = range_hl(bars, t, n);
    if (hi != lo) out[t] = 100.0 * (hi - bars[t].close) / (hi - lo);
  }
  return out;
}

FeatureMatrix compute_technical_matrix(std::span<const PriceBar> bars, const IndicatorConfig& cfg) {
  cfg.validate();
  require_length(bars.size(), cfg.min_length(), "compute_technical_matrix");
  auto closes = closes_of(bars);
  Series volume(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) volume[i] = bars[i].volume;

  auto ma = moving_averages(closes, cfg);
  auto bb = bollinger_features(closes, cfg);
  auto dmi = dmi_adx(bars, cfg);
  auto macd = macd_features(closes, cfg);
  auto kd = stochastic_kd(bars, cfg);
  const std::array<Series, 15> cols = {
      volume,        bb.width,       bb.percent_b, cci(bars, cfg), roc(closes, cfg),
      rsi(closes, cfg), dmi.plus_dmi, dmi.minus_dmi, dmi.adx,      ma.sma,
      macd.line,     macd.signal,    kd.k,         kd.d,           williams_r(bars, cfg),
  };

  FeatureMatrix m;
  m.names.assign(kTechnicalColumns.begin(), kTechnicalColumns.end());
  m.dates.reserve(bars.size());
  for (const auto& b : bars) m.dates.push_back(b.date);
  m.values.resize(static_cast<Eigen::Index>(bars.size()), 15);
  for (Eigen::Index j = 0; j < 15; ++j)
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) m.values(i, j) = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
  return m;
}

}  // namespace aerofc
