#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "aeroforecast/common.hpp"
#include "aeroforecast/market_data.hpp"

namespace aerofc {

inline constexpr std::array<std::string_view, 20> kStatementFields = {
    "net_income",          "total_assets",
    "total_debt",          "equity",
    "current_assets",      "inventory",
    "current_liabilities", "revenue",
    "ebit",                "tax_rate",
    "interest_bearing_liabilities", "cash_equivalents",
    "operating_profit",    "operating_income",
    "sales_net_income",    "ar_balance_begin",
    "ar_balance_end",      "gross_profit",
    "preferred_dividends", "total_equity_shares",
};

inline constexpr std::size_t kRatioCount = 13;

inline constexpr std::array<std::string_view, kRatioCount> kRatioNames = {
    "roic",           "operating_margin", "roa",          "revenue_growth", "total_assets_growth",
    "total_debt_growth", "debt_to_assets", "equity_ratio", "ar_turnover",    "quick_ratio",
    "current_ratio",  "eps",              "pe_ratio",
};

bool is_statement_field(std::string_view name) noexcept;
bool is_ratio_name(std::string_view name) noexcept;

/// The thirteen ratios of one quarter; NaN where inputs were absent or a
/// denominator was zero.
struct FundamentalRatios {
  Date quarter_end;
  double roic = kMissing;
  double operating_margin = kMissing;  ///< percent
  double roa = kMissing;
  double revenue_growth = kMissing;
  double total_assets_growth = kMissing;
  double total_debt_growth = kMissing;
  double debt_to_assets = kMissing;
  double equity_ratio = kMissing;
  double ar_turnover = kMissing;
  double quick_ratio = kMissing;
  double current_ratio = kMissing;
  double eps = kMissing;
  double pe_ratio = kMissing;

  /// Values in kRatioNames order.
  std::array<double, kRatioCount> values() const;
};

/// `year_ago` may be null, in which case the three growth ratios are missing.
/// Throws Error(data) when every ratio comes out missing.
FundamentalRatios compute_ratios(const QuarterlyReport& current, const QuarterlyReport* year_ago,
                                 double market_price);

/// Same-quarter report of the prior year: the latest report whose quarter end
/// lies 350..380 calendar days before reports[index]. Null if none.
const QuarterlyReport* find_year_ago(std::span<const QuarterlyReport> reports, std::size_t index);

struct QuarterKnot {
  Date date;
  std::vector<double> values;
};

/// Piecewise-linear upsampling in calendar time. Each trading day t with
/// q_i < t <= q_{i+1} receives v_i + (v_{i+1} - v_i) * (t - q_i) / (q_{i+1} - q_i),
/// per feature; quarter-end days receive the quarterly value exactly.
FeatureMatrix interpolate_quarterly_to_daily(std::span<const QuarterKnot> quarters,
                                             std::span<const Date> trading_days,
                                             std::vector<std::string> names);

/// Ratio computation (for statement tables) followed by daily interpolation
/// onto the bar calendar. Market price for P/E is the last close on or before
/// the quarter end, or the first close when the quarter predates the series.
FeatureMatrix daily_fundamentals(const FundamentalsTable& table, std::span<const PriceBar> bars);

}  // namespace aerofc
