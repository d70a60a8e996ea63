#include "aeroforecast/fundamentals.hpp"

#include <algorithm>

#include "aeroforecast/error.hpp"

namespace aerofc {

namespace {

double field(const QuarterlyReport& r, std::string_view name) {
  auto it = r.values.find(std::string(name));
  return it == r.values.end() ? kMissing : it->second;
}

/// Missing when either operand is missing or the denominator is zero.
double ratio(double num, double den) {
  if (is_missing(num) || is_missing(den) || den == 0.0) return kMissing;
  return num / den;
}

}  // namespace

bool is_statement_field(std::string_view name) noexcept {
  return std::find(kStatementFields.begin(), kStatementFields.end(), name) != kStatementFields.end();
}

bool is_ratio_name(std::string_view name) noexcept {
  return std::find(kRatioNames.begin(), kRatioNames.end(), name) != kRatioNames.end();
}

std::array<double, kRatioCount> FundamentalRatios::values() const {
  return {roic,           operating_margin,  roa,         revenue_growth, total_assets_growth,
          total_debt_growth, debt_to_assets, equity_ratio, ar_turnover,   quick_ratio,
          current_ratio,  eps,               pe_ratio};
}

FundamentalRatios compute_ratios(const QuarterlyReport& current, const QuarterlyReport* year_ago,
                                 double market_price) {
  auto f = [&](std::string_view n) { return field(current, n); };
  FundamentalRatios r;
  r.quarter_end = current.quarter_end;

  r.roic = ratio(f("ebit") * (1.0 - f("tax_rate")),
                 f("interest_bearing_liabilities") + f("equity") - f("cash_equivalents"));
  // Printed with a "x 100%" factor, unlike its siblings.
  r.operating_margin = ratio(f("operating_profit"), f("operating_income")) * 100.0;
  r.roa = ratio(f("net_income"), f("total_assets"));
  if (year_ago != nullptr) {
    auto g = [&](std::string_view n) { return field(current, n) - field(*year_ago, n); };
    r.revenue_growth = g("revenue");
    r.total_assets_growth = g("total_assets");
    r.total_debt_growth = g("total_debt");
  }
  r.debt_to_assets = ratio(f("total_debt"), f("total_assets"));
  r.equity_ratio = ratio(f("equity"), f("total_assets"));
  r.ar_turnover = ratio(f("sales_net_income"), 0.5 * (f("ar_balance_begin") + f("ar_balance_end")));
  r.quick_ratio = ratio(f("current_assets") - f("inventory"), f("current_liabilities"));
  r.current_ratio = ratio(f("current_assets"), f("current_liabilities"));
  r.eps = ratio(f("gross_profit") - f("preferred_dividends"), f("total_equity_shares"));
  r.pe_ratio = ratio(market_price, r.eps);

  auto all = r.values();
  if (std::all_of(all.begin(), all.end(), [](double v) { return is_missing(v); }))
    fail(ErrorCode::data, "no fundamental ratio computable for quarter " + format_date(current.quarter_end));
  return r;
}

const QuarterlyReport* find_year_ago(std::span<const QuarterlyReport> reports, std::size_t index) {
  const QuarterlyReport* found = nullptr;
  for (std::size_t j = 0; j < index; ++j) {
    auto gap = days_between(reports[j].quarter_end, reports[index].quarter_end);
    if (gap >= 350 && gap <= 380) found = &reports[j];
  }
  return found;
}

FeatureMatrix interpolate_quarterly_to_daily(std::span<const QuarterKnot> quarters,
                                             std::span<const Date> trading_days,
                                             std::vector<std::string> names) {
  require(quarters.size() >= 2, "interpolation needs at least two quarters");
  const std::size_t n_feat = names.size();
  for (std::size_t i = 0; i < quarters.size(); ++i) {
    require(quarters[i].values.size() == n_feat, "quarter value vector does not match feature names");
    if (i > 0) require(quarters[i].date > quarters[i - 1].date, "quarter dates must be strictly increasing");
  }

  FeatureMatrix out;
  out.names = std::move(names);
  out.dates.assign(trading_days.begin(), trading_days.end());
  out.values.resize(static_cast<Eigen::Index>(trading_days.size()), static_cast<Eigen::Index>(n_feat));

  std::vector<std::string> outside;
  std::size_t seg = 0;  // quarters[seg] < t <= quarters[seg + 1]
  for (std::size_t d = 0; d < trading_days.size(); ++d) {
    const Date t = trading_days[d];
    if (d > 0) require(t > trading_days[d - 1], "trading days must be sorted");
    if (t < quarters.front().date || t > quarters.back().date) {
      outside.push_back(format_date(t));
      continue;
    }
    const auto row = static_cast<Eigen::Index>(d);
    if (t == quarters.front().date) {
      for (std::size_t j = 0; j < n_feat; ++j) out.values(row, static_cast<Eigen::Index>(j)) = quarters[0].values[j];
      continue;
    }
    while (quarters[seg + 1].date < t) ++seg;
    const auto& lo = quarters[seg];
    const auto& hi = quarters[seg + 1];
    const bool at_knot = t == hi.date;
    const double frac =
        static_cast<double>(days_between(lo.date, t)) / static_cast<double>(days_between(lo.date, hi.date));
    for (std::size_t j = 0; j < n_feat; ++j) {
      const double v = at_knot ? hi.values[j] : lo.values[j] + (hi.values[j] - lo.values[j]) * frac;
      out.values(row, static_cast<Eigen::Index>(j)) = v;
    }
  }
  if (!outside.empty()) {
    std::string list;
    for (std::size_t i = 0; i < outside.size() && i < 10; ++i) list += (i ? ", " : "") + outside[i];
    if (outside.size() > 10) list += ", ...";
    fail(ErrorCode::data, std::to_string(outside.size()) + " trading day(s) outside the quarterly span: " + list);
  }
  return out;
}

FeatureMatrix daily_fundamentals(const FundamentalsTable& table, std::span<const PriceBar> bars) {
  require(!bars.empty(), "no price bars");
  std::vector<QuarterKnot> knots;
  std::vector<std::string> names;
  std::span<const QuarterlyReport> reports = table.reports;

  if (table.kind == FundamentalsKind::ratios) {
    names = table.columns;
    for (const auto& r : reports) {
      QuarterKnot k{r.quarter_end, {}};
      for (const auto& c : names) k.values.push_back(field(r, c));
      knots.push_back(std::move(k));
    }
  } else {
    names.assign(kRatioNames.begin(), kRatioNames.end());
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const Date q = reports[i].quarter_end;
      auto after = std::upper_bound(bars.begin(), bars.end(), q,
                                    [](Date d, const PriceBar& b) { return d < b.date; });
      const double price = after == bars.begin() ? bars.front().close : std::prev(after)->close;
      auto ratios = compute_ratios(reports[i], find_year_ago(reports, i), price).values();
      knots.push_back({q, {ratios.begin(), ratios.end()}});
    }
  }

  std::vector<Date> days;
  days.reserve(bars.size());
  for (const auto& b : bars) days.push_back(b.date);
  return interpolate_quarterly_to_daily(knots, days, std::move(names));
}

}  // namespace aerofc
