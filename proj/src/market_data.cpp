#include "aeroforecast/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "aeroforecast/error.hpp"
#include "aeroforecast/fundamentals.hpp"

namespace aerofc {

namespace {

constexpr std::string_view kPriceHeader = "date,open,high,low,close,volume";

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.filename().string() + ":" + std::to_string(line) + ": ";
}

std::string bar_problem(const PriceBar& b) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(b.open) || !finite(b.high) || !finite(b.low) || !finite(b.close) || !finite(b.volume))
    return "non-finite value";
  if (b.low > b.high) return "high < low";
  if (b.open < b.low || b.open > b.high) return "open outside [low, high]";
  if (b.close < b.low || b.close > b.high) return "close outside [low, high]";
  if (b.volume < 0.0) return "negative volume";
  return {};
}

bool is_weekend(Date d) {
  std::chrono::weekday wd{d};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

}  // namespace

void validate_bars(std::span<const PriceBar> bars) {
  for (std::size_t i = 0; i < bars.size(); ++i) {
    if (auto p = bar_problem(bars[i]); !p.empty())
      fail(ErrorCode::data, "bar " + std::to_string(i) + " (" + format_date(bars[i].date) + "): " + p);
    if (i > 0 && bars[i].date <= bars[i - 1].date)
      fail(ErrorCode::data, "bar dates not strictly increasing at " + format_date(bars[i].date));
  }
}

std::vector<PriceBar> load_prices(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kPriceHeader)
    fail(ErrorCode::parse, where(path, 1) + "expected header '" + std::string(kPriceHeader) + "'");

  std::vector<std::pair<PriceBar, std::size_t>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 6)
      fail(ErrorCode::parse, where(path, line_no) + "expected 6 fields, got " + std::to_string(fields.size()));
    PriceBar bar;
    try {
      bar.date = parse_date(fields[0]);
      bar.open = parse_number(fields[1]);
      bar.high = parse_number(fields[2]);
      bar.low = parse_number(fields[3]);
      bar.close = parse_number(fields[4]);
      bar.volume = parse_number(fields[5]);
    } catch (const Error& e) {
      fail(ErrorCode::parse, where(path, line_no) + e.what());
    }
    if (auto p = bar_problem(bar); !p.empty()) fail(ErrorCode::data, where(path, line_no) + p);
    rows.emplace_back(bar, line_no);
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first.date < b.first.date; });
  std::vector<PriceBar> bars;
  bars.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].first.date == rows[i - 1].first.date)
      fail(ErrorCode::data, where(path, rows[i].second) + "duplicate date " + format_date(rows[i].first.date));
    bars.push_back(rows[i].first);
  }
  return bars;
}

void write_prices(const std::filesystem::path& path, std::span<const PriceBar> bars) {
  auto out = open_output(path);
  out << kPriceHeader << '\n';
  for (const auto& b : bars) {
    out << format_date(b.date) << ',' << format_number(b.open) << ',' << format_number(b.high) << ','
        << format_number(b.low) << ',' << format_number(b.close) << ',' << format_number(b.volume) << '\n';
  }
}

FundamentalsTable load_fundamentals(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::parse, where(path, 1) + "empty file");
  auto header = split_csv_line(line);
  if (header.empty() || trim(header[0]) != "quarter_end")
    fail(ErrorCode::parse, where(path, 1) + "first column must be quarter_end");

  FundamentalsTable table;
  for (std::size_t i = 1; i < header.size(); ++i) table.columns.emplace_back(trim(header[i]));
  if (table.columns.empty()) fail(ErrorCode::parse, where(path, 1) + "no value columns");
  bool all_statement = std::all_of(table.columns.begin(), table.columns.end(),
                                   [](const auto& c) { return is_statement_field(c); });
  bool all_ratio = std::all_of(table.columns.begin(), table.columns.end(),
                               [](const auto& c) { return is_ratio_name(c); });
  if (!all_statement && !all_ratio)
    fail(ErrorCode::parse, where(path, 1) + "columns must all be statement fields or all be ratio names");
  table.kind = all_statement ? FundamentalsKind::statements : FundamentalsKind::ratios;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      fail(ErrorCode::parse, where(path, line_no) + "expected " + std::to_string(header.size()) + " fields");
    QuarterlyReport r;
    try {
      r.quarter_end = parse_date(fields[0]);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (trim(fields[i]).empty()) continue;
        r.values[table.columns[i - 1]] = parse_number(fields[i]);
      }
    } catch (const Error& e) {
      fail(ErrorCode::parse, where(path, line_no) + e.what());
    }
    if (!table.reports.empty() && r.quarter_end <= table.reports.back().quarter_end)
      fail(ErrorCode::data, where(path, line_no) + "quarter_end dates must be strictly increasing");
    table.reports.push_back(std::move(r));
  }
  return table;
}

void write_fundamentals(const std::filesystem::path& path, const FundamentalsTable& table) {
  auto out = open_output(path);
  out << "quarter_end";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (const auto& r : table.reports) {
    out << format_date(r.quarter_end);
    for (const auto& c : table.columns) {
      out << ',';
      if (auto it = r.values.find(c); it != r.values.end()) out << format_number(it->second);
    }
    out << '\n';
  }
}

Eigen::MatrixXd AlignedDataset::select(FeatureSet set) const {
  const auto n_fund = static_cast<Eigen::Index>(features.cols()) - static_cast<Eigen::Index>(n_technical);
  switch (set) {
    case FeatureSet::technical:
      return features.leftCols(static_cast<Eigen::Index>(n_technical));
    case FeatureSet::fundamental:
      return features.rightCols(n_fund);
    case FeatureSet::mixed:
      return features;
  }
  return features;
}

std::vector<std::string> AlignedDataset::names(FeatureSet set) const {
  auto tech_end = feature_names.begin() + static_cast<std::ptrdiff_t>(n_technical);
  switch (set) {
    case FeatureSet::technical:
      return {feature_names.begin(), tech_end};
    case FeatureSet::fundamental:
      return {tech_end, feature_names.end()};
    case FeatureSet::mixed:
      return feature_names;
  }
  return feature_names;
}

AlignedDataset clean_and_align(std::span<const PriceBar> bars, const FeatureMatrix& technical,
                               const FeatureMatrix& fundamental_daily) {
  const std::size_t n = bars.size();
  auto check_calendar = [&](const FeatureMatrix& m, const char* what) {
    if (m.rows() != n || static_cast<std::size_t>(m.values.rows()) != n)
      fail(ErrorCode::data, std::string("calendar mismatch: ") + what + " has " + std::to_string(m.rows()) +
                                " rows, prices have " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
      if (m.dates[i] != bars[i].date)
        fail(ErrorCode::data, std::string("calendar mismatch: ") + what + " row " + std::to_string(i) + " is " +
                                  format_date(m.dates[i]) + ", prices have " + format_date(bars[i].date));
    if (static_cast<std::size_t>(m.values.cols()) != m.cols())
      fail(ErrorCode::data, std::string(what) + ": column count does not match names");
  };
  check_calendar(technical, "technical matrix");
  check_calendar(fundamental_daily, "fundamental matrix");

  std::vector<std::size_t> keep;
  AlignedDataset out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    bool complete = !technical.values.row(r).hasNaN() && !fundamental_daily.values.row(r).hasNaN() &&
                    std::isfinite(bars[i].close);
    if (complete)
      keep.push_back(i);
    else
      out.deleted_dates.push_back(bars[i].date);
  }
  if (keep.empty()) fail(ErrorCode::data, "no complete rows remain after cleaning");

  const auto n_tech = static_cast<Eigen::Index>(technical.cols());
  const auto n_fund = static_cast<Eigen::Index>(fundamental_daily.cols());
  out.features.resize(static_cast<Eigen::Index>(keep.size()), n_tech + n_fund);
  out.n_technical = technical.cols();
  out.feature_names = technical.names;
  out.feature_names.insert(out.feature_names.end(), fundamental_daily.names.begin(), fundamental_daily.names.end());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto src = static_cast<Eigen::Index>(keep[k]);
    const auto dst = static_cast<Eigen::Index>(k);
    out.features.row(dst).head(n_tech) = technical.values.row(src);
    out.features.row(dst).tail(n_fund) = fundamental_daily.values.row(src);
    out.dates.push_back(bars[keep[k]].date);
    out.target.push_back(bars[keep[k]].close);
  }
  return out;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  require(spec.n_days >= 60, "synthetic data needs at least 60 days");
  require(spec.volatility >= 0.0, "volatility must be non-negative");
  require(spec.start_price > 0.0, "start price must be positive");
  require(spec.cycle_period_days > 0.0, "cycle period must be positive");

  SyntheticData data;
  Rng rng(derive_seed(spec.seed, "synthetic/prices"));
  const double sigma = spec.volatility;
  const double two_pi = 2.0 * std::numbers::pi;

  Date day = spec.start;
  while (is_weekend(day)) day += std::chrono::days{1};

  double walk = 0.0;
  double prev_close = spec.start_price;
  data.bars.reserve(spec.n_days);
  for (std::size_t t = 0; t < spec.n_days; ++t) {
    const double z = rng.normal();
    const double z_hi = rng.normal();
    const double z_lo = rng.normal();
    const double z_vol = rng.normal();
    if (t > 0) walk += spec.drift - 0.5 * sigma * sigma + sigma * z;
    const double cycle = spec.cycle_amplitude * std::sin(two_pi * static_cast<double>(t) / spec.cycle_period_days);

    PriceBar b;
    b.date = day;
    b.close = spec.start_price * std::exp(walk + cycle);
    b.open = t == 0 ? b.close : prev_close;
    b.high = std::max(b.open, b.close) * std::exp(0.5 * sigma * std::abs(z_hi));
    b.low = std::min(b.open, b.close) * std::exp(-0.5 * sigma * std::abs(z_lo));
    const double vn = spec.volume_noise;
    b.volume = spec.base_volume * (b.close / spec.start_price) * std::exp(vn * z_vol - 0.5 * vn * vn);
    data.bars.push_back(b);

    prev_close = b.close;
    do {
      day += std::chrono::days{1};
    } while (is_weekend(day));
  }

  // Quarterly statements: a business-size index with growth, seasonality and
  // per-field multiplicative noise.
  Rng qrng(derive_seed(spec.seed, "synthetic/quarterly"));
  const auto& qp = spec.quarterly;
  const Date last = data.bars.back().date;
  Date q_end = data.bars.front().date - std::chrono::days{4 * 91};
  double ar_prev = kMissing;
  for (int q = 0;; ++q) {
    const double size = 1.0e9 * std::pow(1.0 + qp.growth_per_quarter, q) *
                        (1.0 + qp.seasonal_amplitude * std::sin(two_pi * q / 4.0));
    auto item = [&](double share) { return share * size * std::exp(qp.noise * qrng.normal()); };

    QuarterlyReport r;
    r.quarter_end = q_end;
    auto& v = r.values;
    v["revenue"] = item(1.0);
    v["sales_net_income"] = item(0.9);
    v["gross_profit"] = item(0.3);
    v["operating_income"] = item(0.95);
    v["operating_profit"] = item(0.12);
    v["ebit"] = item(0.1);
    v["net_income"] = item(0.07);
    v["total_assets"] = item(3.0);
    v["total_debt"] = item(0.8);
    v["equity"] = item(1.05);
    v["current_assets"] = item(1.2);
    v["inventory"] = item(0.4);
    v["current_liabilities"] = item(0.9);
    v["interest_bearing_liabilities"] = item(0.6);
    v["cash_equivalents"] = item(0.2);
    v["preferred_dividends"] = item(0.005);
    const double ar_end = item(0.25);
    v["ar_balance_begin"] = is_missing(ar_prev) ? ar_end : ar_prev;
    v["ar_balance_end"] = ar_end;
    ar_prev = ar_end;
    v["tax_rate"] = std::clamp(0.21 + 0.01 * qrng.normal(), 0.0, 0.5);
    v["total_equity_shares"] = 6.0e7 * std::exp(0.002 * qrng.normal());
    data.reports.push_back(std::move(r));

    if (q_end >= last) break;
    q_end += std::chrono::days{91};
  }
  return data;
}

}  // namespace aerofc
