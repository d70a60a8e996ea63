#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace aerofc {

// ---------------------------------------------------------------------------
// Missing values
// ---------------------------------------------------------------------------

/// Missing observations are stored as quiet NaN throughout the pipeline.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

using Series = std::vector<double>;

// ---------------------------------------------------------------------------
// Calendar dates
// ---------------------------------------------------------------------------

using Date = std::chrono::sys_days;

/// Parses an ISO-8601 calendar date (YYYY-MM-DD). Throws Error(parse).
Date parse_date(std::string_view text);
std::string format_date(Date d);
Date make_date(int year, unsigned month, unsigned day);

inline long days_between(Date from, Date to) noexcept { return (to - from).count(); }

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest decimal representation that round-trips to the same double.
/// Missing values format as the empty string.
std::string format_number(double v);
std::string format_fixed(double v, int decimals);
/// Throws Error(parse) unless the whole field is a number.
double parse_number(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);
std::string_view trim(std::string_view s) noexcept;

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// Seeded generator with distribution code kept local so streams are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() noexcept { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a parent seed and a stable label.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept;

}  // namespace aerofc
