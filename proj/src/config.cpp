#include "aeroforecast/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>

#include "aeroforecast/error.hpp"
#include "aeroforecast/fundamentals.hpp"

namespace aerofc {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  fail(ErrorCode::parse, std::string(key) + ": '" + std::string(value) + "' is not " + std::string(expected));
}

std::uint64_t to_u64(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || p != text.data() + text.size()) bad_value(key, text, "an unsigned integer");
  return v;
}

std::size_t to_size(std::string_view key, std::string_view text) { return static_cast<std::size_t>(to_u64(key, text)); }

double to_double(std::string_view key, std::string_view text) {
  try {
    return parse_number(trim(text));
  } catch (const Error&) {
    bad_value(key, text, "a number");
  }
}

bool to_bool(std::string_view key, std::string_view text) {
  std::string t(trim(text));
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  bad_value(key, text, "a boolean");
}

std::vector<std::string> to_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto item = trim(text.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

template <class T, class F>
std::vector<T> map_list(std::string_view key, std::string_view text, F&& parse_one) {
  std::vector<T> out;
  for (const auto& item : to_list(text)) {
    try {
      out.push_back(parse_one(item));
    } catch (const Error&) {
      bad_value(key, item, "a valid list entry");
    }
  }
  if (out.empty()) bad_value(key, text, "a non-empty list");
  return out;
}

template <class F>
auto parsed(std::string_view key, std::string_view value, F&& parse_one) {
  try {
    return parse_one(trim(value));
  } catch (const Error&) {
    bad_value(key, value, "a recognised option");
  }
}

CciMode parse_cci_mode(std::string_view name) {
  if (name == "standard") return CciMode::standard;
  if (name == "printed" || name == "literal") return CciMode::printed;
  fail(ErrorCode::parse, "unknown CCI mode");
}

JacobianRoute parse_jacobian(std::string_view name) {
  if (name == "forward") return JacobianRoute::forward;
  if (name == "bptt") return JacobianRoute::bptt;
  fail(ErrorCode::parse, "unknown Jacobian route");
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

#define SIZE_FIELD(member) [](RunConfig& c, std::string_view k, std::string_view v) { c.member = to_size(k, v); }
#define REAL_FIELD(member) [](RunConfig& c, std::string_view k, std::string_view v) { c.member = to_double(k, v); }
#define BOOL_FIELD(member) [](RunConfig& c, std::string_view k, std::string_view v) { c.member = to_bool(k, v); }

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"run.out", [](RunConfig& c, std::string_view, std::string_view v) { c.out_dir = std::string(trim(v)); }},
      {"run.seed", [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = to_u64(k, v); }},
      {"run.company", [](RunConfig& c, std::string_view, std::string_view v) { c.company = std::string(trim(v)); }},
      {"run.jobs", SIZE_FIELD(jobs)},
      {"run.timing", BOOL_FIELD(include_timing)},

      {"indicators.sma_window", SIZE_FIELD(indicators.sma_window)},
      {"indicators.bb_window", SIZE_FIELD(indicators.bb_window)},
      {"indicators.bb_k", REAL_FIELD(indicators.bb_k)},
      {"indicators.cci_window", SIZE_FIELD(indicators.cci_window)},
      {"indicators.cci_scale", REAL_FIELD(indicators.cci_scale)},
      {"indicators.cci_mode",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.indicators.cci_mode = parsed(k, v, parse_cci_mode); }},
      {"indicators.roc_lag", SIZE_FIELD(indicators.roc_lag)},
      {"indicators.rsi_window", SIZE_FIELD(indicators.rsi_window)},
      {"indicators.dmi_window", SIZE_FIELD(indicators.dmi_window)},
      {"indicators.macd_fast", SIZE_FIELD(indicators.macd_fast)},
      {"indicators.macd_slow", SIZE_FIELD(indicators.macd_slow)},
      {"indicators.macd_signal", SIZE_FIELD(indicators.macd_signal)},
      {"indicators.stoch_window", SIZE_FIELD(indicators.stoch_window)},
      {"indicators.stoch_d", SIZE_FIELD(indicators.stoch_d)},
      {"indicators.wr_window", SIZE_FIELD(indicators.wr_window)},

      {"pca.k", SIZE_FIELD(pca_k)},
      {"pca.scale",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.pca_scale = parsed(k, v, parse_scale_mode); }},
      {"pca.scope",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.pca_scope = parsed(k, v, parse_pca_scope); }},

      {"train.algorithm",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.algorithm = parsed(k, v, parse_algorithm); }},
      {"train.feature_set",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.feature_set = parsed(k, v, parse_feature_set); }},
      {"train.neurons", SIZE_FIELD(neurons)},
      {"train.delay", SIZE_FIELD(delay)},
      {"train.repeats", SIZE_FIELD(train_repeats)},
      {"train.split",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.split = parsed(k, v, parse_split_mode); }},
      {"train.scale_data", BOOL_FIELD(scale_data)},
      {"train.max_epochs", SIZE_FIELD(train.max_epochs)},
      {"train.grad_tol", REAL_FIELD(train.grad_tol)},
      {"train.br_grad_tol", REAL_FIELD(train.br_grad_tol)},
      {"train.mu0", REAL_FIELD(train.mu0)},
      {"train.mu_inc", REAL_FIELD(train.mu_inc)},
      {"train.mu_dec", REAL_FIELD(train.mu_dec)},
      {"train.mu_max", REAL_FIELD(train.mu_max)},
      {"train.scg_sigma", REAL_FIELD(train.scg_sigma)},
      {"train.scg_lambda0", REAL_FIELD(train.scg_lambda0)},
      {"train.val_patience", SIZE_FIELD(train.val_patience)},
      {"train.br_validation_stop", BOOL_FIELD(train.br_validation_stop)},
      {"train.learning_rate", REAL_FIELD(train.learning_rate)},
      {"train.jacobian",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.train.jacobian = parsed(k, v, parse_jacobian); }},

      {"grid.algorithms",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.grid_algorithms = map_list<Algorithm>(k, v, [](const std::string& s) { return parse_algorithm(s); });
       }},
      {"grid.feature_sets",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.grid_feature_sets = map_list<FeatureSet>(k, v, [](const std::string& s) { return parse_feature_set(s); });
       }},
      {"grid.neurons",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.grid_neurons = map_list<std::size_t>(k, v, [k](const std::string& s) { return to_size(k, s); });
       }},
      {"grid.delays",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.grid_delays = map_list<std::size_t>(k, v, [k](const std::string& s) { return to_size(k, s); });
       }},
      {"grid.repeats", SIZE_FIELD(grid_repeats)},
      {"grid.pca_assessment", BOOL_FIELD(pca_assessment)},

      {"synthetic.companies",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.synthetic_labels = to_list(v);
         if (c.synthetic_labels.empty()) bad_value(k, v, "a non-empty list");
       }},
      {"synthetic.n_days", SIZE_FIELD(synthetic.n_days)},
      {"synthetic.drift", REAL_FIELD(synthetic.drift)},
      {"synthetic.volatility", REAL_FIELD(synthetic.volatility)},
      {"synthetic.cycle_amplitude", REAL_FIELD(synthetic.cycle_amplitude)},
      {"synthetic.cycle_period_days", REAL_FIELD(synthetic.cycle_period_days)},
      {"synthetic.start_price", REAL_FIELD(synthetic.start_price)},
      {"synthetic.base_volume", REAL_FIELD(synthetic.base_volume)},
      {"synthetic.volume_noise", REAL_FIELD(synthetic.volume_noise)},
      {"synthetic.start",
       [](RunConfig& c, std::string_view k, std::string_view v) { c.synthetic.start = parsed(k, v, parse_date); }},
      {"synthetic.growth_per_quarter", REAL_FIELD(synthetic.quarterly.growth_per_quarter)},
      {"synthetic.seasonal_amplitude", REAL_FIELD(synthetic.quarterly.seasonal_amplitude)},
      {"synthetic.report_noise", REAL_FIELD(synthetic.quarterly.noise)},
  };
  return table;
}

#undef SIZE_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD

CompanySource& company_entry(RunConfig& cfg, const std::string& label) {
  for (auto& c : cfg.companies)
    if (c.label == label) return c;
  cfg.companies.push_back({label, {}, {}});
  return cfg.companies.back();
}

}  // namespace

void set_option(RunConfig& cfg, std::string_view key, std::string_view value) {
  if (key.starts_with("company.")) {
    const auto last = key.rfind('.');
    const std::string label(key.substr(8, last > 8 ? last - 8 : 0));
    const auto field = key.substr(last + 1);
    if (label.empty() || (field != "prices" && field != "fundamentals"))
      fail(ErrorCode::parse, "unknown option '" + std::string(key) + "' (expected company.<label>.prices or .fundamentals)");
    auto& entry = company_entry(cfg, label);
    (field == "prices" ? entry.prices : entry.fundamentals) = std::string(trim(value));
    return;
  }
  auto it = setters().find(key);
  if (it == setters().end()) fail(ErrorCode::parse, "unknown option '" + std::string(key) + "'");
  it->second(cfg, key, value);
}

RunConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    const auto code = std::filesystem::exists(path) ? ErrorCode::parse : ErrorCode::io;
    fail(code, path.string() + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) fail(ErrorCode::parse, path.string() + ": key '" + section + "' is outside any section");
    for (const auto& [name, leaf] : body) {
      try {
        set_option(cfg, section + "." + name, leaf.data());
      } catch (const Error& e) {
        fail(e.code(), path.string() + ": " + e.what());
      }
    }
  }
  const auto base = path.parent_path();
  for (auto& c : cfg.companies) {
    if (!c.prices.empty() && c.prices.is_relative()) c.prices = base / c.prices;
    if (!c.fundamentals.empty() && c.fundamentals.is_relative()) c.fundamentals = base / c.fundamentals;
  }
  return cfg;
}

std::uint64_t RunConfig::effective_seed() const {
  if (seed) return *seed;
  if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') return to_u64(kSeedEnv, env);
  return kDefaultSeed;
}

void RunConfig::validate() const {
  require(!out_dir.empty(), "output directory must not be empty");
  indicators.validate();
  train.validate();
  require(neurons >= 1, "train.neurons must be at least 1");
  require(delay >= 1, "train.delay must be at least 1");
  require(train_repeats >= 1, "train.repeats must be at least 1");
  require(grid_repeats >= 1, "grid.repeats must be at least 1");
  for (auto n : grid_neurons) require(n >= 1, "grid.neurons entries must be at least 1");
  for (auto d : grid_delays) require(d >= 1, "grid.delays entries must be at least 1");
  std::set<std::string> seen;
  if (companies.empty()) {
    require(!synthetic_labels.empty(), "no companies configured");
    for (const auto& l : synthetic_labels) require(seen.insert(l).second, "duplicate company label '" + l + "'");
  }
  for (const auto& c : companies) {
    require(seen.insert(c.label).second, "duplicate company label '" + c.label + "'");
    require(c.prices.empty() == c.fundamentals.empty(),
            "company " + c.label + " needs both prices and fundamentals, or neither for synthetic data");
    for (const auto& p : {c.prices, c.fundamentals})
      if (!p.empty() && !std::filesystem::exists(p)) fail(ErrorCode::io, p.string() + ": file not found");
  }
  if (!company.empty())
    require(seen.count(company) == 1, "company '" + company + "' is not configured");
  (void)effective_seed();
}

ExperimentSpec RunConfig::cell_template() const {
  ExperimentSpec s;
  s.algorithm = algorithm;
  s.feature_set = feature_set;
  s.n_hidden = neurons;
  s.delay = delay;
  s.pca_k = pca_k;
  s.pca_scale = pca_scale;
  s.pca_scope = pca_scope;
  s.repeats = train_repeats;
  s.split = split;
  s.scale_data = scale_data;
  s.train = train;
  return s;
}

GridConfig RunConfig::grid_config() const {
  GridConfig g;
  g.algorithms = grid_algorithms;
  g.feature_sets = grid_feature_sets;
  g.neurons = grid_neurons;
  g.delays = grid_delays;
  g.seed = effective_seed();
  g.cell = cell_template();
  g.cell.repeats = grid_repeats;
  g.jobs = jobs;
  return g;
}

SyntheticData synthetic_company(const RunConfig& cfg, const std::string& label) {
  SyntheticSpec spec = cfg.synthetic;
  spec.seed = derive_seed(cfg.effective_seed(), "synthetic/" + label);
  return generate_synthetic(spec);
}

std::vector<CompanyInputs> load_inputs(const RunConfig& cfg) {
  cfg.validate();
  std::vector<CompanySource> sources = cfg.companies;
  if (sources.empty())
    for (const auto& l : cfg.synthetic_labels) sources.push_back({l, {}, {}});
  std::vector<CompanyInputs> out;
  for (const auto& src : sources) {
    CompanyInputs in;
    in.label = src.label;
    if (src.prices.empty()) {
      auto syn = synthetic_company(cfg, src.label);
      in.bars = std::move(syn.bars);
      in.fundamentals.kind = FundamentalsKind::statements;
      in.fundamentals.reports = std::move(syn.reports);
      for (const auto& r : in.fundamentals.reports)
        for (const auto& [k, v] : r.values)
          if (std::find(in.fundamentals.columns.begin(), in.fundamentals.columns.end(), k) ==
              in.fundamentals.columns.end())
            in.fundamentals.columns.push_back(k);
    } else {
      in.bars = load_prices(src.prices);
      in.fundamentals = load_fundamentals(src.fundamentals);
    }
    out.push_back(std::move(in));
  }
  return out;
}

CompanyInputs select_input(const RunConfig& cfg) {
  auto all = load_inputs(cfg);
  if (cfg.company.empty()) return std::move(all.front());
  for (auto& c : all)
    if (c.label == cfg.company) return std::move(c);
  fail(ErrorCode::invalid_argument, "company '" + cfg.company + "' is not configured");
}

AlignedDataset align_company(const CompanyInputs& in, const IndicatorConfig& indicators) {
  try {
    const auto technical = compute_technical_matrix(in.bars, indicators);
    const auto fundamental = daily_fundamentals(in.fundamentals, in.bars);
    return clean_and_align(in.bars, technical, fundamental);
  } catch (const Error& e) {
    fail(e.code(), in.label + ": " + e.what());
  }
}

std::vector<CompanyBundle> load_companies(const RunConfig& cfg) {
  std::vector<CompanyBundle> out;
  for (const auto& in : load_inputs(cfg)) out.push_back({in.label, align_company(in, cfg.indicators)});
  return out;
}

}  // namespace aerofc
