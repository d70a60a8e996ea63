#include "aeroforecast/commands.hpp"

#include <algorithm>
#include <fstream>

#include "aeroforecast/error.hpp"
#include "aeroforecast/fundamentals.hpp"
#include "aeroforecast/indicators.hpp"
#include "aeroforecast/pca.hpp"

namespace aerofc {

namespace {

std::filesystem::path prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.out_dir))
    fail(ErrorCode::io, "cannot create output directory " + cfg.out_dir.string());
  return cfg.out_dir;
}

std::ofstream open_file(const std::filesystem::path& path, CommandReport& rep) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  rep.files.push_back(path);
  return out;
}

void write_matrix(const std::filesystem::path& path, const FeatureMatrix& m, CommandReport& rep) {
  auto out = open_file(path, rep);
  out << "date";
  for (const auto& n : m.names) out << ',' << n;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << format_date(m.dates[r]);
    for (Eigen::Index c = 0; c < m.values.cols(); ++c)
      out << ',' << format_number(m.values(static_cast<Eigen::Index>(r), c));
    out << '\n';
  }
}

void write_key_values(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv,
                      CommandReport& rep) {
  auto out = open_file(path, rep);
  out << "key,value\n";
  for (const auto& [k, v] : kv) out << k << ',' << v << '\n';
}

std::string timing_or_na(double seconds, const RunConfig& cfg) {
  return cfg.include_timing ? format_number(seconds) : std::string("NA");
}

void write_pca_mapping(const std::filesystem::path& path, const PcaModel& m, const std::vector<std::string>& names,
                       CommandReport& rep) {
  auto out = open_file(path, rep);
  out << "row";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  auto row = [&](const std::string& label, const Eigen::RowVectorXd& v) {
    out << label;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_number(v(i));
    out << '\n';
  };
  row("mean", m.mean.transpose());
  row("scale", m.scale.transpose());
  for (Eigen::Index r = 0; r < m.mapping.rows(); ++r) row("pc" + std::to_string(r + 1), m.mapping.row(r));
}

}  // namespace

CommandReport cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  CommandReport rep;
  const auto dir = prepare_out(cfg);
  std::vector<std::string> labels;
  for (const auto& c : cfg.companies)
    if (c.prices.empty()) labels.push_back(c.label);
  if (labels.empty()) labels = cfg.synthetic_labels;

  std::ofstream ini;
  for (const auto& label : labels) {
    const auto data = synthetic_company(cfg, label);
    const auto prices = dir / (label + "_prices.csv");
    const auto funda = dir / (label + "_fundamentals.csv");
    write_prices(prices, data.bars);
    rep.files.push_back(prices);
    FundamentalsTable table{FundamentalsKind::statements, {}, data.reports};
    for (const auto& r : data.reports)
      for (const auto& [k, v] : r.values)
        if (std::find(table.columns.begin(), table.columns.end(), k) == table.columns.end()) table.columns.push_back(k);
    write_fundamentals(funda, table);
    rep.files.push_back(funda);
    rep.notes.push_back(label + ": " + std::to_string(data.bars.size()) + " trading days, " +
                        std::to_string(data.reports.size()) + " quarterly reports");
  }
  {
    auto out = open_file(dir / "synthetic.ini", rep);
    for (const auto& label : labels)
      out << "[company." << label << "]\nprices = " << label << "_prices.csv\nfundamentals = " << label
          << "_fundamentals.csv\n\n";
  }
  return rep;
}

CommandReport cmd_features(const RunConfig& cfg) {
  CommandReport rep;
  const auto input = select_input(cfg);
  const auto dir = prepare_out(cfg);
  FeatureMatrix technical, fundamental;
  AlignedDataset data;
  try {
    technical = compute_technical_matrix(input.bars, cfg.indicators);
    fundamental = daily_fundamentals(input.fundamentals, input.bars);
    data = clean_and_align(input.bars, technical, fundamental);
  } catch (const Error& e) {
    fail(e.code(), input.label + ": " + e.what());
  }
  write_matrix(dir / "technical.csv", technical, rep);
  write_matrix(dir / "fundamentals_daily.csv", fundamental, rep);

  {
    auto out = open_file(dir / "deleted_rows.csv", rep);
    out << "date,missing\n";
    for (const auto d : data.deleted_dates) {
      const auto r = static_cast<Eigen::Index>(std::lower_bound(technical.dates.begin(), technical.dates.end(), d) -
                                               technical.dates.begin());
      std::string missing;
      for (const auto* m : {&technical, &fundamental})
        for (Eigen::Index c = 0; c < m->values.cols(); ++c)
          if (is_missing(m->values(r, c))) missing += (missing.empty() ? "" : ";") + m->names[static_cast<std::size_t>(c)];
      out << format_date(d) << ',' << missing << '\n';
    }
  }

  std::vector<std::pair<std::string, std::string>> kv = {
      {"company", input.label},
      {"input_rows", std::to_string(input.bars.size())},
      {"aligned_rows", std::to_string(data.rows())},
      {"deleted_rows", std::to_string(data.deleted_dates.size())},
      {"technical_columns", std::to_string(technical.cols())},
      {"fundamental_columns", std::to_string(fundamental.cols())},
      {"feature_columns", std::to_string(data.feature_names.size())},
      {"first_date", data.rows() ? format_date(data.dates.front()) : ""},
      {"last_date", data.rows() ? format_date(data.dates.back()) : ""},
  };
  write_key_values(dir / "aligned_summary.csv", kv, rep);
  rep.notes.push_back(input.label + ": " + std::to_string(data.rows()) + " aligned rows, " +
                      std::to_string(data.deleted_dates.size()) + " deleted, " +
                      std::to_string(data.feature_names.size()) + " features");
  return rep;
}

CommandReport cmd_pca(const RunConfig& cfg) {
  require(cfg.pca_k >= 1, "pca.k must be at least 1 for the pca command");
  CommandReport rep;
  const auto input = select_input(cfg);
  const auto data = align_company(input, cfg.indicators);
  const auto dir = prepare_out(cfg);

  const auto X = data.select(cfg.feature_set);
  require(cfg.pca_k <= static_cast<std::size_t>(X.cols()),
          "pca.k " + std::to_string(cfg.pca_k) + " exceeds the " + std::to_string(X.cols()) + " features");
  const auto model = fit_pca(X, cfg.pca_k, cfg.pca_scale);
  write_pca_report(dir / "pca_report.csv", model);
  rep.files.push_back(dir / "pca_report.csv");
  write_pca_scatter(dir / "pca_scatter.csv", data.dates, transform(model, X));
  rep.files.push_back(dir / "pca_scatter.csv");

  const FeatureSet sets[] = {FeatureSet::fundamental, FeatureSet::technical, FeatureSet::mixed};
  std::vector<std::vector<VarianceRow>> tables;
  for (auto s : sets) tables.push_back(variance_table(fit_pca(data.select(s), 1, cfg.pca_scale)));
  {
    auto out = open_file(dir / "pca_variance_table.csv", rep);
    out << "pc";
    for (auto s : sets) out << ',' << to_string(s) << "_individual," << to_string(s) << "_cumulative_pct";
    out << '\n';
    for (std::size_t i = 0; i < cfg.pca_k; ++i) {
      out << i + 1;
      for (const auto& t : tables) {
        if (i < t.size())
          out << ',' << format_number(t[i].individual) << ',' << format_cumulative_pct(t[i].cumulative);
        else
          out << ",,";
      }
      out << '\n';
    }
  }
  const auto rows = variance_table(model);
  rep.notes.push_back(input.label + " " + std::string(to_string(cfg.feature_set)) + ": " + std::to_string(cfg.pca_k) +
                      " components explain " + format_cumulative_pct(rows[cfg.pca_k - 1].cumulative));
  return rep;
}

CommandReport cmd_train(const RunConfig& cfg) {
  CommandReport rep;
  const auto input = select_input(cfg);
  const auto data = align_company(input, cfg.indicators);
  const auto dir = prepare_out(cfg);

  ExperimentSpec spec = cfg.cell_template();
  spec.company = input.label;
  spec.base_seed = cell_seed(cfg.effective_seed(), spec);
  GridReport single;
  single.cells.push_back(run_experiment(spec, data));
  const auto& res = single.cells.front();
  rep.failures = single.failed_runs();

  std::vector<std::pair<std::string, std::string>> kv = {
      {"company", spec.company},
      {"cell", spec.label()},
      {"algorithm", std::string(display_name(spec.algorithm))},
      {"feature_set", std::string(to_string(spec.feature_set))},
      {"neurons", std::to_string(spec.n_hidden)},
      {"delays", std::to_string(spec.delay)},
      {"pca_k", std::to_string(spec.pca_k)},
      {"repeats", std::to_string(res.repeats.size())},
      {"ok_repeats", std::to_string(res.n_ok)},
      {"base_seed", std::to_string(spec.base_seed)},
      {"average_mse", format_number(res.avg_test_mse)},
  };
  if (const auto best = res.best_repeat()) {
    const auto& run = res.repeats[*best];
    {
      auto out = open_file(dir / "model.txt", rep);
      save_model(out, run.model);
    }
    if (run.pca) write_pca_mapping(dir / "pca_mapping.csv", *run.pca, data.names(spec.feature_set), rep);
    write_training_curve(dir / "training_curve.csv", run.record);
    rep.files.push_back(dir / "training_curve.csv");
    write_predictions(dir / "predictions.csv", run);
    rep.files.push_back(dir / "predictions.csv");
    kv.insert(kv.end(), {
                            {"best_repeat", std::to_string(run.repeat)},
                            {"seed", std::to_string(run.seed)},
                            {"total_epochs", std::to_string(run.total_epochs)},
                            {"best_epoch", std::to_string(run.best_epoch)},
                            {"stop_reason", std::string(to_string(run.stop_reason))},
                            {"test_mse", format_number(run.test_mse)},
                            {"running_time_s", timing_or_na(run.wall_seconds, cfg)},
                        });
    rep.notes.push_back(spec.label() + ": best repeat " + std::to_string(run.repeat) + " test MSE " +
                        format_number(run.test_mse) + " after " + std::to_string(run.total_epochs) + " epochs");
  } else {
    rep.notes.push_back(spec.label() + ": every repeat failed");
  }
  kv.emplace_back("learning_rate", format_number(spec.train.learning_rate));
  kv.emplace_back("learning_rate_used", "false");
  write_key_values(dir / "train_summary.csv", kv, rep);
  write_failures(dir / "failures.csv", single);
  rep.files.push_back(dir / "failures.csv");
  return rep;
}

CommandReport cmd_grid(const RunConfig& cfg, const ProgressFn& progress) {
  CommandReport rep;
  const auto companies = load_companies(cfg);
  const auto dir = prepare_out(cfg);
  const GridConfig grid = cfg.grid_config();
  const ReportOptions opt{cfg.include_timing};

  const GridReport report = run_grid(companies, grid, progress);
  rep.failures = report.failed_runs();

  write_grid_results(dir / "grid_results.csv", report, opt);
  rep.files.push_back(dir / "grid_results.csv");
  for (auto dim : {Dimension::algorithm, Dimension::feature_set, Dimension::neurons, Dimension::delay}) {
    const auto path = dir / ("marginals_" + std::string(to_string(dim)) + ".csv");
    write_marginals(path, dim, marginals(report, dim), opt);
    rep.files.push_back(path);
  }
  for (const auto& cell : report.cells) {
    if (const auto best = cell.best_repeat()) {
      const auto path = dir / ("predictions_" + cell.spec.label() + ".csv");
      write_predictions(path, cell.repeats[*best]);
      rep.files.push_back(path);
    }
  }

  {
    auto out = open_file(dir / "best_cells.csv", rep);
    out << "company,cell,algorithm,feature_set,neurons,delays,average_mse\n";
    for (const auto& c : companies) {
      const ExperimentResult* best = nullptr;
      for (const auto& cell : report.cells)
        if (cell.spec.company == c.label && cell.n_ok > 0 && (!best || cell.avg_test_mse < best->avg_test_mse))
          best = &cell;
      if (!best) continue;
      const auto& s = best->spec;
      out << c.label << ',' << s.label() << ',' << display_name(s.algorithm) << ',' << display_name(s.feature_set)
          << ',' << s.n_hidden << ',' << s.delay << ',' << format_number(best->avg_test_mse) << '\n';
      rep.notes.push_back(c.label + ": best cell " + s.label() + " average MSE " + format_number(best->avg_test_mse));
    }
  }

  std::size_t assessment_failures = 0;
  if (cfg.pca_assessment && grid.cell.pca_k > 0) {
    const auto rows = assess_pca(report, companies, grid.jobs);
    for (const auto& r : rows) assessment_failures += r.without_pca.repeats.size() - r.without_pca.n_ok;
    write_pca_assessment(dir / "pca_assessment.csv", rows, opt);
    rep.files.push_back(dir / "pca_assessment.csv");
  }
  rep.failures += assessment_failures;

  write_failures(dir / "failures.csv", report);
  rep.files.push_back(dir / "failures.csv");

  std::vector<std::pair<std::string, std::string>> kv = {
      {"companies", std::to_string(companies.size())},
      {"cells", std::to_string(report.cells.size())},
      {"repeats_per_cell", std::to_string(grid.cell.repeats)},
      {"runs", std::to_string(report.runs())},
      {"failed_runs", std::to_string(report.failed_runs())},
      {"failed_assessment_runs", std::to_string(assessment_failures)},
      {"seed", std::to_string(grid.seed)},
      {"pca_k", std::to_string(grid.cell.pca_k)},
      {"max_epochs", std::to_string(grid.cell.train.max_epochs)},
      {"learning_rate", format_number(grid.cell.train.learning_rate)},
      {"learning_rate_used", "false"},
  };
  write_key_values(dir / "grid_summary.csv", kv, rep);
  rep.notes.insert(rep.notes.begin(), std::to_string(report.cells.size()) + " cells, " +
                                          std::to_string(report.runs()) + " runs, " +
                                          std::to_string(report.failed_runs()) + " failed");
  return rep;
}

}  // namespace aerofc
