#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "aeroforecast.h"
#include "aeroforecast/commands.hpp"
#include "aeroforecast/error.hpp"
#include "fixtures.hpp"

using namespace aerofc;

namespace {

struct EnvGuard {
  EnvGuard() { unsetenv(kSeedEnv); }
  ~EnvGuard() { unsetenv(kSeedEnv); }
};

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::map<std::string, std::string> key_values(const std::filesystem::path& p) {
  std::map<std::string, std::string> kv;
  for (const auto& row : fixture::read_csv(p))
    if (row.size() == 2) kv[row[0]] = row[1];
  return kv;
}

RunConfig quick(const std::filesystem::path& out) {
  auto cfg = fixture::small_config();
  cfg.out_dir = out;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AEROFORECAST_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, LoadsSectionsAndResolvesPaths) {
  auto dir = fixture::scratch("config_load");
  write_text(dir / "p.csv", "x");
  write_text(dir / "f.csv", "x");
  write_text(dir / "run.ini",
             "[run]\nseed = 7\nout = results\njobs = 2\n"
             "[train]\nalgorithm = trainbr\nfeature_set = technical\nmax_epochs = 40\njacobian = bptt\n"
             "[grid]\nneurons = 5, 20\nalgorithms = lm,scg\n"
             "[indicators]\nrsi_window = 10\ncci_mode = printed\n"
             "[pca]\nk = 2\nscale = zscore\nscope = train\n"
             "[company.MFG]\nprices = p.csv\nfundamentals = f.csv\n");
  auto cfg = load_config(dir / "run.ini");
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.out_dir, "results");
  EXPECT_EQ(cfg.jobs, 2u);
  EXPECT_EQ(cfg.algorithm, Algorithm::br);
  EXPECT_EQ(cfg.feature_set, FeatureSet::technical);
  EXPECT_EQ(cfg.train.max_epochs, 40u);
  EXPECT_EQ(cfg.train.jacobian, JacobianRoute::bptt);
  EXPECT_EQ(cfg.grid_neurons, (std::vector<std::size_t>{5, 20}));
  EXPECT_EQ(cfg.grid_algorithms, (std::vector<Algorithm>{Algorithm::lm, Algorithm::scg}));
  EXPECT_EQ(cfg.indicators.rsi_window, 10u);
  EXPECT_EQ(cfg.indicators.cci_mode, CciMode::printed);
  EXPECT_EQ(cfg.pca_k, 2u);
  EXPECT_EQ(cfg.pca_scale, ScaleMode::z_score);
  EXPECT_EQ(cfg.pca_scope, PcaScope::train_only);
  ASSERT_EQ(cfg.companies.size(), 1u);
  EXPECT_EQ(cfg.companies[0].label, "MFG");
  EXPECT_EQ(cfg.companies[0].prices, dir / "p.csv");
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.grid_config().cell.repeats, 10u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  RunConfig cfg;
  auto code_of = [&](const char* key, const char* value) {
    try {
      set_option(cfg, key, value);
    } catch (const Error& e) {
      return static_cast<int>(e.code());
    }
    return 0;
  };
  EXPECT_EQ(code_of("train.epochs", "3"), static_cast<int>(ErrorCode::parse));
  EXPECT_EQ(code_of("train.max_epochs", "3x"), static_cast<int>(ErrorCode::parse));
  EXPECT_EQ(code_of("train.algorithm", "adam"), static_cast<int>(ErrorCode::parse));
  EXPECT_EQ(code_of("grid.delays", ""), static_cast<int>(ErrorCode::parse));
  EXPECT_EQ(code_of("company.X.volume", "a"), static_cast<int>(ErrorCode::parse));
  EXPECT_EQ(code_of("run.timing", "yes"), 0);
  EXPECT_TRUE(cfg.include_timing);

  auto dir = fixture::scratch("config_bad");
  write_text(dir / "bad.ini", "[train]\nneurons = many\n");
  try {
    load_config(dir / "bad.ini");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("train.neurons"), std::string::npos);
  }
  EXPECT_THROW(load_config(dir / "missing.ini"), Error);

  RunConfig c2;
  set_option(c2, "company.Z.prices", (dir / "nope.csv").string());
  set_option(c2, "company.Z.fundamentals", (dir / "nope.csv").string());
  try {
    c2.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io);
  }
  RunConfig c3;
  c3.train.max_epochs = 1001;
  EXPECT_THROW(c3.validate(), Error);
}

TEST(Config, SeedPrecedence) {
  EnvGuard guard;
  RunConfig cfg;
  EXPECT_EQ(cfg.effective_seed(), kDefaultSeed);
  setenv(kSeedEnv, "123", 1);
  EXPECT_EQ(cfg.effective_seed(), 123u);
  cfg.seed = 5;
  EXPECT_EQ(cfg.effective_seed(), 5u);
  cfg.seed.reset();
  setenv(kSeedEnv, "12z", 1);
  EXPECT_THROW(cfg.effective_seed(), Error);
}

TEST(Commands, SynthFilesReloadToTheSameDataset) {
  auto dir = fixture::scratch("synth");
  auto cfg = quick(dir);
  auto rep = cmd_synth(cfg);
  EXPECT_EQ(rep.files.size(), 5u);
  auto from_files = load_config(dir / "synthetic.ini");
  from_files.seed = cfg.seed;
  auto loaded = load_companies(from_files);
  auto generated = load_companies(cfg);
  ASSERT_EQ(loaded.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(loaded[i].label, generated[i].label);
    EXPECT_EQ(loaded[i].data.dates, generated[i].data.dates);
    EXPECT_EQ(loaded[i].data.target, generated[i].data.target);
    EXPECT_LE((loaded[i].data.features - generated[i].data.features).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Commands, FeaturesSummaryMatchesRescan) {
  auto dir = fixture::scratch("features");
  auto rep = cmd_features(quick(dir));
  auto tech = fixture::read_csv(dir / "technical.csv");
  auto fund = fixture::read_csv(dir / "fundamentals_daily.csv");
  ASSERT_EQ(tech[0].size(), 16u);
  EXPECT_EQ(fund[0].size(), 14u);
  ASSERT_EQ(tech.size(), fund.size());
  std::size_t missing_rows = 0;
  for (std::size_t r = 1; r < tech.size(); ++r) {
    bool any = false;
    for (const auto* t : {&tech, &fund})
      for (std::size_t c = 1; c < (*t)[r].size(); ++c) any = any || (*t)[r][c].empty();
    missing_rows += any;
  }
  auto kv = key_values(dir / "aligned_summary.csv");
  EXPECT_EQ(kv["deleted_rows"], std::to_string(missing_rows));
  EXPECT_EQ(kv["aligned_rows"], std::to_string(fixture::small_bundle()[0].data.rows()));
  EXPECT_EQ(kv["input_rows"], std::to_string(tech.size() - 1));
  EXPECT_EQ(fixture::read_csv(dir / "deleted_rows.csv").size(), missing_rows + 1);
}

TEST(Commands, PcaReportLayout) {
  auto dir = fixture::scratch("pca_cmd");
  cmd_pca(quick(dir));
  auto rep = fixture::read_csv(dir / "pca_report.csv");
  ASSERT_EQ(rep.size(), 1u + 28u);
  double prev = 0.0;
  for (std::size_t i = 1; i < rep.size(); ++i) {
    const double pct = std::stod(rep[i][2]);
    EXPECT_GE(pct, prev);
    prev = pct;
  }
  EXPECT_EQ(rep.back()[2], "100.00%");
  EXPECT_EQ(fixture::read_csv(dir / "pca_scatter.csv").size(), fixture::small_bundle()[0].data.rows() + 1);
  auto table = fixture::read_csv(dir / "pca_variance_table.csv");
  ASSERT_EQ(table.size(), 4u);
  EXPECT_EQ(table[0][1], "fundamental_individual");
  EXPECT_EQ(table[0][6], "mixed_cumulative_pct");

  auto cfg = quick(dir);
  cfg.pca_k = 0;
  EXPECT_THROW(cmd_pca(cfg), Error);
}

TEST(Commands, TrainIsReproducibleAndConsistent) {
  auto a = fixture::scratch("train_a"), b = fixture::scratch("train_b");
  auto cfg = quick(a);
  cfg.train.max_epochs = 8;
  cfg.train_repeats = 2;
  auto rep = cmd_train(cfg);
  EXPECT_EQ(rep.failures, 0u);
  cfg.out_dir = b;
  cmd_train(cfg);
  for (const char* f : {"model.txt", "training_curve.csv", "predictions.csv", "train_summary.csv", "pca_mapping.csv"})
    EXPECT_EQ(fixture::slurp(a / f), fixture::slurp(b / f)) << f;

  auto curve = fixture::read_csv(a / "training_curve.csv");
  EXPECT_LE(std::stoul(curve.back()[0]), kEpochCap);
  auto preds = fixture::read_csv(a / "predictions.csv");
  double sse = 0.0;
  for (std::size_t i = 1; i < preds.size(); ++i) sse += std::pow(std::stod(preds[i][1]) - std::stod(preds[i][2]), 2);
  auto kv = key_values(a / "train_summary.csv");
  const double reported = std::stod(kv["test_mse"]);
  EXPECT_NEAR(sse / static_cast<double>(preds.size() - 1), reported, 1e-9 * std::max(1.0, reported));
  EXPECT_EQ(kv["learning_rate_used"], "false");

  // same derivation as the grid cell with this configuration
  ExperimentSpec s = cfg.cell_template();
  s.company = "SYN_A";
  EXPECT_EQ(kv["base_seed"], std::to_string(cell_seed(cfg.effective_seed(), s)));
}

TEST(Commands, GridFilesAndCounts) {
  auto dir = fixture::scratch("grid_cmd");
  auto cfg = quick(dir);
  cfg.train.max_epochs = 1;
  cfg.grid_repeats = 1;
  cfg.companies = {{"ONLY", {}, {}}};
  auto rep = cmd_grid(cfg);
  EXPECT_EQ(rep.failures, 0u);
  EXPECT_EQ(fixture::read_csv(dir / "grid_results.csv").size(), 109u);
  auto summary = key_values(dir / "grid_summary.csv");
  EXPECT_EQ(summary["cells"], "108");
  EXPECT_EQ(summary["runs"], "108");
  for (const char* f : {"marginals_algorithm.csv", "marginals_feature_set.csv", "marginals_neurons.csv",
                        "marginals_delay.csv", "pca_assessment.csv", "failures.csv", "best_cells.csv",
                        "predictions_ONLY_scg_mixed_n20_d15.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(fixture::read_csv(dir / "failures.csv").size(), 1u);
}

TEST(Commands, PartialFailureIsReported) {
  auto dir = fixture::scratch("grid_fail");
  auto cfg = quick(dir);
  cfg.train.max_epochs = 1;
  cfg.grid_repeats = 1;
  cfg.grid_algorithms = {Algorithm::lm};
  cfg.grid_feature_sets = {FeatureSet::technical};
  cfg.grid_neurons = {3};
  cfg.grid_delays = {5, 500};
  auto rep = cmd_grid(cfg);
  EXPECT_EQ(rep.failures, 2u);
  auto failures = fixture::read_csv(dir / "failures.csv");
  ASSERT_EQ(failures.size(), 3u);
  EXPECT_EQ(failures[1][0], "SYN_A_lm_technical_n3_d500");
  EXPECT_NE(failures[1][4].find("too short"), std::string::npos);
}

TEST(CApi, ConfigRunAndErrors) {
  EnvGuard guard;
  af_config* cfg = nullptr;
  ASSERT_EQ(af_config_new(&cfg), AF_OK);
  EXPECT_EQ(af_config_set(cfg, "train.nonsense", "1"), AF_ERR_PARSE);
  EXPECT_NE(std::string(af_last_error()).find("train.nonsense"), std::string::npos);
  EXPECT_EQ(af_config_set(nullptr, "a", "b"), AF_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(af_config_load("/nonexistent/x.ini", nullptr), AF_ERR_INVALID_ARGUMENT);

  std::uint64_t seed = 0;
  ASSERT_EQ(af_config_seed(cfg, &seed), AF_OK);
  EXPECT_EQ(seed, 42u);
  ASSERT_EQ(af_config_set_seed(cfg, 99), AF_OK);
  ASSERT_EQ(af_config_seed(cfg, &seed), AF_OK);
  EXPECT_EQ(seed, 99u);

  auto dir = fixture::scratch("capi");
  for (auto [k, v] : {std::pair{"run.out", dir.string()}, {"synthetic.n_days", std::string("160")},
                      {"train.max_epochs", std::string("5")}})
    ASSERT_EQ(af_config_set(cfg, k, v.c_str()), AF_OK) << af_last_error();
  af_result* res = nullptr;
  ASSERT_EQ(af_run(cfg, AF_CMD_TRAIN, nullptr, nullptr, &res), AF_OK) << af_last_error();
  EXPECT_EQ(af_result_failures(res), 0u);
  EXPECT_GE(af_result_file_count(res), 5u);
  EXPECT_EQ(af_result_file(res, 999), nullptr);
  EXPECT_GE(af_result_note_count(res), 1u);
  af_result_free(res);
  EXPECT_EQ(af_run(cfg, static_cast<af_command>(42), nullptr, nullptr, &res), AF_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(res, nullptr);

  af_model* model = nullptr;
  ASSERT_EQ(af_model_load((dir / "model.txt").string().c_str(), &model), AF_OK);
  EXPECT_EQ(af_model_hidden(model), 10u);
  const std::size_t n_in = af_model_inputs(model);
  ASSERT_EQ(n_in, 3u);
  std::ifstream in(dir / "model.txt");
  const auto file = load_model(in);
  SequenceDataset data;
  data.inputs = Eigen::MatrixXd::Random(12, 3);
  data.targets = Eigen::VectorXd::Zero(12);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = data.inputs;
  std::vector<double> out(12);
  ASSERT_EQ(af_model_predict(model, row_major.data(), 12, out.data()), AF_OK);
  const Eigen::VectorXd y = forward(file.model, file.scaling->apply(data));
  for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(out[static_cast<std::size_t>(i)], file.scaling->unscale_target(y(i)));
  af_model_free(model);
  EXPECT_EQ(af_model_load((dir / "missing.txt").string().c_str(), &model), AF_ERR_IO);

  af_config_set(cfg, "grid.delays", "5,500");
  af_config_set(cfg, "grid.neurons", "2");
  af_config_set(cfg, "grid.algorithms", "lm");
  af_config_set(cfg, "grid.feature_sets", "fundamental");
  af_config_set(cfg, "grid.repeats", "1");
  af_config_set(cfg, "train.max_epochs", "1");
  EXPECT_EQ(af_run(cfg, AF_CMD_GRID, nullptr, nullptr, &res), AF_ERR_PARTIAL_FAILURE);
  ASSERT_NE(res, nullptr);
  EXPECT_EQ(af_result_failures(res), 2u);
  af_result_free(res);
  af_config_free(cfg);
}

TEST(Cli, ExitCodesAndFlagPrecedence) {
  EnvGuard guard;
  auto dir = fixture::scratch("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_NE(run_cli("train --algo adam"), 0);
  EXPECT_NE(run_cli("unknown"), 0);
  write_text(dir / "c.ini", "[run]\nseed = 1\n[synthetic]\nn_days = 160\n[train]\nmax_epochs = 2\n");
  const std::string base = "train -q --config " + (dir / "c.ini").string();

  ASSERT_EQ(run_cli(base + " --out " + (dir / "cfg").string()), 0);
  ASSERT_EQ(run_cli(base + " --seed 2 --neurons 4 --algo scg --out " + (dir / "flag").string()), 0);
  auto cfg_kv = key_values(dir / "cfg" / "train_summary.csv");
  auto flag_kv = key_values(dir / "flag" / "train_summary.csv");
  ExperimentSpec s;
  s.company = "SYN_A";
  s.feature_set = FeatureSet::mixed;
  s.n_hidden = 10;
  s.delay = 5;
  EXPECT_EQ(cfg_kv["base_seed"], std::to_string(cell_seed(1, s)));
  s.n_hidden = 4;
  s.algorithm = Algorithm::scg;
  EXPECT_EQ(flag_kv["base_seed"], std::to_string(cell_seed(2, s)));
  EXPECT_EQ(flag_kv["algorithm"], "SCG");

  write_text(dir / "noseed.ini", "[synthetic]\nn_days = 160\n[train]\nmax_epochs = 2\n");
  ASSERT_EQ(run_cli("train -q --config " + (dir / "noseed.ini").string() + " --out " + (dir / "env").string() +
                    " --set train.repeats=1"),
            0);
  setenv(kSeedEnv, "9", 1);
  ASSERT_EQ(run_cli("train -q --config " + (dir / "noseed.ini").string() + " --out " + (dir / "env9").string()), 0);
  s = ExperimentSpec{};
  s.company = "SYN_A";
  EXPECT_EQ(key_values(dir / "env" / "train_summary.csv")["base_seed"], std::to_string(cell_seed(42, s)));
  EXPECT_EQ(key_values(dir / "env9" / "train_summary.csv")["base_seed"], std::to_string(cell_seed(9, s)));

  EXPECT_EQ(run_cli("grid -q --config " + (dir / "noseed.ini").string() +
                    " --algo lm --feature-set technical --neurons 2 --delay 400 --set grid.repeats=1 --out " +
                    (dir / "fail").string()),
            AF_ERR_PARTIAL_FAILURE);
  EXPECT_EQ(fixture::read_csv(dir / "fail" / "failures.csv").size(), 3u);
}
