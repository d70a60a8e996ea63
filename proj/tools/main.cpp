#include <CLI11.hpp>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "aeroforecast.h"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string company;
  std::string feature_set;
  std::string algo;
  std::optional<std::size_t> neurons;
  std::optional<std::size_t> delay;
  std::optional<std::size_t> jobs;
  std::vector<std::string> sets;
  bool quiet = false;
};

int report(af_status st) {
  std::fprintf(stderr, "aeroforecast: %s: %s\n", af_status_name(st), af_last_error());
  return static_cast<int>(st);
}

void progress(size_t done, size_t total, void*) {
  if (done == total || done % std::max<size_t>(1, total / 20) == 0)
    std::fprintf(stderr, "  cells %zu/%zu\n", done, total);
}

int run(af_command command, const Options& opt) {
  af_config* cfg = nullptr;
  af_status st = opt.config.empty() ? af_config_new(&cfg) : af_config_load(opt.config.c_str(), &cfg);
  if (st != AF_OK) return report(st);

  // flags override the config file
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& kv : opt.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "aeroforecast: --set expects key=value, got '%s'\n", kv.c_str());
      af_config_free(cfg);
      return AF_ERR_INVALID_ARGUMENT;
    }
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const bool grid = command == AF_CMD_GRID;
  if (!opt.out.empty()) overrides.emplace_back("run.out", opt.out);
  if (!opt.company.empty()) overrides.emplace_back("run.company", opt.company);
  if (opt.jobs) overrides.emplace_back("run.jobs", std::to_string(*opt.jobs));
  if (!opt.feature_set.empty())
    overrides.emplace_back(grid ? "grid.feature_sets" : "train.feature_set", opt.feature_set);
  if (!opt.algo.empty()) overrides.emplace_back(grid ? "grid.algorithms" : "train.algorithm", opt.algo);
  if (opt.neurons) overrides.emplace_back(grid ? "grid.neurons" : "train.neurons", std::to_string(*opt.neurons));
  if (opt.delay) overrides.emplace_back(grid ? "grid.delays" : "train.delay", std::to_string(*opt.delay));
  for (const auto& [k, v] : overrides) {
    if ((st = af_config_set(cfg, k.c_str(), v.c_str())) != AF_OK) {
      af_config_free(cfg);
      return report(st);
    }
  }
  if (opt.seed) af_config_set_seed(cfg, *opt.seed);

  uint64_t seed = 0;
  if ((st = af_config_seed(cfg, &seed)) != AF_OK) {
    af_config_free(cfg);
    return report(st);
  }
  if (!opt.quiet) std::fprintf(stderr, "seed %llu\n", static_cast<unsigned long long>(seed));

  af_result* res = nullptr;
  st = af_run(cfg, command, opt.quiet ? nullptr : progress, nullptr, &res);
  af_config_free(cfg);
  if (res) {
    for (size_t i = 0; i < af_result_note_count(res); ++i) std::printf("%s\n", af_result_note(res, i));
    if (!opt.quiet)
      for (size_t i = 0; i < af_result_file_count(res); ++i) std::printf("wrote %s\n", af_result_file(res, i));
    af_result_free(res);
  }
  return st == AF_OK ? 0 : report(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Share-price forecasting with technical and fundamental features, PCA and a recurrent network"};
  app.set_version_flag("--version", std::string(af_version()));
  app.require_subcommand(1);

  Options opt;
  const std::vector<std::string> feature_sets = {"fundamental", "technical", "mixed"};
  const std::vector<std::string> algos = {"lm", "br", "scg"};
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "global seed (falls back to $AEROFORECAST_SEED, then 42)");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--company", opt.company, "company label");
    sub->add_option("--feature-set", opt.feature_set, "fundamental, technical or mixed")
        ->check(CLI::IsMember(feature_sets));
    sub->add_option("--algo", opt.algo, "lm, br or scg")->check(CLI::IsMember(algos));
    sub->add_option("--neurons", opt.neurons, "hidden neurons")->check(CLI::PositiveNumber);
    sub->add_option("--delay", opt.delay, "prediction delay in trading days")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", opt.jobs, "worker threads, 0 = all cores");
    sub->add_option("--set", opt.sets, "extra section.key=value overrides");
    sub->add_flag("-q,--quiet", opt.quiet, "print only the summary lines");
  };

  struct Entry {
    const char* name;
    const char* help;
    af_command command;
  };
  const Entry entries[] = {
      {"synth", "write synthetic demo price and fundamentals files", AF_CMD_SYNTH},
      {"features", "compute technical and daily fundamental features", AF_CMD_FEATURES},
      {"pca", "explained-variance report and component scores", AF_CMD_PCA},
      {"train", "train one configuration and export its best repeat", AF_CMD_TRAIN},
      {"grid", "run the algorithm x features x neurons x delays grid", AF_CMD_GRID},
  };
  std::optional<af_command> chosen;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    sub->callback([&chosen, cmd = e.command] { chosen = cmd; });
  }

  CLI11_PARSE(app, argc, argv);
  return chosen ? run(*chosen, opt) : 1;
}
