#include "aeroforecast.h"

#include <fstream>
#include <new>
#include <string>
#include <vector>

#include "aeroforecast/commands.hpp"
#include "aeroforecast/error.hpp"

struct af_config {
  aerofc::RunConfig cfg;
};

struct af_result {
  std::vector<std::string> files;
  std::vector<std::string> notes;
  size_t failures = 0;
};

struct af_model {
  aerofc::ModelFile file;
};

namespace {

thread_local std::string g_last_error;

af_status to_status(aerofc::ErrorCode code) { return static_cast<af_status>(static_cast<int>(code)); }

template <class F>
af_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const aerofc::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return AF_ERR_INTERNAL;
  }
}

af_status null_arg(const char* what) {
  g_last_error = std::string(what) + " is null";
  return AF_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* af_version(void) { return "0.1.0"; }

const char* af_status_name(af_status status) {
  switch (status) {
    case AF_OK: return "ok";
    case AF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AF_ERR_IO: return "i/o error";
    case AF_ERR_PARSE: return "parse error";
    case AF_ERR_DATA: return "data error";
    case AF_ERR_NUMERIC: return "numeric error";
    case AF_ERR_PARTIAL_FAILURE: return "partial failure";
    case AF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* af_last_error(void) { return g_last_error.c_str(); }

af_status af_config_new(af_config** out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new af_config{};
    return AF_OK;
  });
}

af_status af_config_load(const char* path, af_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new af_config{aerofc::load_config(path)};
    return AF_OK;
  });
}

af_status af_config_set(af_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_arg("config");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  return guarded([&] {
    aerofc::set_option(cfg->cfg, key, value);
    return AF_OK;
  });
}

af_status af_config_set_seed(af_config* cfg, uint64_t seed) {
  if (!cfg) return null_arg("config");
  cfg->cfg.seed = seed;
  g_last_error.clear();
  return AF_OK;
}

af_status af_config_seed(const af_config* cfg, uint64_t* seed) {
  if (!cfg) return null_arg("config");
  if (!seed) return null_arg("seed");
  return guarded([&] {
    *seed = cfg->cfg.effective_seed();
    return AF_OK;
  });
}

void af_config_free(af_config* cfg) { delete cfg; }

af_status af_run(const af_config* cfg, af_command command, af_progress_fn progress, void* user, af_result** out) {
  if (!cfg) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    aerofc::CommandReport rep;
    switch (command) {
      case AF_CMD_SYNTH: rep = aerofc::cmd_synth(cfg->cfg); break;
      case AF_CMD_FEATURES: rep = aerofc::cmd_features(cfg->cfg); break;
      case AF_CMD_PCA: rep = aerofc::cmd_pca(cfg->cfg); break;
      case AF_CMD_TRAIN: rep = aerofc::cmd_train(cfg->cfg); break;
      case AF_CMD_GRID: {
        aerofc::ProgressFn fn;
        if (progress) fn = [progress, user](std::size_t done, std::size_t total) { progress(done, total, user); };
        rep = aerofc::cmd_grid(cfg->cfg, fn);
        break;
      }
      default: aerofc::fail(aerofc::ErrorCode::invalid_argument, "unknown command " + std::to_string(command));
    }
    auto* res = new af_result;
    for (const auto& f : rep.files) res->files.push_back(f.string());
    res->notes = std::move(rep.notes);
    res->failures = rep.failures;
    *out = res;
    if (rep.failures > 0) {
      g_last_error = std::to_string(rep.failures) + " run(s) failed; see failures.csv";
      return AF_ERR_PARTIAL_FAILURE;
    }
    return AF_OK;
  });
}

size_t af_result_file_count(const af_result* result) { return result ? result->files.size() : 0; }

const char* af_result_file(const af_result* result, size_t index) {
  return result && index < result->files.size() ? result->files[index].c_str() : nullptr;
}

size_t af_result_note_count(const af_result* result) { return result ? result->notes.size() : 0; }

const char* af_result_note(const af_result* result, size_t index) {
  return result && index < result->notes.size() ? result->notes[index].c_str() : nullptr;
}

size_t af_result_failures(const af_result* result) { return result ? result->failures : 0; }

void af_result_free(af_result* result) { delete result; }

af_status af_model_load(const char* path, af_model** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) aerofc::fail(aerofc::ErrorCode::io, std::string("cannot open ") + path);
    *out = new af_model{aerofc::load_model(in)};
    return AF_OK;
  });
}

size_t af_model_inputs(const af_model* model) { return model ? model->file.model.n_input : 0; }

size_t af_model_hidden(const af_model* model) { return model ? model->file.model.n_hidden : 0; }

af_status af_model_predict(const af_model* model, const double* inputs, size_t rows, double* predictions) {
  if (!model) return null_arg("model");
  if (!inputs && rows > 0) return null_arg("inputs");
  if (!predictions && rows > 0) return null_arg("predictions");
  return guarded([&] {
    if (rows == 0) return AF_OK;
    const auto& f = model->file;
    aerofc::SequenceDataset data;
    data.inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        inputs, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(f.model.n_input));
    data.targets = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
    data.delay = f.model.delay;
    if (f.scaling) data = f.scaling->apply(data);
    const Eigen::VectorXd y = aerofc::forward(f.model, data);
    for (size_t i = 0; i < rows; ++i) {
      const double v = y(static_cast<Eigen::Index>(i));
      predictions[i] = f.scaling ? f.scaling->unscale_target(v) : v;
    }
    return AF_OK;
  });
}

void af_model_free(af_model* model) { delete model; }

}  // extern "C"
