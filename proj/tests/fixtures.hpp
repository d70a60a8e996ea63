#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aeroforecast/config.hpp"
#include "aeroforecast/experiments.hpp"

namespace fixture {

inline aerofc::RunConfig small_config(std::size_t n_days = 160, std::uint64_t seed = 11) {
  aerofc::RunConfig cfg;
  cfg.seed = seed;
  cfg.synthetic.n_days = n_days;
  cfg.train.max_epochs = 3;
  cfg.grid_repeats = 2;
  cfg.jobs = 1;
  return cfg;
}

inline const std::vector<aerofc::CompanyBundle>& small_bundle() {
  static const auto bundle = aerofc::load_companies(small_config());
  return bundle;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("aerofc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      auto end = line.find(',', start);
      cells.push_back(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace fixture
