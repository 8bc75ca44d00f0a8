#pragma once

#include <filesystem>

#include "mpr/dataset.hpp"
#include "mpr/models.hpp"
#include "mpr/planner.hpp"

namespace mpr {

/// Everything one experiment run needs; loadable from a JSON file with
/// field-level defaults, overridable by command-line flags.
struct Config {
  VehicleParams vehicle;  // "bmw_320i" profile unless overridden
  GridSpec grid;
  OcpConfig ocp = OcpConfig::defaults_for(VehicleParams{});
  net::TrainConfig train;
  ModelOptions model;
  CostWeights planner_weights;
  std::filesystem::path out = "out";
  uint64_t seed = 1;
  int jobs = 0;  // 0 = hardware concurrency
  double train_fraction = 0.7;
};

Config load_config(const std::filesystem::path& path);
void save_config(const Config& config, const std::filesystem::path& path);

}  // namespace mpr
