#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "mpr/ocp.hpp"

namespace mpr {

/// One grid axis. values() returns every multiple of step*stride inside
/// [min, max]; anchoring at zero keeps symmetric axes symmetric under any
/// stride. stride > 1 thins the axis for desk-scale runs.
struct AxisSpec {
  double min = 0.0;
  double max = 0.0;
  double step = 1.0;
  int stride = 1;

  std::vector<double> values() const;
};

/// Boundary-condition grid. Final positions are lattice points whose distance
/// from the origin lies in the speed-dependent reachable band; the default
/// x_min = 0 keeps the forward half-plane. Default strides give a desk-scale
/// dataset; reset_strides() restores the full-resolution grid.
struct GridSpec {
  AxisSpec v0{0.0, 28.0, 1.0, 4};
  AxisSpec delta0{-0.9, 0.9, 0.1, 5};
  AxisSpec thetaf{-1.6, 1.6, 0.16, 2};
  double x_step = 3.0;
  int x_stride = 2;
  double y_step = 1.0;
  int y_stride = 2;
  double x_min = 0.0;
  double y_abs_max = 1e9;
  TimeGrid time_grid;

  void validate() const;
  void reset_strides();
  uint64_t hash() const;
};

struct Sample {
  Query query;
  Trajectory trajectory;  // n_points x 5, columns (x, y, v, steer, yaw)
  double ocp_objective = 0.0;
};

struct Dataset {
  std::vector<Sample> samples;
  GridSpec grid_spec;
  VehicleParams params;
  uint64_t seed = 0;
  uint64_t config_hash = 0;
  uint64_t accepted = 0;
  uint64_t rejected = 0;

  size_t size() const { return samples.size(); }
};

/// Distance band [r_min, r_max] covered by maximal deceleration respectively
/// acceleration from initial speed v0 over the horizon.
std::pair<double, double> reachable_range(double v0, const VehicleParams& params,
                                          double horizon_s);

/// Cartesian product of the axes, filtered to the reachable band, in
/// deterministic lexicographic order (v0, delta0, xf, yf, thetaf).
std::vector<Query> enumerate_queries(const GridSpec& grid, const VehicleParams& params);

/// Cardinality of enumerate_queries without materializing it.
size_t count_queries(const GridSpec& grid, const VehicleParams& params);

struct GenProgress {
  size_t done = 0;
  size_t total = 0;
  size_t accepted = 0;
};

/// Solves every enumerated query and keeps the converged ones. Workers pull
/// queries from a shared counter; results are reassembled in enumeration
/// order, so the output is identical for any worker count.
Dataset build_dataset(const GridSpec& grid, const VehicleParams& params, const OcpConfig& config,
                      int jobs = 1,
                      const std::function<void(const GenProgress&)>& progress = nullptr);

/// Deterministic shuffled split into train/test; unions back to the original
/// multiset.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, uint64_t seed);

void save(const Dataset& dataset, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

/// One row per sample: query columns, then per-channel node blocks
/// (x_0..x_M, y_0..y_M, v_0..v_M, steer_0..steer_M, yaw_0..yaw_M), then the
/// objective.
void export_csv(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace mpr
