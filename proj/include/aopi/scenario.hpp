#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aopi/model.hpp"
#include "aopi/optimizer.hpp"

namespace aopi {

// Raised for any spec or trace file problem; the message names the
// offending field (and line, for CSV traces).
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  std::string name;
  double flops_per_frame_at_ref = 0.0;  // per-frame work at the reference resolution
  double accuracy_ceiling = 0.0;
};

// Bounded multiplicative random walk of the per-camera accuracy steepness.
struct ContentDynamics {
  double difficulty_init = 2.6;
  double walk_step = 0.04;
  double difficulty_min = 1.8;
  double difficulty_max = 3.4;
};

// Per-server capacity process. With an empty trace_path, capacities are
// synthetic log-normal series with the given mean and coefficient of
// variation, clipped below at 5% of the mean.
struct CapacitySpec {
  double mean_bandwidth_hz = 3.0e7;
  double mean_compute_flops = 5.0e13;
  double cv = 0.25;
  std::string trace_path;
};

// Queue-sim cross-check settings used in simulate mode.
struct SimSpec {
  std::uint64_t frames_per_slot = 5000;
  double warmup_fraction = 0.1;
};

struct ScenarioSpec {
  int schema_version = 1;
  std::size_t cameras = 30;
  std::size_t servers = 3;
  std::size_t slots = 2000;
  double slot_length_s = 300.0;
  double p_min = 0.7;
  double v = 10.0;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> resolutions_px{384, 512, 640, 768, 896, 1024};
  std::vector<ModelSpec> models;
  double reference_resolution_px = 640.0;
  double bits_per_pixel_sq = 1.0;
  double tx_power_w = 1.0;
  double noise_power_w = 1.0;
  std::vector<double> channel_gains;  // one per camera
  ContentDynamics content;
  CapacitySpec capacity;
  SimSpec sim;
  LbcdParams optimizer;
  double jcab_latency_budget_s = 0.5;
};

// Template scenario with the stationary synthetic defaults: 30 cameras,
// 3 servers, 6 resolutions, 5 models, staggered link gains.
ScenarioSpec default_scenario();

ScenarioSpec load_scenario(const std::string& path);
void save_scenario(const ScenarioSpec& spec, const std::string& path);

// Validates every invariant load_scenario enforces; throws ScenarioError.
void validate_scenario(const ScenarioSpec& spec);

struct TraceSeries {
  // rows[t][s] holds server s's capacities during slot t.
  std::vector<std::vector<EdgeServerCapacity>> rows;
  std::size_t slots() const { return rows.size(); }
  std::size_t servers() const { return rows.empty() ? 0 : rows.front().size(); }
};

TraceSeries gen_traces(const CapacitySpec& cap, std::size_t servers,
                       std::size_t slots, std::uint64_t seed);
TraceSeries load_trace(const std::string& path);
void save_trace(const TraceSeries& series, const std::string& path);

// Per-seed capacity series: the configured trace if any, synthetic otherwise.
TraceSeries scenario_traces(const ScenarioSpec& spec, std::uint64_t seed);

// Fleet snapshot for one slot given the current per-camera difficulty.
Fleet make_fleet(const ScenarioSpec& spec,
                 const std::vector<double>& difficulty);

std::vector<double> initial_difficulty(const ScenarioSpec& spec);
void advance_difficulty(const ScenarioSpec& spec, std::uint64_t seed,
                        std::size_t slot, std::vector<double>& difficulty);

}  // namespace aopi
