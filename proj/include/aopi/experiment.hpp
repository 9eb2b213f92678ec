#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "aopi/baselines.hpp"
#include "aopi/scenario.hpp"

namespace aopi {

// Raised when result files cannot be written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Strategy { kLbcd, kDos, kJcab, kMin };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

enum class RunMode { kAnalytic, kSimulate };

// One row of slots.csv. q is the virtual queue after the slot's update
// (always 0 for the baselines). Metrics are NaN when the slot errored.
struct SlotRecord {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::kLbcd;
  std::size_t slot = 0;
  double q = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double mean_aopi = std::numeric_limits<double>::quiet_NaN();
  double mean_accuracy = std::numeric_limits<double>::quiet_NaN();
  double running_avg_accuracy = std::numeric_limits<double>::quiet_NaN();
  double sim_mean_aopi = std::numeric_limits<double>::quiet_NaN();
  double sim_mean_accuracy = std::numeric_limits<double>::quiet_NaN();
  bool fallback_used = false;
  std::string error;
};

// Final-slot per-camera snapshot, one row of decisions.csv.
struct CameraRecord {
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::kLbcd;
  std::size_t camera = 0;
  std::size_t server = 0;
  int resolution_px = 0;
  Policy policy = Policy::kLcfsp;
  std::size_t model = 0;
  double bandwidth_hz = 0.0;
  double compute_flops = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double accuracy = 0.0;
  double aopi = 0.0;
  bool within_budget = true;  // latency-budget flag, jcab only
};

struct StrategySummary {
  Strategy strategy = Strategy::kLbcd;
  double mean_aopi = std::numeric_limits<double>::quiet_NaN();
  double mean_accuracy = std::numeric_limits<double>::quiet_NaN();
  double final_running_accuracy = std::numeric_limits<double>::quiet_NaN();
  // First slot index whose running-average accuracy reaches the target,
  // +inf when never reached; one entry per seed, plus the mean.
  std::vector<double> convergence_slot_by_seed;
  double convergence_slot_mean = std::numeric_limits<double>::infinity();
  double sim_mean_aopi = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  std::size_t errors = 0;
  std::size_t fallbacks = 0;
};

struct ExperimentResult {
  ScenarioSpec spec;
  RunMode mode = RunMode::kAnalytic;
  std::vector<Strategy> strategies;
  double accuracy_target = 0.0;  // p_min - 0.01
  std::vector<SlotRecord> slots;
  std::vector<CameraRecord> final_decisions;
  std::vector<StrategySummary> summaries;
  // Invariant counters over all slots of the run.
  std::size_t drift_violations = 0;
  std::size_t trace_violations = 0;
  bool bound_available = false;
  BoundReport bound;

  const StrategySummary* summary(Strategy s) const;
  // mean_aopi(a) / mean_aopi(b); NaN when either strategy is absent.
  double aopi_ratio(Strategy a, Strategy b) const;
};

// Runs every (seed, slot, strategy) cell on identical capacity and content
// inputs. Per-slot strategy failures are recorded in the slot row and the
// run continues with that strategy's previous decision retained.
ExperimentResult run_experiment(const ScenarioSpec& spec,
                                const std::vector<Strategy>& strategies,
                                RunMode mode);

// Writes slots.csv, decisions.csv, summary.json and curves/ into out_dir.
void emit_results(const ExperimentResult& result, const std::string& out_dir);

// Closed-form sweep files: age vs arrival rate, age vs accuracy, and the
// policy-switch threshold grid.
void write_curves(const std::string& dir);

}  // namespace aopi
