#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "aopi/model.hpp"

namespace aopi {

// Virtual queue tracking the long-term accuracy constraint: the backlog
// grows whenever a slot's mean accuracy falls short of p_min.
struct VirtualQueue {
  double value = 0.0;
  double p_min = 0.7;
  // One (backlog after update, slot mean accuracy) pair per processed slot.
  std::vector<std::pair<double, double>> history;
};

// value <- max(value - mean_accuracy + p_min, 0); appends to history.
void queue_update(VirtualQueue& vq, double mean_accuracy);

struct LbcdParams {
  double v = 10.0;                  // age weight in the drift-plus-penalty
  int max_bcd_iters = 10;
  double bcd_rel_tol = 1e-4;        // relative objective change to stop
  double solver_tol = 1e-6;         // bisection width target, resource blocks
  int max_solver_iters = 500;       // bisection iteration cap per level
  double epsilon_stability = 0.01;  // FCFS requires lambda <= (1-eps) mu
};

// Everything one slot's decision depends on.
struct ScenarioState {
  std::vector<EdgeServerCapacity> servers;
  Fleet fleet;
  VirtualQueue queue;
  LbcdParams params;
};

// Closed-form evaluation of one camera under a candidate decision. The age
// is +inf when the camera has no bandwidth/compute or when FCFS would be
// unstable at the candidate rates.
struct CameraEval {
  double lambda = 0.0;
  double mu = 0.0;
  double p = 0.0;
  double aopi = 0.0;
};

CameraEval evaluate_camera(const ScenarioState& state, std::size_t camera,
                           const VideoConfig& config, double bandwidth_hz,
                           double compute_flops);

// Slot-level objective bookkeeping. drift_penalty is always the
// drift-plus-penalty form -q * mean_accuracy + v * mean_aopi; `objective`
// is whatever the producing solver minimizes (identical to drift_penalty
// for the drift-plus-penalty rule).
struct ObjectiveValue {
  double objective = 0.0;
  double drift_penalty = 0.0;
  double mean_aopi = 0.0;
  double mean_accuracy = 0.0;
};

ObjectiveValue evaluate_decision(const ScenarioState& state,
                                 const SlotDecision& decision);

// Block steps of the coordinate-descent solver. Each mutates only its own
// coordinates of `decision` and never increases its objective.
//
// optimize_configs picks, per camera, the (resolution, policy, model) tuple
// minimizing (-q p + v * age) / n at the current resource split, skipping
// FCFS tuples violating lambda <= (1 - eps) mu. Ties take the lowest
// catalog index (LCFS-P enumerated before FCFS).
void optimize_configs(const ScenarioState& state, SlotDecision& decision);

// optimize_bandwidth re-splits every server's bandwidth across its cameras
// to minimize the summed closed-form age at fixed configs and compute. The
// per-camera ages are convex in the own share, so the split is solved
// exactly: bisection on a budget price, with an inner bisection mapping the
// price to each camera's share via the age derivative, shares capped at the
// FCFS stability limit. The incumbent split is kept if it scores no worse.
// Throws InfeasibleError for a zero-bandwidth server with cameras.
void optimize_bandwidth(const ScenarioState& state, SlotDecision& decision);

// optimize_compute mirrors optimize_bandwidth for compute shares; FCFS
// cameras impose stability floors instead of caps. Throws InfeasibleError
// when the floors alone exceed a server's capacity.
void optimize_compute(const ScenarioState& state, SlotDecision& decision);

// Config-selection rule: drift-plus-penalty (default), or the
// accuracy-minus-age hybrid used by the DOS baseline (resolution maximizes
// p - age; policy and model then minimize age).
enum class ConfigRule { kDriftPenalty, kAccuracyMinusAge };

struct BcdOptions {
  ConfigRule rule = ConfigRule::kDriftPenalty;
  bool force_q_zero = false;
  const SlotDecision* init = nullptr;   // warm start; default cold start
};

struct BcdResult {
  SlotDecision decision;
  std::vector<ObjectiveValue> trace;   // initial value, then one per block
  int iterations = 0;
};

// Alternates config / bandwidth / compute blocks from the deterministic
// cold start (lowest resolution, LCFS-P, cheapest model, equal split) until
// the relative objective change drops below bcd_rel_tol or max_bcd_iters.
// On a per-server InfeasibleError, forces LCFS-P on that server's cameras
// and retries once before propagating.
BcdResult bcd_solve(const ScenarioState& state,
                    const std::vector<std::size_t>& assignment,
                    const BcdOptions& opts = {});

// First-fit decreasing server selection: demands come from a BCD solve
// against a single virtual server pooling all capacities; cameras are
// placed in decreasing normalized-demand order onto servers in decreasing
// normalized-capacity order; a camera fitting nowhere goes to the server
// with the largest normalized remaining capacity (every camera is placed).
std::vector<std::size_t> select_servers(const ScenarioState& state);

struct StepOutcome {
  SlotDecision decision;
  std::vector<std::size_t> assignment;
  ObjectiveValue objective;
  std::vector<CameraEval> cameras;
  std::vector<ObjectiveValue> trace;
  double q_after = 0.0;
  bool fallback_used = false;
};

// Reuses a previous slot's decision under the current capacities: resources
// are rescaled proportionally per server and LCFS-P is forced where FCFS
// would now be unstable. Throws InfeasibleError if the old decision cannot
// be mapped onto the current fleet.
SlotDecision fallback_rescale(const ScenarioState& state,
                              const SlotDecision& previous);

// One full slot of the online optimizer: server selection, per-server BCD,
// then the virtual-queue update with the decision's predicted mean
// accuracy. If solving fails and prev_decision is given, reuses its configs
// with per-server proportionally rescaled resources (LCFS-P forced where
// FCFS would now be unstable) and flags fallback_used.
StepOutcome lbcd_step(ScenarioState& state,
                      const SlotDecision* prev_decision = nullptr);

// Long-run performance bounds of the drift-plus-penalty scheme.
struct LongRunBoundInputs {
  double a_opt_estimate = 0.0;   // best achievable mean age (estimate)
  double phi_max = 0.0;          // worst per-slot optimality gap (estimate)
  double a_max = 0.0;            // largest per-slot mean age observed
  double epsilon = 0.0;          // accuracy slack of some feasible policy
};

struct BoundReport {
  bool partial = false;          // some estimate was missing (NaN)
  double aopi_time_avg = 0.0;
  double aopi_bound = 0.0;
  bool aopi_ok = false;
  double accuracy_time_avg = 0.0;
  double accuracy_bound = 0.0;
  bool accuracy_ok = false;
};

// Checks the time-averaged series against
//   mean age  <= a_opt + (1/2 + phi_max) / v
//   mean accuracy >= p_min - (1/2 + v * a_max) / epsilon
// Missing (NaN) estimates mark the report partial and skip that side.
BoundReport long_run_bound_report(const std::vector<double>& slot_mean_aopi,
                                  const std::vector<double>& slot_mean_accuracy,
                                  const LongRunBoundInputs& bound, double v,
                                  double p_min);

}  // namespace aopi
