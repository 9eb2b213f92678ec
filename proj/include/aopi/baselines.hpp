#pragma once

#include <vector>

#include "aopi/optimizer.hpp"

namespace aopi {

// Latency budget of the accuracy-maximizing baseline, in seconds of
// expected per-frame transmission plus computation time.
struct JcabParams {
  double latency_budget_s = 0.5;
};

struct JcabResult {
  StepOutcome outcome;
  // Per camera: final allocation keeps 1/lambda + 1/mu within the budget.
  // False both for cameras forced onto the minimum-latency config and for
  // cameras whose config lost budget feasibility after reallocation.
  std::vector<bool> within_budget;
};

// Accuracy-minus-age baseline. Shares server selection and the block
// solver with lbcd_step, but picks each camera's resolution by maximizing
// accuracy minus age, then policy and model by age alone, and ignores the
// virtual queue entirely. Resources still minimize the summed age. The
// mixed rule descends no single scalar, so no iteration trace is emitted.
// The reported objective is mean age minus mean accuracy.
StepOutcome dos_step(const ScenarioState& state,
                     const SlotDecision* prev_decision = nullptr);

// Accuracy-maximizing feed-forward baseline: per camera the highest
// accuracy (resolution, model) whose expected latency fits the budget
// under an equal split of the server's resources; bandwidth then
// minimizes total expected transmission latency in closed form, compute
// splits proportionally to per-frame work, and the queueing policy is
// whichever yields the lower age. Cameras with no in-budget config take
// the minimum-latency config. No virtual queue, no iteration trace.
JcabResult jcab_step(const ScenarioState& state, const JcabParams& params = {},
                     const SlotDecision* prev_decision = nullptr);

// Per-slot age lower bound: one virtual server pooling all capacities,
// solved with the queue forced to zero. The decision's server column
// refers to that single pooled server.
StepOutcome min_step(const ScenarioState& state);

}  // namespace aopi
