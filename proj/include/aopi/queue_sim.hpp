#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "aopi/model.hpp"

namespace aopi {

// One simulated frame. Generation of frame i+1 coincides with the arrival
// of frame i at the server (zero-wait source), so gen_time is also the
// transmission start.
struct FrameRecord {
  std::uint64_t index = 0;
  double gen_time = 0.0;
  double arrive_time = 0.0;
  std::optional<double> complete_time;   // empty when preempted
  bool accurate = false;                 // recognition outcome, completed only
};

struct SimConfig {
  AopiInputs inputs;
  std::uint64_t horizon_frames = 0;   // frames to generate, >= 1000
  double warmup_fraction = 0.1;       // leading fraction discarded
  std::uint64_t seed = 0;
  std::uint32_t camera_id = 0;        // RNG domain, keeps cameras independent
  bool keep_frame_log = false;
};

struct SimDiagnostics {
  // FCFS only: mean of (transmission time of frame i) x (waiting time of
  // frame i+1); NaN under LCFS-P.
  double mean_trans_wait_product = 0.0;
  // Completions per second over the measurement window.
  double effective_rate = 0.0;
  // First and second empirical moments of inter-departure times.
  double mean_interdeparture = 0.0;
  double mean_sq_interdeparture = 0.0;
  std::uint64_t completed_samples = 0;
};

struct SimResult {
  double mean_aopi = 0.0;        // time average over the post-warmup window
  double aopi_ci95 = 0.0;        // half-width, batch means with 50 batches
  double empirical_accuracy = 0.0;
  std::uint64_t generated = 0;
  std::uint64_t completed = 0;
  std::uint64_t preempted = 0;
  double warmup_time = 0.0;
  double end_time = 0.0;         // last completion instant
  double window_area = 0.0;      // age integral over [warmup_time, end_time]
  double full_area = 0.0;        // age integral over [0, end_time]
  SimDiagnostics diagnostics;
  std::vector<FrameRecord> frames;   // populated when keep_frame_log
};

// Simulates one camera's zero-wait source feeding an exponential server
// under the configured discipline, tracking the age of the newest
// accurately recognized frame (a fictitious accurate frame completes at
// t = 0). Exact per-frame event recurrence; three Philox streams
// (transmission, service, recognition) addressed by frame index.
SimResult simulate_single(const SimConfig& cfg);

// Relative errors of the simulated diagnostics against their closed forms.
struct DiagnosticsReport {
  double trans_wait_product_rel_err = 0.0;   // FCFS
  double effective_rate_rel_err = 0.0;       // LCFS-P
  double interdeparture_mean_rel_err = 0.0;  // LCFS-P
  double interdeparture_sq_rel_err = 0.0;    // LCFS-P
};

// Compares result.diagnostics with the closed forms at the given inputs.
// Requires at least 1e5 completed samples, else throws std::invalid_argument.
DiagnosticsReport diagnostics_check(const SimResult& result,
                                    const AopiInputs& inputs);

// Runs simulate_single for every camera of a one-slot decision, deriving
// each camera's rates and accuracy from its allocation. Per-camera failures
// are rethrown with the camera index in the message.
std::vector<SimResult> simulate_slot(const SlotDecision& decision,
                                     const Fleet& fleet, std::uint64_t seed,
                                     std::uint64_t horizon_frames,
                                     double warmup_fraction = 0.1,
                                     bool keep_frame_log = false);

}  // namespace aopi
