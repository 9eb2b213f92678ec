#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace aopi {

// Thrown when an FCFS quantity is requested at or beyond the stability
// boundary (arrival rate >= service rate).
struct InstabilityError : std::domain_error {
  using std::domain_error::domain_error;
};

// Thrown when a resource-allocation subproblem has no feasible point
// (e.g. FCFS stability floors alone exceed a server's compute budget).
// `server` identifies the offending server when the failure is local to
// one; it stays at npos for fleet-wide failures.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
  std::size_t server = std::size_t(-1);
};

// Frame-processing discipline at the edge server.
enum class Policy { kFcfs, kLcfsp };

std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);

// One camera's video configuration: a resolution and a model from the
// catalogs, plus the serving discipline.
struct VideoConfig {
  int resolution_px = 0;     // square-side pixel count r
  Policy policy = Policy::kLcfsp;
  std::size_t model = 0;     // index into the model catalog
};

// Wireless uplink description. The achievable bit rate over bandwidth b is
// b * log2(1 + tx_power * channel_gain / noise_power), and a frame at
// resolution r carries bits_per_pixel_sq * r^2 bits.
struct LinkParams {
  double tx_power_w = 0.0;
  double channel_gain = 0.0;
  double noise_power_w = 0.0;
  double bits_per_pixel_sq = 0.0;
};

// Per-frame inference cost: model m at resolution r costs
// flops_at_ref[m] * (r / ref_resolution_px)^2 FLOPs.
struct ComplexityProfile {
  std::vector<double> flops_at_ref;
  double ref_resolution_px = 0.0;
};

// Recognition accuracy: model m at resolution r under content difficulty
// beta yields ceiling[m] * (1 - exp(-beta * r / ref_resolution_px)),
// clamped to [0, 1]. Higher beta means easier content.
struct AccuracyProfile {
  std::vector<double> ceiling;
  double content_difficulty = 1.0;
  double ref_resolution_px = 0.0;
};

// Inputs of the age analysis for one camera: transmission rate lambda,
// computation rate mu (both frames/s) and recognition accuracy p.
struct AopiInputs {
  double lambda = 0.0;
  double mu = 0.0;
  double p = 1.0;
  Policy policy = Policy::kLcfsp;
};

// One edge server's per-slot resource capacities.
struct EdgeServerCapacity {
  double bandwidth_hz = 0.0;
  double compute_flops = 0.0;
};

// A full one-slot decision: for every camera, the chosen server, the video
// configuration, and the allocated share of that server's resources.
struct SlotDecision {
  std::vector<std::size_t> server;
  std::vector<VideoConfig> config;
  std::vector<double> bandwidth_hz;
  std::vector<double> compute_flops;

  std::size_t cameras() const { return server.size(); }
};

// Static description of the camera fleet and the shared catalogs, used by
// feasibility checking and by every optimizer.
struct Fleet {
  std::vector<LinkParams> links;            // one per camera
  std::vector<AccuracyProfile> accuracy;    // one per camera
  std::vector<int> resolutions_px;          // resolution catalog, ascending
  std::vector<std::string> model_names;     // model catalog labels
  ComplexityProfile complexity;             // per-model cost at reference

  std::size_t cameras() const { return links.size(); }
  std::size_t models() const { return complexity.flops_at_ref.size(); }
};

enum class ViolationKind {
  kBandwidthOverflow,
  kComputeOverflow,
  kServerOutOfRange,
  kResolutionUnknown,
  kModelUnknown,
  kNegativeAllocation,
  kFcfsUnstable,
};

struct Violation {
  ViolationKind kind;
  std::size_t camera = 0;   // camera at fault, when applicable
  std::size_t server = 0;   // server at fault, when applicable
  std::string detail;
};

struct FeasibilityReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Transmission rate in frames/s over bandwidth_hz of the given link at the
// given resolution. Zero bandwidth yields zero rate.
double transmission_rate(double bandwidth_hz, const LinkParams& link,
                         int resolution_px);

// Shannon spectral efficiency log2(1 + snr) of a link, bits/s/Hz.
double spectral_efficiency(const LinkParams& link);

// Per-frame inference cost in FLOPs of the configured model/resolution.
double frame_flops(const VideoConfig& config, const ComplexityProfile& prof);

// Computation rate in frames/s given a FLOPS allocation.
double computation_rate(double compute_flops, const VideoConfig& config,
                        const ComplexityProfile& prof);

// Recognition accuracy of the configured model/resolution, in [0, 1].
double accuracy(const VideoConfig& config, const AccuracyProfile& prof);

// Verifies a one-slot decision against server capacities and per-camera
// FCFS stability (lambda < mu when the policy is FCFS). Returns every
// violation found; does not throw on infeasibility, only on malformed
// input (mismatched dimensions).
FeasibilityReport check_feasible(const SlotDecision& decision,
                                 const std::vector<EdgeServerCapacity>& servers,
                                 const Fleet& fleet);

}  // namespace aopi
