#include "aopi/model.hpp"

#include <cmath>
#include <sstream>

namespace aopi {

std::string to_string(Policy p) {
  return p == Policy::kFcfs ? "fcfs" : "lcfsp";
}

Policy policy_from_string(const std::string& s) {
  if (s == "fcfs") return Policy::kFcfs;
  if (s == "lcfsp") return Policy::kLcfsp;
  throw std::invalid_argument("unknown policy '" + s + "'");
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) {
    std::ostringstream os;
    os << name << " must be positive, got " << v;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

double spectral_efficiency(const LinkParams& link) {
  require_positive(link.tx_power_w, "tx_power_w");
  require_positive(link.channel_gain, "channel_gain");
  require_positive(link.noise_power_w, "noise_power_w");
  const double snr = link.tx_power_w * link.channel_gain / link.noise_power_w;
  return std::log2(1.0 + snr);
}

double transmission_rate(double bandwidth_hz, const LinkParams& link,
                         int resolution_px) {
  if (bandwidth_hz < 0.0) {
    throw std::invalid_argument("bandwidth_hz must be nonnegative");
  }
  require_positive(link.bits_per_pixel_sq, "bits_per_pixel_sq");
  require_positive(double(resolution_px), "resolution_px");
  const double frame_bits =
      link.bits_per_pixel_sq * double(resolution_px) * double(resolution_px);
  return bandwidth_hz * spectral_efficiency(link) / frame_bits;
}

double frame_flops(const VideoConfig& config, const ComplexityProfile& prof) {
  if (config.model >= prof.flops_at_ref.size()) {
    throw std::out_of_range("model index " + std::to_string(config.model) +
                            " outside catalog of size " +
                            std::to_string(prof.flops_at_ref.size()));
  }
  require_positive(prof.ref_resolution_px, "ref_resolution_px");
  require_positive(double(config.resolution_px), "resolution_px");
  const double scale = double(config.resolution_px) / prof.ref_resolution_px;
  return prof.flops_at_ref[config.model] * scale * scale;
}

double computation_rate(double compute_flops, const VideoConfig& config,
                        const ComplexityProfile& prof) {
  if (compute_flops < 0.0) {
    throw std::invalid_argument("compute_flops must be nonnegative");
  }
  return compute_flops / frame_flops(config, prof);
}

double accuracy(const VideoConfig& config, const AccuracyProfile& prof) {
  if (config.model >= prof.ceiling.size()) {
    throw std::out_of_range("model index " + std::to_string(config.model) +
                            " outside catalog of size " +
                            std::to_string(prof.ceiling.size()));
  }
  require_positive(prof.ref_resolution_px, "ref_resolution_px");
  require_positive(prof.content_difficulty, "content_difficulty");
  require_positive(double(config.resolution_px), "resolution_px");
  const double expo = prof.content_difficulty * double(config.resolution_px) /
                      prof.ref_resolution_px;
  const double value = prof.ceiling[config.model] * (1.0 - std::exp(-expo));
  if (value < 0.0) return 0.0;
  if (value > 1.0) return 1.0;
  return value;
}

FeasibilityReport check_feasible(const SlotDecision& decision,
                                 const std::vector<EdgeServerCapacity>& servers,
                                 const Fleet& fleet) {
  const std::size_t n = fleet.cameras();
  if (decision.server.size() != n || decision.config.size() != n ||
      decision.bandwidth_hz.size() != n || decision.compute_flops.size() != n) {
    throw std::invalid_argument(
        "decision dimensions do not match the camera count");
  }

  FeasibilityReport report;
  std::vector<double> used_b(servers.size(), 0.0);
  std::vector<double> used_c(servers.size(), 0.0);

  for (std::size_t cam = 0; cam < n; ++cam) {
    const VideoConfig& cfg = decision.config[cam];
    const std::size_t srv = decision.server[cam];
    if (srv >= servers.size()) {
      report.violations.push_back({ViolationKind::kServerOutOfRange, cam, srv,
                                   "server index outside fleet"});
      continue;
    }
    bool known_resolution = false;
    for (int r : fleet.resolutions_px) {
      if (r == cfg.resolution_px) known_resolution = true;
    }
    if (!known_resolution) {
      report.violations.push_back(
          {ViolationKind::kResolutionUnknown, cam, srv,
           std::to_string(cfg.resolution_px) + "px not in catalog"});
      continue;
    }
    if (cfg.model >= fleet.models()) {
      report.violations.push_back({ViolationKind::kModelUnknown, cam, srv,
                                   "model index outside catalog"});
      continue;
    }
    if (decision.bandwidth_hz[cam] < 0.0 || decision.compute_flops[cam] < 0.0) {
      report.violations.push_back({ViolationKind::kNegativeAllocation, cam, srv,
                                   "negative resource allocation"});
      continue;
    }
    used_b[srv] += decision.bandwidth_hz[cam];
    used_c[srv] += decision.compute_flops[cam];

    if (cfg.policy == Policy::kFcfs) {
      const double lambda = transmission_rate(decision.bandwidth_hz[cam],
                                              fleet.links[cam],
                                              cfg.resolution_px);
      const double mu =
          computation_rate(decision.compute_flops[cam], cfg, fleet.complexity);
      if (!(lambda < mu)) {
        std::ostringstream os;
        os << "fcfs requires lambda < mu, got lambda=" << lambda
           << " mu=" << mu;
        report.violations.push_back(
            {ViolationKind::kFcfsUnstable, cam, srv, os.str()});
      }
    }
  }

  for (std::size_t srv = 0; srv < servers.size(); ++srv) {
    if (used_b[srv] > servers[srv].bandwidth_hz * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "bandwidth " << used_b[srv] << " Hz exceeds capacity "
         << servers[srv].bandwidth_hz << " Hz on server " << srv;
      report.violations.push_back(
          {ViolationKind::kBandwidthOverflow, 0, srv, os.str()});
    }
    if (used_c[srv] > servers[srv].compute_flops * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "compute " << used_c[srv] << " FLOPS exceeds capacity "
         << servers[srv].compute_flops << " FLOPS on server " << srv;
      report.violations.push_back(
          {ViolationKind::kComputeOverflow, 0, srv, os.str()});
    }
  }
  return report;
}

}  // namespace aopi
