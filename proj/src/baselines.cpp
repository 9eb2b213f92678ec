#include "aopi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace aopi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void finish_outcome(const ScenarioState& state, StepOutcome& out) {
  const std::size_t n = state.fleet.cameras();
  out.cameras.clear();
  out.cameras.reserve(n);
  for (std::size_t cam = 0; cam < n; ++cam) {
    out.cameras.push_back(evaluate_camera(state, cam, out.decision.config[cam],
                                          out.decision.bandwidth_hz[cam],
                                          out.decision.compute_flops[cam]));
  }
  out.objective = evaluate_decision(state, out.decision);
  out.q_after = 0.0;
}

}  // namespace

StepOutcome dos_step(const ScenarioState& state,
                     const SlotDecision* prev_decision) {
  ScenarioState local = state;
  local.queue.value = 0.0;
  StepOutcome out;
  BcdOptions opts;
  opts.rule = ConfigRule::kAccuracyMinusAge;
  opts.force_q_zero = true;
  try {
    out.assignment = select_servers(local);
    BcdResult solved = bcd_solve(local, out.assignment, opts);
    out.decision = std::move(solved.decision);
  } catch (const InfeasibleError&) {
    if (prev_decision == nullptr) throw;
    out.fallback_used = true;
    out.decision = fallback_rescale(local, *prev_decision);
    out.assignment = out.decision.server;
  }
  finish_outcome(local, out);
  out.objective.objective =
      out.objective.mean_aopi - out.objective.mean_accuracy;
  return out;
}

JcabResult jcab_step(const ScenarioState& state, const JcabParams& params,
                     const SlotDecision* prev_decision) {
  if (!(params.latency_budget_s > 0.0)) {
    throw std::invalid_argument("latency budget must be positive");
  }
  ScenarioState local = state;
  local.queue.value = 0.0;
  const Fleet& fleet = local.fleet;
  const std::size_t n = fleet.cameras();
  if (fleet.resolutions_px.empty() || fleet.models() == 0) {
    throw std::invalid_argument("empty resolution or model catalog");
  }

  JcabResult res;
  StepOutcome& out = res.outcome;
  SlotDecision& d = out.decision;
  try {
    out.assignment = select_servers(local);
    d.server = out.assignment;
    d.config.assign(n, VideoConfig{fleet.resolutions_px.front(),
                                   Policy::kLcfsp, 0});
    d.bandwidth_hz.assign(n, 0.0);
    d.compute_flops.assign(n, 0.0);

    std::vector<std::size_t> count(local.servers.size(), 0);
    for (std::size_t srv : d.server) ++count[srv];

    // Equal-split candidate allocation used only for picking configs.
    for (std::size_t cam = 0; cam < n; ++cam) {
      const std::size_t srv = d.server[cam];
      if (count[srv] == 0) continue;
      d.bandwidth_hz[cam] =
          local.servers[srv].bandwidth_hz / double(count[srv]);
      d.compute_flops[cam] =
          local.servers[srv].compute_flops / double(count[srv]);
    }

    for (std::size_t cam = 0; cam < n; ++cam) {
      double best_p = -kInf;
      double min_latency = kInf;
      VideoConfig best_cfg = d.config[cam];
      VideoConfig fastest_cfg = d.config[cam];
      for (int r : fleet.resolutions_px) {
        for (std::size_t m = 0; m < fleet.models(); ++m) {
          const VideoConfig cand{r, Policy::kLcfsp, m};
          const double lambda = transmission_rate(
              d.bandwidth_hz[cam], fleet.links[cam], r);
          const double mu =
              computation_rate(d.compute_flops[cam], cand, fleet.complexity);
          const double latency =
              (lambda > 0.0 && mu > 0.0) ? 1.0 / lambda + 1.0 / mu : kInf;
          if (latency < min_latency) {
            min_latency = latency;
            fastest_cfg = cand;
          }
          if (latency <= params.latency_budget_s) {
            const double p = accuracy(cand, fleet.accuracy[cam]);
            if (p > best_p) {
              best_p = p;
              best_cfg = cand;
            }
          }
        }
      }
      d.config[cam] = best_p > -kInf ? best_cfg : fastest_cfg;
    }

    // Bandwidth: minimize total expected transmission latency per server.
    // With latency sum_i w_i / b_i the optimum splits b_i ~ sqrt(w_i).
    std::vector<std::vector<std::size_t>> groups(local.servers.size());
    for (std::size_t cam = 0; cam < n; ++cam) {
      groups[d.server[cam]].push_back(cam);
    }
    for (std::size_t s = 0; s < groups.size(); ++s) {
      if (groups[s].empty()) continue;
      double root_sum = 0.0;
      std::vector<double> root(groups[s].size());
      double flops_sum = 0.0;
      std::vector<double> flops(groups[s].size());
      for (std::size_t i = 0; i < groups[s].size(); ++i) {
        const std::size_t cam = groups[s][i];
        const double per_hz = transmission_rate(
            1.0, fleet.links[cam], d.config[cam].resolution_px);
        root[i] = std::sqrt(1.0 / per_hz);
        root_sum += root[i];
        flops[i] = frame_flops(d.config[cam], fleet.complexity);
        flops_sum += flops[i];
      }
      for (std::size_t i = 0; i < groups[s].size(); ++i) {
        const std::size_t cam = groups[s][i];
        d.bandwidth_hz[cam] =
            local.servers[s].bandwidth_hz * root[i] / root_sum;
        d.compute_flops[cam] =
            local.servers[s].compute_flops * flops[i] / flops_sum;
      }
    }

    // Policy: whichever discipline gives the lower age at the final rates.
    for (std::size_t cam = 0; cam < n; ++cam) {
      VideoConfig fcfs_cfg = d.config[cam];
      fcfs_cfg.policy = Policy::kFcfs;
      VideoConfig lcfsp_cfg = d.config[cam];
      lcfsp_cfg.policy = Policy::kLcfsp;
      const double a_f =
          evaluate_camera(local, cam, fcfs_cfg, d.bandwidth_hz[cam],
                          d.compute_flops[cam])
              .aopi;
      const double a_l =
          evaluate_camera(local, cam, lcfsp_cfg, d.bandwidth_hz[cam],
                          d.compute_flops[cam])
              .aopi;
      d.config[cam] = a_f < a_l ? fcfs_cfg : lcfsp_cfg;
    }
  } catch (const InfeasibleError&) {
    if (prev_decision == nullptr) throw;
    out.fallback_used = true;
    out.decision = fallback_rescale(local, *prev_decision);
    out.assignment = out.decision.server;
  }

  finish_outcome(local, out);
  res.within_budget.assign(n, false);
  for (std::size_t cam = 0; cam < n; ++cam) {
    const CameraEval& ev = out.cameras[cam];
    if (ev.lambda > 0.0 && ev.mu > 0.0) {
      const double latency = 1.0 / ev.lambda + 1.0 / ev.mu;
      res.within_budget[cam] =
          latency <= params.latency_budget_s * (1.0 + 1e-9);
    }
  }
  return res;
}

StepOutcome min_step(const ScenarioState& state) {
  ScenarioState pooled = state;
  pooled.queue.value = 0.0;
  double tot_b = 0.0;
  double tot_c = 0.0;
  for (const EdgeServerCapacity& s : state.servers) {
    tot_b += s.bandwidth_hz;
    tot_c += s.compute_flops;
  }
  pooled.servers = {EdgeServerCapacity{tot_b, tot_c}};

  StepOutcome out;
  out.assignment.assign(state.fleet.cameras(), 0);
  BcdOptions opts;
  opts.force_q_zero = true;
  BcdResult solved = bcd_solve(pooled, out.assignment, opts);
  out.decision = std::move(solved.decision);
  out.trace = std::move(solved.trace);
  finish_outcome(pooled, out);
  return out;
}

}  // namespace aopi
