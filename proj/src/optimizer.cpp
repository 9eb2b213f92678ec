#include "aopi/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "aopi/analytics.hpp"

namespace aopi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::size_t(-1);

InfeasibleError server_infeasible(std::size_t server, const std::string& why) {
  std::ostringstream os;
  os << "server " << server << ": " << why;
  InfeasibleError err(os.str());
  err.server = server;
  return err;
}

// Splits one unit of budget across per-camera shares minimizing a sum of
// convex ages. phi(i, x) is the derivative of camera i's age with respect
// to its own share, strictly increasing on (lo_i, hi_i] and -inf-like as
// the share vanishes. At budget price nu >= 0 the optimal share solves
// phi = -nu clamped to [lo_i, hi_i]; the price rises by bisection until the
// pooled shares fit the budget (sum lo <= 1 assumed, up to FP slack).
std::vector<double> dual_split(
    const std::vector<double>& lo, const std::vector<double>& hi,
    const std::function<double(std::size_t, double)>& phi, double tol,
    int max_iters) {
  const std::size_t n = lo.size();
  const int iters = std::min(max_iters, 200);
  auto share_at = [&](std::size_t i, double nu) {
    double a = lo[i];
    double b = hi[i];
    if (!(b > a)) return b;
    if (phi(i, b) <= -nu) return b;
    if (a > 0.0 && phi(i, a) >= -nu) return a;
    for (int it = 0; it < iters && b - a > tol * std::max(1.0, b); ++it) {
      const double m = 0.5 * (a + b);
      if (phi(i, m) < -nu) {
        a = m;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  };
  auto pool = [&](double nu) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += share_at(i, nu);
    return sum;
  };
  std::vector<double> x(n);
  double nu = 0.0;
  if (pool(0.0) > 1.0) {
    double nu_lo = 0.0;
    double nu_hi = 1.0;
    for (int it = 0; it < 200 && pool(nu_hi) > 1.0; ++it) nu_hi *= 2.0;
    for (int it = 0; it < iters && nu_hi - nu_lo > tol * nu_hi; ++it) {
      const double m = 0.5 * (nu_lo + nu_hi);
      if (pool(m) > 1.0) {
        nu_lo = m;
      } else {
        nu_hi = m;
      }
    }
    nu = nu_hi;
  }
  for (std::size_t i = 0; i < n; ++i) x[i] = share_at(i, nu);
  return x;
}

std::vector<std::vector<std::size_t>> cameras_by_server(
    const SlotDecision& decision, std::size_t servers) {
  std::vector<std::vector<std::size_t>> out(servers);
  for (std::size_t cam = 0; cam < decision.cameras(); ++cam) {
    out[decision.server[cam]].push_back(cam);
  }
  return out;
}

ObjectiveValue evaluate_with_q(const ScenarioState& state,
                               const SlotDecision& decision, double q) {
  ObjectiveValue val;
  const std::size_t n = decision.cameras();
  if (n == 0) return val;
  double age_sum = 0.0;
  double acc_sum = 0.0;
  for (std::size_t cam = 0; cam < n; ++cam) {
    const CameraEval ev =
        evaluate_camera(state, cam, decision.config[cam],
                        decision.bandwidth_hz[cam], decision.compute_flops[cam]);
    age_sum += ev.aopi;
    acc_sum += ev.p;
  }
  val.mean_aopi = age_sum / double(n);
  val.mean_accuracy = acc_sum / double(n);
  val.drift_penalty = -q * val.mean_accuracy + state.params.v * val.mean_aopi;
  val.objective = val.drift_penalty;
  return val;
}

// Per-camera tuple selection under the drift-plus-penalty rule. With q = 0
// the comparison is the raw age, making the argmin exactly independent of v.
void pick_config_drift(const ScenarioState& state, std::size_t cam,
                       double q, SlotDecision& decision) {
  const Fleet& fleet = state.fleet;
  const double b = decision.bandwidth_hz[cam];
  const double c = decision.compute_flops[cam];
  double best = kInf;
  VideoConfig best_cfg = decision.config[cam];
  bool first = true;
  for (int r : fleet.resolutions_px) {
    for (std::size_t m = 0; m < fleet.models(); ++m) {
      for (Policy pol : {Policy::kLcfsp, Policy::kFcfs}) {
        VideoConfig cfg{r, pol, m};
        const CameraEval ev = evaluate_camera(state, cam, cfg, b, c);
        const double score =
            q == 0.0 ? ev.aopi : -q * ev.p + state.params.v * ev.aopi;
        if (first || score < best) {
          best = score;
          best_cfg = cfg;
          first = false;
        }
      }
    }
  }
  decision.config[cam] = best_cfg;
}

// DOS hybrid rule: resolution maximizes accuracy minus age at the current
// policy/model; policy and model then minimize the age at that resolution.
void pick_config_accuracy_minus_age(const ScenarioState& state,
                                    std::size_t cam, SlotDecision& decision) {
  const Fleet& fleet = state.fleet;
  const double b = decision.bandwidth_hz[cam];
  const double c = decision.compute_flops[cam];
  VideoConfig cfg = decision.config[cam];

  double best = kInf;
  int best_r = cfg.resolution_px;
  bool first = true;
  for (int r : fleet.resolutions_px) {
    VideoConfig cand = cfg;
    cand.resolution_px = r;
    const CameraEval ev = evaluate_camera(state, cam, cand, b, c);
    const double score = ev.aopi - ev.p;
    if (first || score < best) {
      best = score;
      best_r = r;
      first = false;
    }
  }
  cfg.resolution_px = best_r;

  double best_age = kInf;
  VideoConfig best_cfg = cfg;
  first = true;
  for (std::size_t m = 0; m < fleet.models(); ++m) {
    for (Policy pol : {Policy::kLcfsp, Policy::kFcfs}) {
      VideoConfig cand{cfg.resolution_px, pol, m};
      const CameraEval ev = evaluate_camera(state, cam, cand, b, c);
      if (first || ev.aopi < best_age) {
        best_age = ev.aopi;
        best_cfg = cand;
        first = false;
      }
    }
  }
  decision.config[cam] = best_cfg;
}

void resource_blocks(const ScenarioState& state, SlotDecision& decision) {
  optimize_bandwidth(state, decision);
  optimize_compute(state, decision);
}

}  // namespace

void queue_update(VirtualQueue& vq, double mean_accuracy) {
  vq.value = std::max(vq.value - mean_accuracy + vq.p_min, 0.0);
  vq.history.emplace_back(vq.value, mean_accuracy);
}

CameraEval evaluate_camera(const ScenarioState& state, std::size_t camera,
                           const VideoConfig& config, double bandwidth_hz,
                           double compute_flops) {
  const Fleet& fleet = state.fleet;
  CameraEval ev;
  ev.lambda = transmission_rate(bandwidth_hz, fleet.links[camera],
                                config.resolution_px);
  ev.mu = computation_rate(compute_flops, config, fleet.complexity);
  ev.p = accuracy(config, fleet.accuracy[camera]);
  const double eps = state.params.epsilon_stability;
  if (!(ev.lambda > 0.0) || !(ev.mu > 0.0) || !(ev.p > 0.0)) {
    ev.aopi = kInf;
    return ev;
  }
  if (config.policy == Policy::kFcfs) {
    if (ev.lambda > (1.0 - eps) * ev.mu) {
      ev.aopi = kInf;
    } else {
      ev.aopi = aopi_fcfs(ev.lambda, ev.mu, ev.p);
    }
  } else {
    ev.aopi = aopi_lcfsp(ev.lambda, ev.mu, ev.p);
  }
  return ev;
}

ObjectiveValue evaluate_decision(const ScenarioState& state,
                                 const SlotDecision& decision) {
  return evaluate_with_q(state, decision, state.queue.value);
}

void optimize_configs(const ScenarioState& state, SlotDecision& decision) {
  for (std::size_t cam = 0; cam < decision.cameras(); ++cam) {
    pick_config_drift(state, cam, state.queue.value, decision);
  }
}

void optimize_bandwidth(const ScenarioState& state, SlotDecision& decision) {
  const double eps = state.params.epsilon_stability;
  const auto groups = cameras_by_server(decision, state.servers.size());
  for (std::size_t s = 0; s < groups.size(); ++s) {
    const auto& cams = groups[s];
    if (cams.empty()) continue;
    const double budget = state.servers[s].bandwidth_hz;
    if (!(budget > 0.0)) {
      throw server_infeasible(s, "zero bandwidth with assigned cameras");
    }
    const std::size_t n = cams.size();
    std::vector<double> lo(n, 0.0), hi(n, 1.0), mu(n), rate_per_hz(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cam = cams[i];
      const VideoConfig& cfg = decision.config[cam];
      mu[i] = computation_rate(decision.compute_flops[cam], cfg,
                               state.fleet.complexity);
      rate_per_hz[i] = transmission_rate(1.0, state.fleet.links[cam],
                                         cfg.resolution_px);
      p[i] = accuracy(cfg, state.fleet.accuracy[cam]);
      if (!(mu[i] > 0.0) || !(p[i] > 0.0)) {
        hi[i] = 0.0;  // dead camera: age is infinite at any share
      } else if (cfg.policy == Policy::kFcfs) {
        hi[i] = std::min(1.0, (1.0 - eps) * mu[i] / (rate_per_hz[i] * budget));
      }
    }
    auto objective = [&](const std::vector<double>& shares) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cam = cams[i];
        total += evaluate_camera(state, cam, decision.config[cam],
                                 shares[i] * budget,
                                 decision.compute_flops[cam])
                     .aopi;
      }
      return total;
    };
    auto phi = [&](std::size_t i, double share) {
      const std::size_t cam = cams[i];
      const double scale = rate_per_hz[i] * budget;
      double lambda = scale * share;
      if (decision.config[cam].policy == Policy::kFcfs) {
        lambda = std::min(lambda, (1.0 - eps) * mu[i]);
        return aopi_fcfs_dlambda(lambda, mu[i], p[i]) * scale;
      }
      return aopi_lcfsp_dlambda(lambda, mu[i], p[i]) * scale;
    };
    const std::vector<double> x = dual_split(
        lo, hi, phi, state.params.solver_tol, state.params.max_solver_iters);
    std::vector<double> old(n);
    for (std::size_t i = 0; i < n; ++i) {
      old[i] = decision.bandwidth_hz[cams[i]] / budget;
    }
    const double f_old = objective(old);
    if (std::isfinite(f_old) && !(objective(x) <= f_old)) {
      continue;  // keep the incumbent split rather than degrade it
    }
    for (std::size_t i = 0; i < n; ++i) {
      decision.bandwidth_hz[cams[i]] = x[i] * budget;
    }
  }
}

void optimize_compute(const ScenarioState& state, SlotDecision& decision) {
  const double eps = state.params.epsilon_stability;
  const auto groups = cameras_by_server(decision, state.servers.size());
  for (std::size_t s = 0; s < groups.size(); ++s) {
    const auto& cams = groups[s];
    if (cams.empty()) continue;
    const double budget = state.servers[s].compute_flops;
    if (!(budget > 0.0)) {
      throw server_infeasible(s, "zero compute with assigned cameras");
    }
    const std::size_t n = cams.size();
    std::vector<double> lo(n, 0.0), hi(n, 1.0), lambda(n), flops(n), p(n);
    double floor_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cam = cams[i];
      const VideoConfig& cfg = decision.config[cam];
      lambda[i] = transmission_rate(decision.bandwidth_hz[cam],
                                    state.fleet.links[cam], cfg.resolution_px);
      flops[i] = frame_flops(cfg, state.fleet.complexity);
      p[i] = accuracy(cfg, state.fleet.accuracy[cam]);
      if (!(lambda[i] > 0.0) || !(p[i] > 0.0)) {
        hi[i] = 0.0;  // dead camera: age is infinite at any share
      } else if (cfg.policy == Policy::kFcfs) {
        lo[i] = lambda[i] * flops[i] / ((1.0 - eps) * budget);
      }
      floor_sum += lo[i];
    }
    if (floor_sum > 1.0 + 1e-12) {
      throw server_infeasible(s, "stability floors exceed compute capacity");
    }
    auto objective = [&](const std::vector<double>& shares) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cam = cams[i];
        total += evaluate_camera(state, cam, decision.config[cam],
                                 decision.bandwidth_hz[cam],
                                 shares[i] * budget)
                     .aopi;
      }
      return total;
    };
    auto phi = [&](std::size_t i, double share) {
      const std::size_t cam = cams[i];
      const double scale = budget / flops[i];
      double mu = scale * share;
      if (decision.config[cam].policy == Policy::kFcfs) {
        mu = std::max(mu, lambda[i] / (1.0 - eps));
        return aopi_fcfs_dmu(lambda[i], mu, p[i]) * scale;
      }
      return aopi_lcfsp_dmu(lambda[i], mu, p[i]) * scale;
    };
    const std::vector<double> x = dual_split(
        lo, hi, phi, state.params.solver_tol, state.params.max_solver_iters);
    std::vector<double> old(n);
    for (std::size_t i = 0; i < n; ++i) {
      old[i] = decision.compute_flops[cams[i]] / budget;
    }
    const double f_old = objective(old);
    if (std::isfinite(f_old) && !(objective(x) <= f_old)) {
      continue;  // keep the incumbent split rather than degrade it
    }
    for (std::size_t i = 0; i < n; ++i) {
      decision.compute_flops[cams[i]] = x[i] * budget;
    }
  }
}

BcdResult bcd_solve(const ScenarioState& state,
                    const std::vector<std::size_t>& assignment,
                    const BcdOptions& opts) {
  const std::size_t n = state.fleet.cameras();
  if (assignment.size() != n) {
    throw std::invalid_argument("assignment size does not match camera count");
  }
  for (std::size_t srv : assignment) {
    if (srv >= state.servers.size()) {
      throw std::invalid_argument("assignment names an unknown server");
    }
  }
  if (state.fleet.resolutions_px.empty() || state.fleet.models() == 0) {
    throw std::invalid_argument("empty resolution or model catalog");
  }

  ScenarioState local = state;
  if (opts.force_q_zero) local.queue.value = 0.0;
  const double q = local.queue.value;

  BcdResult res;
  SlotDecision& d = res.decision;
  if (opts.init != nullptr) {
    d = *opts.init;
    if (d.cameras() != n) {
      throw std::invalid_argument("warm-start decision has wrong dimensions");
    }
    d.server = assignment;
  } else {
    d.server = assignment;
    std::size_t cheapest = 0;
    for (std::size_t m = 1; m < local.fleet.models(); ++m) {
      if (local.fleet.complexity.flops_at_ref[m] <
          local.fleet.complexity.flops_at_ref[cheapest]) {
        cheapest = m;
      }
    }
    d.config.assign(n, VideoConfig{local.fleet.resolutions_px.front(),
                                   Policy::kLcfsp, cheapest});
    d.bandwidth_hz.assign(n, 0.0);
    d.compute_flops.assign(n, 0.0);
    std::vector<std::size_t> count(local.servers.size(), 0);
    for (std::size_t cam = 0; cam < n; ++cam) ++count[assignment[cam]];
    for (std::size_t cam = 0; cam < n; ++cam) {
      const std::size_t srv = assignment[cam];
      d.bandwidth_hz[cam] =
          local.servers[srv].bandwidth_hz / double(count[srv]);
      d.compute_flops[cam] =
          local.servers[srv].compute_flops / double(count[srv]);
    }
  }

  const bool dos_rule = opts.rule == ConfigRule::kAccuracyMinusAge;
  auto record = [&]() {
    ObjectiveValue val = evaluate_with_q(local, d, q);
    if (dos_rule) val.objective = val.mean_aopi - val.mean_accuracy;
    res.trace.push_back(val);
  };

  record();
  double prev_obj = res.trace.back().objective;
  for (int iter = 0; iter < local.params.max_bcd_iters; ++iter) {
    res.iterations = iter + 1;
    for (std::size_t cam = 0; cam < n; ++cam) {
      if (dos_rule) {
        pick_config_accuracy_minus_age(local, cam, d);
      } else {
        pick_config_drift(local, cam, q, d);
      }
    }
    record();
    try {
      resource_blocks(local, d);
    } catch (const InfeasibleError& err) {
      if (err.server == kNone) throw;
      // Re-run the resource blocks with LCFS-P forced on the stuck server.
      for (std::size_t cam = 0; cam < n; ++cam) {
        if (d.server[cam] == err.server) {
          d.config[cam].policy = Policy::kLcfsp;
        }
      }
      resource_blocks(local, d);
    }
    record();
    const double cur = res.trace.back().objective;
    if (std::abs(prev_obj - cur) <=
        local.params.bcd_rel_tol * std::max(1.0, std::abs(cur))) {
      break;
    }
    prev_obj = cur;
  }
  return res;
}

std::vector<std::size_t> select_servers(const ScenarioState& state) {
  const std::size_t n = state.fleet.cameras();
  const std::size_t servers = state.servers.size();
  if (servers == 0) throw std::invalid_argument("no servers in scenario");
  double tot_b = 0.0;
  double tot_c = 0.0;
  for (const EdgeServerCapacity& s : state.servers) {
    tot_b += s.bandwidth_hz;
    tot_c += s.compute_flops;
  }
  if (!(tot_b > 0.0) || !(tot_c > 0.0)) {
    throw InfeasibleError("fleet has zero total bandwidth or compute");
  }

  ScenarioState pooled = state;
  pooled.servers = {EdgeServerCapacity{tot_b, tot_c}};
  const BcdResult ideal =
      bcd_solve(pooled, std::vector<std::size_t>(n, 0), {});

  std::vector<double> phi(n);
  for (std::size_t cam = 0; cam < n; ++cam) {
    phi[cam] = ideal.decision.bandwidth_hz[cam] / tot_b +
               ideal.decision.compute_flops[cam] / tot_c;
  }
  std::vector<std::size_t> cam_order(n);
  std::iota(cam_order.begin(), cam_order.end(), 0);
  std::stable_sort(cam_order.begin(), cam_order.end(),
                   [&](std::size_t a, std::size_t b) { return phi[a] > phi[b]; });

  std::vector<double> psi(servers);
  for (std::size_t s = 0; s < servers; ++s) {
    psi[s] = state.servers[s].bandwidth_hz / tot_b +
             state.servers[s].compute_flops / tot_c;
  }
  std::vector<std::size_t> srv_order(servers);
  std::iota(srv_order.begin(), srv_order.end(), 0);
  std::stable_sort(srv_order.begin(), srv_order.end(),
                   [&](std::size_t a, std::size_t b) { return psi[a] > psi[b]; });

  std::vector<double> rem_b(servers), rem_c(servers);
  for (std::size_t s = 0; s < servers; ++s) {
    rem_b[s] = state.servers[s].bandwidth_hz;
    rem_c[s] = state.servers[s].compute_flops;
  }

  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t cam : cam_order) {
    const double need_b = ideal.decision.bandwidth_hz[cam];
    const double need_c = ideal.decision.compute_flops[cam];
    std::size_t chosen = kNone;
    for (std::size_t s : srv_order) {
      if (rem_b[s] >= need_b && rem_c[s] >= need_c) {
        chosen = s;
        break;
      }
    }
    if (chosen == kNone) {
      // Overflow: the server with the largest normalized remainder.
      double best = -kInf;
      for (std::size_t s = 0; s < servers; ++s) {
        const double remainder = rem_b[s] / tot_b + rem_c[s] / tot_c;
        if (remainder > best) {
          best = remainder;
          chosen = s;
        }
      }
    }
    assignment[cam] = chosen;
    rem_b[chosen] -= need_b;
    rem_c[chosen] -= need_c;
  }
  return assignment;
}

SlotDecision fallback_rescale(const ScenarioState& state,
                              const SlotDecision& prev) {
  const std::size_t n = prev.cameras();
  if (n != state.fleet.cameras()) {
    throw InfeasibleError("fallback decision has wrong camera count");
  }
  for (std::size_t srv : prev.server) {
    if (srv >= state.servers.size()) {
      throw InfeasibleError("fallback decision names an unknown server");
    }
  }
  SlotDecision d = prev;
  std::vector<double> sum_b(state.servers.size(), 0.0);
  std::vector<double> sum_c(state.servers.size(), 0.0);
  for (std::size_t cam = 0; cam < n; ++cam) {
    sum_b[d.server[cam]] += d.bandwidth_hz[cam];
    sum_c[d.server[cam]] += d.compute_flops[cam];
  }
  for (std::size_t cam = 0; cam < n; ++cam) {
    const std::size_t srv = d.server[cam];
    const double fb =
        sum_b[srv] > 0.0 ? state.servers[srv].bandwidth_hz / sum_b[srv] : 0.0;
    const double fc =
        sum_c[srv] > 0.0 ? state.servers[srv].compute_flops / sum_c[srv] : 0.0;
    d.bandwidth_hz[cam] *= fb;
    d.compute_flops[cam] *= fc;
  }
  const double eps = state.params.epsilon_stability;
  for (std::size_t cam = 0; cam < n; ++cam) {
    if (d.config[cam].policy != Policy::kFcfs) continue;
    const double lambda = transmission_rate(
        d.bandwidth_hz[cam], state.fleet.links[cam],
        d.config[cam].resolution_px);
    const double mu = computation_rate(d.compute_flops[cam], d.config[cam],
                                       state.fleet.complexity);
    if (!(mu > 0.0) || lambda > (1.0 - eps) * mu) {
      d.config[cam].policy = Policy::kLcfsp;
    }
  }
  return d;
}

StepOutcome lbcd_step(ScenarioState& state, const SlotDecision* prev_decision) {
  StepOutcome out;
  try {
    out.assignment = select_servers(state);
    BcdResult solved = bcd_solve(state, out.assignment, {});
    out.decision = std::move(solved.decision);
    out.trace = std::move(solved.trace);
  } catch (const InfeasibleError&) {
    if (prev_decision == nullptr) throw;
    out.fallback_used = true;
    out.decision = fallback_rescale(state, *prev_decision);
    out.assignment = out.decision.server;
  }
  const std::size_t n = state.fleet.cameras();
  out.cameras.reserve(n);
  for (std::size_t cam = 0; cam < n; ++cam) {
    out.cameras.push_back(evaluate_camera(state, cam, out.decision.config[cam],
                                          out.decision.bandwidth_hz[cam],
                                          out.decision.compute_flops[cam]));
  }
  out.objective = evaluate_decision(state, out.decision);
  queue_update(state.queue, out.objective.mean_accuracy);
  out.q_after = state.queue.value;
  return out;
}

BoundReport long_run_bound_report(const std::vector<double>& slot_mean_aopi,
                                  const std::vector<double>& slot_mean_accuracy,
                                  const LongRunBoundInputs& bound, double v,
                                  double p_min) {
  if (!(v > 0.0)) throw std::invalid_argument("v must be positive");
  BoundReport rep;
  if (slot_mean_aopi.empty() || slot_mean_accuracy.empty()) {
    rep.partial = true;
    return rep;
  }
  const double age_avg =
      std::accumulate(slot_mean_aopi.begin(), slot_mean_aopi.end(), 0.0) /
      double(slot_mean_aopi.size());
  const double acc_avg = std::accumulate(slot_mean_accuracy.begin(),
                                         slot_mean_accuracy.end(), 0.0) /
                         double(slot_mean_accuracy.size());
  rep.aopi_time_avg = age_avg;
  rep.accuracy_time_avg = acc_avg;
  if (std::isnan(bound.a_opt_estimate) || std::isnan(bound.phi_max)) {
    rep.partial = true;
  } else {
    rep.aopi_bound = bound.a_opt_estimate + (0.5 + bound.phi_max) / v;
    rep.aopi_ok = age_avg <= rep.aopi_bound;
  }
  if (std::isnan(bound.a_max) || std::isnan(bound.epsilon) ||
      !(bound.epsilon > 0.0)) {
    rep.partial = true;
  } else {
    rep.accuracy_bound = p_min - (0.5 + v * bound.a_max) / bound.epsilon;
    rep.accuracy_ok = acc_avg >= rep.accuracy_bound;
  }
  return rep;
}

}  // namespace aopi
