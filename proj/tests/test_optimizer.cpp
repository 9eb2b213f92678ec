#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "aopi/analytics.hpp"
#include "aopi/optimizer.hpp"
#include "aopi/rng.hpp"

using namespace aopi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Fleet two_model_fleet(const std::vector<double>& gains, double beta = 2.0) {
  Fleet f;
  for (double g : gains) {
    f.links.push_back({1.0, g, 1.0, 1.0});
    f.accuracy.push_back({{0.80, 0.92}, beta, 640.0});
  }
  f.resolutions_px = {384, 640};
  f.model_names = {"light", "heavy"};
  f.complexity = {{1e11, 4e11}, 640.0};
  return f;
}

ScenarioState make_state(const std::vector<double>& gains,
                         std::vector<EdgeServerCapacity> servers,
                         double q = 0.0, double v = 10.0) {
  ScenarioState st;
  st.fleet = two_model_fleet(gains);
  st.servers = std::move(servers);
  st.queue.value = q;
  st.queue.p_min = 0.7;
  st.params.v = v;
  return st;
}

SlotDecision equal_split_decision(const ScenarioState& st) {
  const std::size_t n = st.fleet.cameras();
  SlotDecision d;
  d.server.assign(n, 0);
  d.config.assign(n, VideoConfig{384, Policy::kLcfsp, 0});
  d.bandwidth_hz.assign(n, st.servers[0].bandwidth_hz / double(n));
  d.compute_flops.assign(n, st.servers[0].compute_flops / double(n));
  return d;
}

// Mirrors the per-camera tuple scan: lowest-index winner under strict
// improvement, LCFS-P enumerated before FCFS.
VideoConfig brute_best_config(const ScenarioState& st, std::size_t cam,
                              const SlotDecision& d) {
  const double q = st.queue.value;
  double best = kInf;
  VideoConfig best_cfg{};
  bool first = true;
  for (int r : st.fleet.resolutions_px) {
    for (std::size_t m = 0; m < st.fleet.models(); ++m) {
      for (Policy pol : {Policy::kLcfsp, Policy::kFcfs}) {
        const VideoConfig cfg{r, pol, m};
        const CameraEval ev = evaluate_camera(st, cam, cfg, d.bandwidth_hz[cam],
                                              d.compute_flops[cam]);
        const double score =
            q == 0.0 ? ev.aopi : -q * ev.p + st.params.v * ev.aopi;
        if (first || score < best) {
          best = score;
          best_cfg = cfg;
          first = false;
        }
      }
    }
  }
  return best_cfg;
}

double age_sum(const ScenarioState& st, const SlotDecision& d) {
  double total = 0.0;
  for (std::size_t cam = 0; cam < d.cameras(); ++cam) {
    total += evaluate_camera(st, cam, d.config[cam], d.bandwidth_hz[cam],
                             d.compute_flops[cam])
                 .aopi;
  }
  return total;
}

bool same_config(const VideoConfig& a, const VideoConfig& b) {
  return a.resolution_px == b.resolution_px && a.policy == b.policy &&
         a.model == b.model;
}

}  // namespace

TEST_CASE("virtual queue update") {
  VirtualQueue vq;
  vq.value = 0.3;
  vq.p_min = 0.7;
  queue_update(vq, 0.6);
  CHECK(vq.value == doctest::Approx(0.4).epsilon(1e-12));
  queue_update(vq, 0.95);
  CHECK(vq.value == doctest::Approx(0.15).epsilon(1e-12));
  queue_update(vq, 1.0);
  CHECK(vq.value == 0.0);
  REQUIRE(vq.history.size() == 3);
  CHECK(vq.history[0].second == 0.6);
  CHECK(vq.history[1].first == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(vq.history[2].first == 0.0);
}

TEST_CASE("one-slot drift of the squared backlog is bounded") {
  RandomStream rng(5, 0, 0);
  VirtualQueue vq;
  vq.p_min = 0.7;
  for (std::uint64_t t = 0; t < 2000; ++t) {
    const double acc = rng.uniform_at(t);
    const double q = vq.value;
    queue_update(vq, acc);
    const double qn = vq.value;
    const double drift = 0.5 * (qn * qn - q * q);
    CHECK(drift <= 0.5 + q * (vq.p_min - acc) + 1e-9);
  }
}

TEST_CASE("camera evaluation guards and closed-form agreement") {
  ScenarioState st = make_state({15.0}, {{2e6, 5e11}});
  const VideoConfig lc{384, Policy::kLcfsp, 0};
  const VideoConfig fc{384, Policy::kFcfs, 0};

  CHECK(evaluate_camera(st, 0, lc, 0.0, 1e11).aopi == kInf);
  CHECK(evaluate_camera(st, 0, lc, 1e6, 0.0).aopi == kInf);

  const CameraEval ev = evaluate_camera(st, 0, lc, 1e5, 1e11);
  // b * log2(16) / 384^2 and c / (1e11 * (384/640)^2)
  CHECK(ev.lambda == doctest::Approx(4e5 / 147456.0).epsilon(1e-12));
  CHECK(ev.mu == doctest::Approx(1e11 / 3.6e10).epsilon(1e-12));
  CHECK(ev.p == doctest::Approx(0.8 * (1.0 - std::exp(-1.2))).epsilon(1e-12));
  CHECK(ev.aopi == aopi_lcfsp(ev.lambda, ev.mu, ev.p));

  const CameraEval evf = evaluate_camera(st, 0, fc, 1e5, 1e11);
  CHECK(evf.aopi == aopi_fcfs(evf.lambda, evf.mu, evf.p));

  // FCFS rejects rates inside the stability margin; LCFS-P accepts them.
  const double mu = evaluate_camera(st, 0, lc, 1e5, 1e11).mu;
  const double b_hot = mu * 0.995 * 147456.0 / 4.0;
  CHECK(evaluate_camera(st, 0, fc, b_hot, 1e11).aopi == kInf);
  CHECK(std::isfinite(evaluate_camera(st, 0, lc, b_hot, 1e11).aopi));
}

TEST_CASE("empty decision evaluates to zeros") {
  ScenarioState st = make_state({}, {{2e6, 5e11}});
  const ObjectiveValue v = evaluate_decision(st, SlotDecision{});
  CHECK(v.objective == 0.0);
  CHECK(v.mean_aopi == 0.0);
  CHECK(v.mean_accuracy == 0.0);
}

TEST_CASE("config block matches exhaustive enumeration") {
  for (double q : {0.0, 1.7}) {
    CAPTURE(q);
    ScenarioState st = make_state({15.0, 3.0, 63.0}, {{2e6, 5e11}}, q);
    RandomStream rng(11, 0, 0);
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      SlotDecision d = equal_split_decision(st);
      double wb = 0.0, wc = 0.0;
      std::vector<double> rb(3), rc(3);
      for (std::size_t i = 0; i < 3; ++i) {
        rb[i] = 0.05 + rng.uniform_at(6 * trial + i);
        rc[i] = 0.05 + rng.uniform_at(6 * trial + 3 + i);
        wb += rb[i];
        wc += rc[i];
      }
      for (std::size_t i = 0; i < 3; ++i) {
        d.bandwidth_hz[i] = st.servers[0].bandwidth_hz * rb[i] / wb;
        d.compute_flops[i] = st.servers[0].compute_flops * rc[i] / wc;
      }
      SlotDecision expect = d;
      for (std::size_t cam = 0; cam < 3; ++cam) {
        expect.config[cam] = brute_best_config(st, cam, d);
      }
      optimize_configs(st, d);
      for (std::size_t cam = 0; cam < 3; ++cam) {
        CAPTURE(cam);
        CHECK(same_config(d.config[cam], expect.config[cam]));
      }
    }
  }
}

TEST_CASE("zero backlog makes the solve independent of the age weight") {
  // One pinned iteration: the stop rule compares objectives (which scale
  // with v), but the blocks themselves are v-free when the backlog is zero.
  const std::vector<std::size_t> assignment{0, 0, 0};
  ScenarioState a = make_state({15.0, 3.0, 63.0}, {{2e6, 5e11}}, 0.0, 1.0);
  a.params.max_bcd_iters = 1;
  ScenarioState b = a;
  b.params.v = 1000.0;
  const BcdResult ra = bcd_solve(a, assignment);
  const BcdResult rb = bcd_solve(b, assignment);
  REQUIRE(ra.decision.cameras() == rb.decision.cameras());
  for (std::size_t cam = 0; cam < ra.decision.cameras(); ++cam) {
    CHECK(same_config(ra.decision.config[cam], rb.decision.config[cam]));
    CHECK(ra.decision.bandwidth_hz[cam] == rb.decision.bandwidth_hz[cam]);
    CHECK(ra.decision.compute_flops[cam] == rb.decision.compute_flops[cam]);
  }
}

TEST_CASE("bandwidth block beats a fine one-dimensional grid") {
  ScenarioState st = make_state({15.0, 15.0}, {{2e6, 5e11}});
  SlotDecision d = equal_split_decision(st);
  d.config = {{384, Policy::kLcfsp, 0}, {640, Policy::kFcfs, 1}};
  d.compute_flops = {1.5e11, 3.5e11};
  const double B = st.servers[0].bandwidth_hz;

  optimize_bandwidth(st, d);
  const double got = age_sum(st, d);
  CHECK(d.bandwidth_hz[0] >= 0.0);
  CHECK(d.bandwidth_hz[1] >= 0.0);
  CHECK(d.bandwidth_hz[0] + d.bandwidth_hz[1] <= B * (1.0 + 1e-9));

  double grid_best = kInf;
  SlotDecision probe = d;
  for (int i = 0; i <= 10000; ++i) {
    const double x = double(i) / 10000.0;
    probe.bandwidth_hz = {x * B, (1.0 - x) * B};
    grid_best = std::min(grid_best, age_sum(st, probe));
  }
  CHECK(got <= grid_best * (1.0 + 5e-3));
}

TEST_CASE("compute block beats a fine one-dimensional grid") {
  ScenarioState st = make_state({15.0, 15.0}, {{2e6, 5e11}});
  SlotDecision d = equal_split_decision(st);
  d.config = {{384, Policy::kLcfsp, 0}, {640, Policy::kFcfs, 1}};
  d.bandwidth_hz = {1.9e6, 1.0e5};
  const double C = st.servers[0].compute_flops;

  optimize_compute(st, d);
  const double got = age_sum(st, d);
  CHECK(std::isfinite(got));
  CHECK(d.compute_flops[0] + d.compute_flops[1] <= C * (1.0 + 1e-9));
  // The FCFS camera keeps its stability floor.
  const CameraEval ev1 =
      evaluate_camera(st, 1, d.config[1], d.bandwidth_hz[1], d.compute_flops[1]);
  CHECK(ev1.lambda <= (1.0 - st.params.epsilon_stability) * ev1.mu * (1 + 1e-9));

  double grid_best = kInf;
  SlotDecision probe = d;
  for (int i = 0; i <= 10000; ++i) {
    const double y = double(i) / 10000.0;
    probe.compute_flops = {y * C, (1.0 - y) * C};
    grid_best = std::min(grid_best, age_sum(st, probe));
  }
  CHECK(got <= grid_best * (1.0 + 5e-3));
}

TEST_CASE("coordinate descent never worsens its objective") {
  RandomStream rng(21, 0, 0);
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    const std::size_t n = 2 + std::size_t(trial % 3);
    std::vector<double> gains;
    for (std::size_t i = 0; i < n; ++i) {
      gains.push_back(3.0 + 60.0 * rng.uniform_at(16 * trial + i));
    }
    const std::size_t servers = 1 + std::size_t(trial % 2);
    std::vector<EdgeServerCapacity> caps;
    for (std::size_t s = 0; s < servers; ++s) {
      caps.push_back({1e6 + 2e6 * rng.uniform_at(16 * trial + 8 + s),
                      2e11 + 6e11 * rng.uniform_at(16 * trial + 10 + s)});
    }
    const double q = (trial % 2 == 0) ? 0.0 : 2.0;
    ScenarioState st = make_state(gains, caps, q);
    std::vector<std::size_t> assignment(n);
    for (std::size_t i = 0; i < n; ++i) assignment[i] = i % servers;

    const BcdResult res = bcd_solve(st, assignment);
    REQUIRE(res.trace.size() >= 2);
    CHECK(res.iterations >= 1);
    for (std::size_t k = 0; k + 1 < res.trace.size(); ++k) {
      const double prev = res.trace[k].objective;
      const double cur = res.trace[k + 1].objective;
      if (std::isinf(prev)) continue;
      CHECK(cur <= prev + 1e-9 * std::max(1.0, std::abs(prev)));
    }
    CHECK(std::isfinite(res.trace.back().objective));
    const FeasibilityReport rep =
        check_feasible(res.decision, st.servers, st.fleet);
    CHECK(rep.ok());
  }
}

TEST_CASE("coordinate descent tracks the joint brute force on a toy") {
  ScenarioState st = make_state({15.0, 63.0}, {{2e6, 5e11}}, 0.0, 10.0);
  BcdOptions opts;
  opts.force_q_zero = true;
  const BcdResult res = bcd_solve(st, {0, 0}, opts);
  const double got = res.trace.back().objective;

  const double B = st.servers[0].bandwidth_hz;
  const double C = st.servers[0].compute_flops;
  double best = kInf;
  SlotDecision probe = res.decision;
  for (int r0 : st.fleet.resolutions_px) {
    for (int r1 : st.fleet.resolutions_px) {
      for (std::size_t m0 = 0; m0 < 2; ++m0) {
        for (std::size_t m1 = 0; m1 < 2; ++m1) {
          for (Policy p0 : {Policy::kLcfsp, Policy::kFcfs}) {
            for (Policy p1 : {Policy::kLcfsp, Policy::kFcfs}) {
              probe.config = {{r0, p0, m0}, {r1, p1, m1}};
              for (int i = 1; i < 96; ++i) {
                const double x = double(i) / 96.0;
                probe.bandwidth_hz = {x * B, (1.0 - x) * B};
                for (int j = 1; j < 96; ++j) {
                  const double y = double(j) / 96.0;
                  probe.compute_flops = {y * C, (1.0 - y) * C};
                  const double v =
                      st.params.v * age_sum(st, probe) / 2.0;
                  best = std::min(best, v);
                }
              }
            }
          }
        }
      }
    }
  }
  CHECK(got <= best * (1.0 + 1e-2));
}

TEST_CASE("resource blocks reject hopeless servers") {
  ScenarioState st = make_state({15.0, 15.0}, {{0.0, 5e11}});
  SlotDecision d = equal_split_decision(st);
  d.bandwidth_hz = {0.0, 0.0};
  CHECK_THROWS_AS(optimize_bandwidth(st, d), InfeasibleError);

  ScenarioState st2 = make_state({15.0, 15.0}, {{2e6, 5e11}});
  SlotDecision d2 = equal_split_decision(st2);
  // Both cameras FCFS at rates whose stability floors outgrow the server.
  d2.config = {{384, Policy::kFcfs, 1}, {384, Policy::kFcfs, 1}};
  try {
    optimize_compute(st2, d2);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(e.server == 0);
  }

  // A zero-compute server with assigned cameras fails the whole solve.
  ScenarioState st3 = make_state({15.0, 15.0}, {{2e6, 0.0}});
  CHECK_THROWS_AS(bcd_solve(st3, {0, 0}), InfeasibleError);
}

TEST_CASE("warm start adopts configs but follows the assignment") {
  ScenarioState st = make_state({15.0, 63.0}, {{2e6, 5e11}});
  SlotDecision warm = equal_split_decision(st);
  warm.config = {{640, Policy::kLcfsp, 1}, {640, Policy::kLcfsp, 1}};
  warm.server = {7, 7};  // stale; must be overwritten by the assignment
  BcdOptions opts;
  opts.init = &warm;
  const BcdResult res = bcd_solve(st, {0, 0}, opts);
  CHECK(res.decision.server == std::vector<std::size_t>{0, 0});
  CHECK(check_feasible(res.decision, st.servers, st.fleet).ok());
}

TEST_CASE("server selection") {
  SUBCASE("single server takes everything") {
    ScenarioState st = make_state({15.0, 3.0, 63.0}, {{2e6, 5e11}});
    CHECK(select_servers(st) == std::vector<std::size_t>({0, 0, 0}));
  }

  SUBCASE("a dominant server absorbs the fleet") {
    ScenarioState st =
        make_state({15.0, 15.0, 15.0}, {{2e7, 5e12}, {2e4, 5e9}});
    CHECK(select_servers(st) == std::vector<std::size_t>({0, 0, 0}));
  }

  SUBCASE("equal twins split three equal demands first-fit") {
    ScenarioState st =
        make_state({15.0, 15.0, 15.0}, {{2e6, 5e11}, {2e6, 5e11}});
    // Each demand is a third of the pool, above half a server; the third
    // camera overflows to the largest normalized remainder (tie: server 0).
    CHECK(select_servers(st) == std::vector<std::size_t>({0, 1, 0}));
  }

  SUBCASE("errors") {
    ScenarioState st = make_state({15.0}, {});
    CHECK_THROWS_AS(select_servers(st), std::invalid_argument);
    ScenarioState st2 = make_state({15.0}, {{0.0, 0.0}});
    CHECK_THROWS_AS(select_servers(st2), InfeasibleError);
  }
}

TEST_CASE("full step updates the backlog and falls back when stuck") {
  SUBCASE("healthy slot") {
    ScenarioState st = make_state({15.0, 63.0}, {{2e6, 5e11}}, 0.05);
    const StepOutcome out = lbcd_step(st);
    CHECK(!out.fallback_used);
    CHECK(out.cameras.size() == 2);
    CHECK(std::isfinite(out.objective.objective));
    const double expect_q =
        std::max(0.05 - out.objective.mean_accuracy + 0.7, 0.0);
    CHECK(out.q_after == doctest::Approx(expect_q).epsilon(1e-12));
    CHECK(st.queue.value == out.q_after);
    CHECK(st.queue.history.size() == 1);
  }

  SUBCASE("dead capacity without a previous slot propagates") {
    ScenarioState st = make_state({15.0, 63.0}, {{0.0, 0.0}});
    CHECK_THROWS_AS(lbcd_step(st), InfeasibleError);
  }

  SUBCASE("dead capacity with a previous slot reuses it") {
    ScenarioState healthy = make_state({15.0, 63.0}, {{2e6, 5e11}});
    const StepOutcome first = lbcd_step(healthy);

    ScenarioState dead = make_state({15.0, 63.0}, {{0.0, 0.0}});
    const StepOutcome out = lbcd_step(dead, &first.decision);
    CHECK(out.fallback_used);
    CHECK(out.decision.server == first.decision.server);
    // No resources: ages blow up but accuracies survive, so the backlog
    // still updates from the predicted accuracy.
    CHECK(std::isinf(out.objective.mean_aopi));
    CHECK(out.objective.mean_accuracy > 0.0);
    CHECK(dead.queue.history.size() == 1);
  }

  SUBCASE("rescale fills the new capacity and demotes unstable fcfs") {
    ScenarioState st = make_state({15.0, 15.0}, {{2e6, 5e11}});
    SlotDecision prev;
    prev.server = {0, 0};
    prev.config = {{384, Policy::kFcfs, 0}, {384, Policy::kLcfsp, 0}};
    prev.bandwidth_hz = {0.5e6, 0.5e6};
    prev.compute_flops = {10e11, 10e11};  // from a beefier past slot
    const SlotDecision d = fallback_rescale(st, prev);
    CHECK(d.bandwidth_hz[0] + d.bandwidth_hz[1] ==
          doctest::Approx(2e6).epsilon(1e-12));
    CHECK(d.compute_flops[0] + d.compute_flops[1] ==
          doctest::Approx(5e11).epsilon(1e-12));
    // Camera 0's FCFS no longer fits: lambda 27.1 vs mu 6.9.
    CHECK(d.config[0].policy == Policy::kLcfsp);

    SlotDecision wrong = prev;
    wrong.server = {0, 3};
    CHECK_THROWS_AS(fallback_rescale(st, wrong), InfeasibleError);
  }
}

TEST_CASE("long-run bound report") {
  CHECK_THROWS_AS(long_run_bound_report({1.0}, {0.8}, {}, 0.0, 0.7),
                  std::invalid_argument);
  CHECK(long_run_bound_report({}, {}, {}, 10.0, 0.7).partial);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  LongRunBoundInputs b{0.04, 1.5, 0.2, 0.15};
  const BoundReport rep = long_run_bound_report({0.05, 0.07}, {0.72, 0.70}, b, 10.0, 0.7);
  CHECK(!rep.partial);
  CHECK(rep.aopi_time_avg == doctest::Approx(0.06).epsilon(1e-12));
  CHECK(rep.aopi_bound == doctest::Approx(0.04 + 2.0 / 10.0).epsilon(1e-12));
  CHECK(rep.aopi_ok);
  CHECK(rep.accuracy_bound ==
        doctest::Approx(0.7 - (0.5 + 10.0 * 0.2) / 0.15).epsilon(1e-12));
  CHECK(rep.accuracy_ok);

  LongRunBoundInputs missing_age = b;
  missing_age.a_opt_estimate = nan;
  const BoundReport rep2 =
      long_run_bound_report({0.05}, {0.72}, missing_age, 10.0, 0.7);
  CHECK(rep2.partial);
  CHECK(!rep2.aopi_ok);
  CHECK(rep2.accuracy_ok);

  LongRunBoundInputs zero_eps = b;
  zero_eps.epsilon = 0.0;
  CHECK(long_run_bound_report({0.05}, {0.72}, zero_eps, 10.0, 0.7).partial);
}
