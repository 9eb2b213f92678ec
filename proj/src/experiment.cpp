#include "aopi/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "aopi/analytics.hpp"
#include "aopi/queue_sim.hpp"
#include "aopi/rng.hpp"

namespace aopi {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint32_t strategy_rank(Strategy s) {
  switch (s) {
    case Strategy::kLbcd: return 0;
    case Strategy::kDos: return 1;
    case Strategy::kJcab: return 2;
    case Strategy::kMin: return 3;
  }
  return 0;
}

std::string csv_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

// Mean over cameras of the best accuracy any catalog entry can reach;
// feeds the accuracy-slack estimate of the long-run bound.
double best_mean_accuracy(const Fleet& fleet) {
  double sum = 0.0;
  for (std::size_t cam = 0; cam < fleet.cameras(); ++cam) {
    double best = 0.0;
    for (int r : fleet.resolutions_px) {
      for (std::size_t m = 0; m < fleet.models(); ++m) {
        best = std::max(
            best, accuracy(VideoConfig{r, Policy::kLcfsp, m},
                           fleet.accuracy[cam]));
      }
    }
    sum += best;
  }
  return sum / double(fleet.cameras());
}

struct StrategyRun {
  VirtualQueue queue;
  SlotDecision prev;
  bool has_prev = false;
  double accuracy_sum = 0.0;
  std::size_t accuracy_count = 0;
  double convergence_slot = kInf;
};

json finite_or_null(double v) {
  if (std::isnan(v) || std::isinf(v)) return nullptr;
  return v;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kLbcd: return "lbcd";
    case Strategy::kDos: return "dos";
    case Strategy::kJcab: return "jcab";
    case Strategy::kMin: return "min";
  }
  return "lbcd";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "lbcd") return Strategy::kLbcd;
  if (s == "dos") return Strategy::kDos;
  if (s == "jcab") return Strategy::kJcab;
  if (s == "min") return Strategy::kMin;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

const StrategySummary* ExperimentResult::summary(Strategy s) const {
  for (const StrategySummary& sum : summaries) {
    if (sum.strategy == s) return &sum;
  }
  return nullptr;
}

double ExperimentResult::aopi_ratio(Strategy a, Strategy b) const {
  const StrategySummary* sa = summary(a);
  const StrategySummary* sb = summary(b);
  if (sa == nullptr || sb == nullptr) return kNaN;
  return sa->mean_aopi / sb->mean_aopi;
}

ExperimentResult run_experiment(const ScenarioSpec& spec,
                                const std::vector<Strategy>& strategies,
                                RunMode mode) {
  validate_scenario(spec);
  if (strategies.empty()) {
    throw std::invalid_argument("at least one strategy is required");
  }

  ExperimentResult result;
  result.spec = spec;
  result.mode = mode;
  result.strategies = strategies;
  result.accuracy_target = spec.p_min - 0.01;

  LbcdParams params = spec.optimizer;
  params.v = spec.v;
  const JcabParams jcab_params{spec.jcab_latency_budget_s};

  std::map<Strategy, std::vector<double>> slot_ages;
  std::map<Strategy, std::vector<double>> slot_accs;
  std::map<Strategy, double> wall;
  std::map<Strategy, std::size_t> error_count;
  std::map<Strategy, std::size_t> fallback_count;
  std::map<Strategy, std::vector<double>> convergence;
  std::map<Strategy, double> final_running;
  std::map<Strategy, std::vector<double>> sim_ages;
  std::vector<double> slack_series;

  for (const std::uint64_t seed : spec.seeds) {
    const TraceSeries trace = scenario_traces(spec, seed);
    std::vector<double> difficulty = initial_difficulty(spec);
    std::map<Strategy, StrategyRun> runs;
    for (Strategy s : strategies) {
      runs[s].queue.p_min = spec.p_min;
    }

    for (std::size_t t = 0; t < spec.slots; ++t) {
      const Fleet fleet = make_fleet(spec, difficulty);
      slack_series.push_back(best_mean_accuracy(fleet) - spec.p_min);

      for (Strategy strat : strategies) {
        StrategyRun& run = runs[strat];
        ScenarioState state{trace.rows[t], fleet, run.queue, params};

        SlotRecord row;
        row.seed = seed;
        row.strategy = strat;
        row.slot = t;

        const double q_before = run.queue.value;
        StepOutcome outcome;
        std::vector<bool> budget_flags;
        bool ok = true;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          const SlotDecision* prev = run.has_prev ? &run.prev : nullptr;
          switch (strat) {
            case Strategy::kLbcd:
              outcome = lbcd_step(state, prev);
              run.queue = state.queue;
              break;
            case Strategy::kDos:
              outcome = dos_step(state, prev);
              break;
            case Strategy::kJcab: {
              JcabResult jr = jcab_step(state, jcab_params, prev);
              outcome = std::move(jr.outcome);
              budget_flags = std::move(jr.within_budget);
              break;
            }
            case Strategy::kMin:
              outcome = min_step(state);
              break;
          }
        } catch (const std::exception& e) {
          ok = false;
          row.error = e.what();
          ++error_count[strat];
        }
        wall[strat] += std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t0)
                           .count();

        if (ok) {
          row.q = outcome.q_after;
          row.objective = outcome.objective.objective;
          row.mean_aopi = outcome.objective.mean_aopi;
          row.mean_accuracy = outcome.objective.mean_accuracy;
          row.fallback_used = outcome.fallback_used;
          if (outcome.fallback_used) ++fallback_count[strat];

          run.accuracy_sum += row.mean_accuracy;
          ++run.accuracy_count;
          row.running_avg_accuracy =
              run.accuracy_sum / double(run.accuracy_count);
          if (std::isinf(run.convergence_slot) &&
              row.running_avg_accuracy >= result.accuracy_target) {
            run.convergence_slot = double(t);
          }

          if (strat == Strategy::kLbcd) {
            const double lhs =
                0.5 * (row.q * row.q - q_before * q_before);
            const double rhs =
                0.5 + q_before * (spec.p_min - row.mean_accuracy);
            if (lhs > rhs + 1e-9 * std::max(1.0, std::abs(rhs))) {
              ++result.drift_violations;
            }
          }
          if (strat == Strategy::kLbcd || strat == Strategy::kMin) {
            for (std::size_t k = 1; k < outcome.trace.size(); ++k) {
              const double prev_obj = outcome.trace[k - 1].objective;
              const double cur_obj = outcome.trace[k].objective;
              if (cur_obj >
                  prev_obj + 1e-9 * std::max(1.0, std::abs(prev_obj))) {
                ++result.trace_violations;
              }
            }
          }

          if (mode == RunMode::kSimulate) {
            try {
              const std::uint64_t sim_seed = mix_seed(
                  mix_seed(mix_seed(seed, 0x51007eull + t),
                           strategy_rank(strat)),
                  0x0a11ca57ull);
              const std::vector<SimResult> sims = simulate_slot(
                  outcome.decision, fleet, sim_seed, spec.sim.frames_per_slot,
                  spec.sim.warmup_fraction);
              double age_sum = 0.0;
              double acc_sum = 0.0;
              for (const SimResult& sr : sims) {
                age_sum += sr.mean_aopi;
                acc_sum += sr.empirical_accuracy;
              }
              row.sim_mean_aopi = age_sum / double(sims.size());
              row.sim_mean_accuracy = acc_sum / double(sims.size());
              sim_ages[strat].push_back(row.sim_mean_aopi);
            } catch (const std::exception& e) {
              row.error = std::string("sim: ") + e.what();
            }
          }

          slot_ages[strat].push_back(row.mean_aopi);
          slot_accs[strat].push_back(row.mean_accuracy);
          run.prev = outcome.decision;
          run.has_prev = true;

          if (t + 1 == spec.slots) {
            for (std::size_t cam = 0; cam < fleet.cameras(); ++cam) {
              CameraRecord cr;
              cr.seed = seed;
              cr.strategy = strat;
              cr.camera = cam;
              cr.server = outcome.decision.server[cam];
              cr.resolution_px = outcome.decision.config[cam].resolution_px;
              cr.policy = outcome.decision.config[cam].policy;
              cr.model = outcome.decision.config[cam].model;
              cr.bandwidth_hz = outcome.decision.bandwidth_hz[cam];
              cr.compute_flops = outcome.decision.compute_flops[cam];
              cr.lambda = outcome.cameras[cam].lambda;
              cr.mu = outcome.cameras[cam].mu;
              cr.accuracy = outcome.cameras[cam].p;
              cr.aopi = outcome.cameras[cam].aopi;
              if (!budget_flags.empty()) {
                cr.within_budget = budget_flags[cam];
              }
              result.final_decisions.push_back(cr);
            }
          }
        }
        result.slots.push_back(std::move(row));
      }
      advance_difficulty(spec, seed, t, difficulty);
    }

    for (Strategy strat : strategies) {
      convergence[strat].push_back(runs[strat].convergence_slot);
      if (runs[strat].accuracy_count > 0) {
        final_running[strat] +=
            runs[strat].accuracy_sum / double(runs[strat].accuracy_count);
      }
    }
  }

  for (Strategy strat : strategies) {
    StrategySummary sum;
    sum.strategy = strat;
    const std::vector<double>& ages = slot_ages[strat];
    const std::vector<double>& accs = slot_accs[strat];
    if (!ages.empty()) {
      sum.mean_aopi = std::accumulate(ages.begin(), ages.end(), 0.0) /
                      double(ages.size());
      sum.mean_accuracy = std::accumulate(accs.begin(), accs.end(), 0.0) /
                          double(accs.size());
      sum.final_running_accuracy =
          final_running[strat] / double(spec.seeds.size());
    }
    sum.convergence_slot_by_seed = convergence[strat];
    if (!sum.convergence_slot_by_seed.empty()) {
      double total = 0.0;
      for (double c : sum.convergence_slot_by_seed) total += c;
      sum.convergence_slot_mean =
          total / double(sum.convergence_slot_by_seed.size());
    }
    if (!sim_ages[strat].empty()) {
      sum.sim_mean_aopi = std::accumulate(sim_ages[strat].begin(),
                                          sim_ages[strat].end(), 0.0) /
                          double(sim_ages[strat].size());
    }
    sum.wall_seconds = wall[strat];
    sum.errors = error_count[strat];
    sum.fallbacks = fallback_count[strat];
    result.summaries.push_back(std::move(sum));
  }

  // Long-run bound check for the online optimizer, using the pooled
  // lower bound as the optimum estimate.
  const bool has_lbcd = slot_ages.count(Strategy::kLbcd) &&
                        !slot_ages[Strategy::kLbcd].empty();
  const bool has_min = slot_ages.count(Strategy::kMin) &&
                       !slot_ages[Strategy::kMin].empty();
  if (has_lbcd && has_min &&
      slot_ages[Strategy::kLbcd].size() == slot_ages[Strategy::kMin].size()) {
    const std::vector<double>& la = slot_ages[Strategy::kLbcd];
    const std::vector<double>& ma = slot_ages[Strategy::kMin];
    LongRunBoundInputs bound;
    bound.a_opt_estimate =
        std::accumulate(ma.begin(), ma.end(), 0.0) / double(ma.size());
    double gap = 0.0;
    double a_max = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < la.size(); ++i) {
      if (!std::isfinite(la[i]) || !std::isfinite(ma[i])) {
        finite = false;
        break;
      }
      gap = std::max(gap, la[i] - ma[i]);
      a_max = std::max(a_max, la[i]);
    }
    double slack = 0.0;
    for (double s : slack_series) slack += s;
    slack /= double(slack_series.size());
    if (finite && slack > 0.0) {
      bound.phi_max = spec.v * gap;
      bound.a_max = a_max;
      bound.epsilon = slack;
      result.bound =
          long_run_bound_report(la, slot_accs[Strategy::kLbcd], bound, spec.v,
                          spec.p_min);
      result.bound_available = true;
    }
  }
  return result;
}

void write_curves(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "'");

  {
    std::ofstream out(dir + "/policy_threshold.csv");
    if (!out) throw IoError("cannot write policy_threshold.csv");
    out << "rho,p_star\n";
    for (int i = 1; i <= 150; ++i) {
      const double rho = double(i) / 100.0;
      out << csv_double(rho) << ',' << csv_double(policy_threshold(rho))
          << '\n';
    }
  }
  {
    std::ofstream out(dir + "/age_vs_arrival_rate.csv");
    if (!out) throw IoError("cannot write age_vs_arrival_rate.csv");
    out << "lambda,mu,p,aopi_fcfs,aopi_lcfsp\n";
    const double mu = 4.0;
    const double p = 0.9;
    for (int i = 1; i <= 79; ++i) {
      const double lambda = double(i) / 10.0;
      out << csv_double(lambda) << ',' << csv_double(mu) << ','
          << csv_double(p) << ',';
      if (lambda < mu) {
        out << csv_double(aopi_fcfs(lambda, mu, p));
      }
      out << ',' << csv_double(aopi_lcfsp(lambda, mu, p)) << '\n';
    }
  }
  {
    std::ofstream out(dir + "/age_vs_accuracy.csv");
    if (!out) throw IoError("cannot write age_vs_accuracy.csv");
    out << "lambda,mu,p,aopi_fcfs,aopi_lcfsp\n";
    const double lambda = 2.0;
    const double mu = 4.0;
    for (int i = 1; i <= 20; ++i) {
      const double p = double(i) / 20.0;
      out << csv_double(lambda) << ',' << csv_double(mu) << ','
          << csv_double(p) << ',' << csv_double(aopi_fcfs(lambda, mu, p))
          << ',' << csv_double(aopi_lcfsp(lambda, mu, p)) << '\n';
    }
  }
}

void emit_results(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory '" + out_dir + "'");

  {
    std::ofstream out(out_dir + "/slots.csv");
    if (!out) throw IoError("cannot write slots.csv");
    out << "seed,strategy,slot,q,objective,mean_aopi,mean_accuracy,"
           "running_avg_accuracy,fallback,error,sim_mean_aopi,"
           "sim_mean_accuracy\n";
    for (const SlotRecord& row : result.slots) {
      out << row.seed << ',' << to_string(row.strategy) << ',' << row.slot
          << ',' << csv_double(row.q) << ',' << csv_double(row.objective)
          << ',' << csv_double(row.mean_aopi) << ','
          << csv_double(row.mean_accuracy) << ','
          << csv_double(row.running_avg_accuracy) << ','
          << (row.fallback_used ? 1 : 0) << ',' << sanitize(row.error) << ','
          << csv_double(row.sim_mean_aopi) << ','
          << csv_double(row.sim_mean_accuracy) << '\n';
    }
  }
  {
    std::ofstream out(out_dir + "/decisions.csv");
    if (!out) throw IoError("cannot write decisions.csv");
    out << "seed,strategy,camera,server,resolution_px,policy,model,"
           "bandwidth_hz,compute_flops,lambda,mu,accuracy,aopi,"
           "within_budget\n";
    for (const CameraRecord& cr : result.final_decisions) {
      out << cr.seed << ',' << to_string(cr.strategy) << ',' << cr.camera
          << ',' << cr.server << ',' << cr.resolution_px << ','
          << to_string(cr.policy) << ',' << cr.model << ','
          << csv_double(cr.bandwidth_hz) << ','
          << csv_double(cr.compute_flops) << ',' << csv_double(cr.lambda)
          << ',' << csv_double(cr.mu) << ',' << csv_double(cr.accuracy) << ','
          << csv_double(cr.aopi) << ',' << (cr.within_budget ? 1 : 0) << '\n';
    }
  }
  {
    json doc;
    doc["schema_version"] = 1;
    doc["mode"] = result.mode == RunMode::kAnalytic ? "analytic" : "simulate";
    doc["seeds"] = result.spec.seeds;
    doc["slots"] = result.spec.slots;
    doc["p_min"] = result.spec.p_min;
    doc["v"] = result.spec.v;
    doc["accuracy_target"] = result.accuracy_target;
    json strategies = json::object();
    for (const StrategySummary& sum : result.summaries) {
      json s;
      s["mean_aopi"] = finite_or_null(sum.mean_aopi);
      s["mean_accuracy"] = finite_or_null(sum.mean_accuracy);
      s["final_running_accuracy"] = finite_or_null(sum.final_running_accuracy);
      json by_seed = json::array();
      for (double c : sum.convergence_slot_by_seed) {
        by_seed.push_back(finite_or_null(c));
      }
      s["convergence_slot_by_seed"] = by_seed;
      s["convergence_slot_mean"] = finite_or_null(sum.convergence_slot_mean);
      s["sim_mean_aopi"] = finite_or_null(sum.sim_mean_aopi);
      s["wall_seconds"] = sum.wall_seconds;
      s["errors"] = sum.errors;
      s["fallbacks"] = sum.fallbacks;
      strategies[to_string(sum.strategy)] = s;
    }
    doc["strategies"] = strategies;
    json ratios;
    ratios["lbcd_over_min"] =
        finite_or_null(result.aopi_ratio(Strategy::kLbcd, Strategy::kMin));
    ratios["dos_over_lbcd"] =
        finite_or_null(result.aopi_ratio(Strategy::kDos, Strategy::kLbcd));
    ratios["jcab_over_lbcd"] =
        finite_or_null(result.aopi_ratio(Strategy::kJcab, Strategy::kLbcd));
    doc["aopi_ratios"] = ratios;
    doc["drift_inequality_violations"] = result.drift_violations;
    doc["trace_monotonicity_violations"] = result.trace_violations;
    json bounds;
    bounds["available"] = result.bound_available;
    if (result.bound_available) {
      bounds["partial"] = result.bound.partial;
      bounds["aopi_time_avg"] = finite_or_null(result.bound.aopi_time_avg);
      bounds["aopi_bound"] = finite_or_null(result.bound.aopi_bound);
      bounds["aopi_ok"] = result.bound.aopi_ok;
      bounds["accuracy_time_avg"] =
          finite_or_null(result.bound.accuracy_time_avg);
      bounds["accuracy_bound"] = finite_or_null(result.bound.accuracy_bound);
      bounds["accuracy_ok"] = result.bound.accuracy_ok;
    }
    doc["long_run_bounds"] = bounds;
    std::ofstream out(out_dir + "/summary.json");
    if (!out) throw IoError("cannot write summary.json");
    out << doc.dump(2) << "\n";
  }
  write_curves(out_dir + "/curves");
}

}  // namespace aopi
