#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aopi/analytics.hpp"
#include "aopi/experiment.hpp"
#include "aopi/queue_sim.hpp"
#include "aopi/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSpec = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;

std::vector<aopi::Strategy> parse_strategies(const std::string& csv) {
  std::vector<aopi::Strategy> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const aopi::Strategy s = aopi::strategy_from_string(tok);
    bool seen = false;
    for (aopi::Strategy have : out) {
      if (have == s) seen = true;
    }
    if (!seen) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("no strategies given");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad seed '" + tok + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument("no seeds given");
  return out;
}

int cmd_init(const std::string& out, std::size_t cameras, std::size_t servers,
             std::size_t slots) {
  aopi::ScenarioSpec spec = aopi::default_scenario();
  if (cameras > 0) {
    spec.cameras = cameras;
    spec.channel_gains.resize(cameras);
    for (std::size_t n = 0; n < cameras; ++n) {
      spec.channel_gains[n] = 20.0 * (1.0 + 0.3 * double(n % 7));
    }
  }
  if (servers > 0) spec.servers = servers;
  if (slots > 0) spec.slots = slots;
  aopi::validate_scenario(spec);
  aopi::save_scenario(spec, out);
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

int cmd_trace_gen(const std::string& spec_path, const std::string& out,
                  std::uint64_t seed, bool seed_given) {
  const aopi::ScenarioSpec spec = aopi::load_scenario(spec_path);
  const std::uint64_t use_seed = seed_given ? seed : spec.seeds.front();
  const aopi::TraceSeries series =
      aopi::gen_traces(spec.capacity, spec.servers, spec.slots, use_seed);
  aopi::save_trace(series, out);
  std::cout << "wrote " << out << " (" << series.slots() << " slots, "
            << series.servers() << " servers)\n";
  return kExitOk;
}

int cmd_run(const std::string& spec_path, const std::string& out,
            const std::string& mode_name, const std::string& strategies_csv,
            const std::string& seeds_csv, std::size_t slots_override) {
  aopi::ScenarioSpec spec = aopi::load_scenario(spec_path);
  if (!seeds_csv.empty()) spec.seeds = parse_seeds(seeds_csv);
  if (slots_override > 0) spec.slots = slots_override;
  aopi::RunMode mode;
  if (mode_name == "analytic") {
    mode = aopi::RunMode::kAnalytic;
  } else if (mode_name == "simulate") {
    mode = aopi::RunMode::kSimulate;
  } else {
    throw std::invalid_argument("mode must be 'analytic' or 'simulate'");
  }
  const std::vector<aopi::Strategy> strategies =
      parse_strategies(strategies_csv);
  const aopi::ExperimentResult result =
      aopi::run_experiment(spec, strategies, mode);
  aopi::emit_results(result, out);
  std::size_t errors = 0;
  for (const aopi::StrategySummary& sum : result.summaries) {
    errors += sum.errors;
    std::printf("%-5s mean_aopi=%-12.6g mean_accuracy=%-8.4g wall=%.2fs\n",
                aopi::to_string(sum.strategy).c_str(), sum.mean_aopi,
                sum.mean_accuracy, sum.wall_seconds);
  }
  std::cout << "wrote results to " << out << "\n";
  if (errors > 0) {
    std::cerr << errors << " slot(s) failed; see slots.csv error column\n";
  }
  return kExitOk;
}

int cmd_curve(const std::string& out) {
  aopi::write_curves(out);
  std::cout << "wrote curve files to " << out << "\n";
  return kExitOk;
}

int cmd_validate(std::uint64_t frames, std::uint64_t seed) {
  const double lambda = 2.0;
  const std::vector<double> fcfs_rhos{0.2, 0.5, 0.8};
  const std::vector<double> lcfsp_rhos{0.2, 0.5, 0.8, 1.0, 2.0};
  const std::vector<double> ps{0.4, 0.7, 1.0};
  double worst = 0.0;
  std::printf("%-6s %-5s %-5s %-12s %-12s %s\n", "policy", "rho", "p",
              "closed_form", "simulated", "rel_err");
  std::uint32_t camera = 0;
  for (int pol = 0; pol < 2; ++pol) {
    const bool fcfs = pol == 0;
    for (double rho : fcfs ? fcfs_rhos : lcfsp_rhos) {
      for (double p : ps) {
        aopi::SimConfig cfg;
        cfg.inputs = {lambda, lambda / rho, p,
                      fcfs ? aopi::Policy::kFcfs : aopi::Policy::kLcfsp};
        cfg.horizon_frames = frames;
        cfg.seed = seed;
        cfg.camera_id = camera++;
        const aopi::SimResult sim = aopi::simulate_single(cfg);
        const double closed =
            fcfs ? aopi::aopi_fcfs(lambda, lambda / rho, p)
                 : aopi::aopi_lcfsp(lambda, lambda / rho, p);
        const double rel = std::abs(sim.mean_aopi - closed) / closed;
        worst = std::max(worst, rel);
        std::printf("%-6s %-5.2g %-5.2g %-12.6g %-12.6g %.4f%%\n",
                    fcfs ? "fcfs" : "lcfsp", rho, p, closed, sim.mean_aopi,
                    100.0 * rel);
      }
    }
  }
  std::printf("worst relative error: %.4f%%\n", 100.0 * worst);
  return kExitOk;
}

int cmd_report(const std::string& dir) {
  const std::string path = dir + "/summary.json";
  std::ifstream in(path);
  if (!in) throw aopi::IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw aopi::IoError(path + ": " + e.what());
  }
  std::cout << "mode: " << doc.value("mode", std::string("?")) << "\n";
  std::cout << "slots: " << doc.value("slots", 0) << ", p_min: "
            << doc.value("p_min", 0.0) << ", v: " << doc.value("v", 0.0)
            << "\n";
  if (doc.contains("strategies")) {
    for (const auto& [name, s] : doc["strategies"].items()) {
      std::cout << "  " << name << ": mean_aopi=";
      if (s["mean_aopi"].is_null()) {
        std::cout << "n/a";
      } else {
        std::cout << s["mean_aopi"].get<double>();
      }
      std::cout << " mean_accuracy=";
      if (s["mean_accuracy"].is_null()) {
        std::cout << "n/a";
      } else {
        std::cout << s["mean_accuracy"].get<double>();
      }
      if (!s["convergence_slot_mean"].is_null()) {
        std::cout << " reaches target at slot "
                  << s["convergence_slot_mean"].get<double>();
      }
      std::cout << "\n";
    }
  }
  if (doc.contains("aopi_ratios")) {
    for (const auto& [name, v] : doc["aopi_ratios"].items()) {
      if (!v.is_null()) {
        std::cout << "  ratio " << name << " = " << v.get<double>() << "\n";
      }
    }
  }
  std::cout << "drift violations: "
            << doc.value("drift_inequality_violations", -1)
            << ", trace violations: "
            << doc.value("trace_monotonicity_violations", -1) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-processed-information edge video analytics toolkit"};
  app.require_subcommand(1);

  std::string out_path;
  std::string spec_path;
  std::string mode_name = "analytic";
  std::string strategies_csv = "lbcd,dos,jcab,min";
  std::string seeds_csv;
  std::size_t cameras = 0, servers = 0, slots = 0;
  std::uint64_t seed = 0;
  std::uint64_t frames = 200000;

  CLI::App* init = app.add_subcommand("init", "Write a template scenario spec");
  init->add_option("--out", out_path, "Output spec path")->required();
  init->add_option("--cameras", cameras, "Camera count override");
  init->add_option("--servers", servers, "Server count override");
  init->add_option("--slots", slots, "Slot count override");

  CLI::App* tgen =
      app.add_subcommand("trace-gen", "Generate a synthetic capacity trace");
  tgen->add_option("--spec", spec_path, "Scenario spec path")->required();
  tgen->add_option("--out", out_path, "Output trace CSV path")->required();
  CLI::Option* tgen_seed = tgen->add_option("--seed", seed, "Trace seed");

  CLI::App* run = app.add_subcommand("run", "Run a batch experiment");
  run->add_option("--spec", spec_path, "Scenario spec path")->required();
  run->add_option("--out", out_path, "Output directory")->required();
  run->add_option("--mode", mode_name, "analytic|simulate");
  run->add_option("--strategies", strategies_csv,
                  "Comma list of lbcd,dos,jcab,min");
  run->add_option("--seeds", seeds_csv, "Comma list overriding spec seeds");
  run->add_option("--slots", slots, "Slot count overriding the spec");

  CLI::App* curve =
      app.add_subcommand("curve", "Write closed-form sweep CSV files");
  curve->add_option("--out", out_path, "Output directory")->required();

  CLI::App* validate = app.add_subcommand(
      "validate", "Check the simulator against the closed forms");
  validate->add_option("--frames", frames, "Frames per grid point");
  validate->add_option("--seed", seed, "Simulation seed");

  CLI::App* report =
      app.add_subcommand("report", "Print a run directory's summary");
  report->add_option("--in", spec_path, "Run output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSpec;
  }

  try {
    if (init->parsed()) return cmd_init(out_path, cameras, servers, slots);
    if (tgen->parsed()) {
      return cmd_trace_gen(spec_path, out_path, seed, tgen_seed->count() > 0);
    }
    if (run->parsed()) {
      return cmd_run(spec_path, out_path, mode_name, strategies_csv, seeds_csv,
                     slots);
    }
    if (curve->parsed()) return cmd_curve(out_path);
    if (validate->parsed()) return cmd_validate(frames, seed);
    if (report->parsed()) return cmd_report(spec_path);
  } catch (const aopi::ScenarioError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kExitSpec;
  } catch (const std::invalid_argument& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kExitSpec;
  } catch (const aopi::InfeasibleError& e) {
    std::cerr << "infeasible scenario: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const aopi::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
