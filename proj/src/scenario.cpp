#include "aopi/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "aopi/rng.hpp"

namespace aopi {

namespace {

using nlohmann::json;

// RNG stream ids 0..2 belong to the queue simulator.
constexpr std::uint32_t kBandwidthStream = 3;
constexpr std::uint32_t kComputeStream = 4;
constexpr std::uint32_t kDifficultyStream = 5;

[[noreturn]] void fail(const std::string& msg) { throw ScenarioError(msg); }

[[noreturn]] void fail_field(const std::string& field, const std::string& why) {
  fail("field '" + field + "': " + why);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) known = true;
    }
    if (!known) {
      fail_field(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

std::string join_field(const std::string& where, const char* field) {
  return where.empty() ? field : where + "." + field;
}

double get_number(const json& obj, const std::string& where, const char* field,
                  double fallback) {
  if (!obj.contains(field)) return fallback;
  const json& v = obj.at(field);
  if (!v.is_number()) fail_field(join_field(where, field), "expected a number");
  return v.get<double>();
}

std::uint64_t get_count(const json& obj, const std::string& where,
                        const char* field, std::uint64_t fallback) {
  if (!obj.contains(field)) return fallback;
  const json& v = obj.at(field);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    fail_field(join_field(where, field), "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& where,
                       const char* field, const std::string& fallback) {
  if (!obj.contains(field)) return fallback;
  const json& v = obj.at(field);
  if (!v.is_string()) fail_field(join_field(where, field), "expected a string");
  return v.get<std::string>();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ScenarioSpec default_scenario() {
  ScenarioSpec spec;
  spec.models = {
      {"m0", 0.10e12, 0.85}, {"m1", 0.22e12, 0.87}, {"m2", 0.45e12, 0.89},
      {"m3", 0.90e12, 0.91}, {"m4", 1.80e12, 0.93},
  };
  spec.channel_gains.resize(spec.cameras);
  for (std::size_t n = 0; n < spec.cameras; ++n) {
    spec.channel_gains[n] = 20.0 * (1.0 + 0.3 * double(n % 7));
  }
  spec.optimizer.v = spec.v;
  return spec;
}

void validate_scenario(const ScenarioSpec& spec) {
  if (spec.schema_version != 1) {
    fail_field("schema_version", "unsupported version " +
                                     std::to_string(spec.schema_version));
  }
  if (spec.cameras < 1) fail_field("cameras", "must be >= 1");
  if (spec.servers < 1) fail_field("servers", "must be >= 1");
  if (spec.slots < 1) fail_field("slots", "must be >= 1");
  if (!(spec.slot_length_s > 0.0)) fail_field("slot_length_s", "must be > 0");
  if (!(spec.p_min > 0.0) || spec.p_min > 1.0) {
    fail_field("p_min", "must lie in (0, 1]");
  }
  if (!(spec.v > 0.0)) fail_field("v", "must be > 0");
  if (spec.seeds.empty()) fail_field("seeds", "must list at least one seed");
  if (spec.resolutions_px.empty()) {
    fail_field("resolutions_px", "must list at least one resolution");
  }
  for (int r : spec.resolutions_px) {
    if (r <= 0) fail_field("resolutions_px", "resolutions must be positive");
  }
  if (spec.models.empty()) fail_field("models", "must list at least one model");
  for (std::size_t m = 0; m < spec.models.size(); ++m) {
    const ModelSpec& ms = spec.models[m];
    const std::string where = "models[" + std::to_string(m) + "]";
    if (ms.name.empty()) fail_field(where + ".name", "must be nonempty");
    if (!(ms.flops_per_frame_at_ref > 0.0)) {
      fail_field(where + ".flops_per_frame_at_ref", "must be > 0");
    }
    if (!(ms.accuracy_ceiling > 0.0) || ms.accuracy_ceiling > 1.0) {
      fail_field(where + ".accuracy_ceiling", "must lie in (0, 1]");
    }
  }
  if (!(spec.reference_resolution_px > 0.0)) {
    fail_field("reference_resolution_px", "must be > 0");
  }
  if (!(spec.bits_per_pixel_sq > 0.0)) {
    fail_field("bits_per_pixel_sq", "must be > 0");
  }
  if (!(spec.tx_power_w > 0.0)) fail_field("tx_power_w", "must be > 0");
  if (!(spec.noise_power_w > 0.0)) fail_field("noise_power_w", "must be > 0");
  if (spec.channel_gains.size() != spec.cameras) {
    fail_field("channel_gains",
               "must list exactly one gain per camera (" +
                   std::to_string(spec.cameras) + ")");
  }
  for (double g : spec.channel_gains) {
    if (!(g > 0.0)) fail_field("channel_gains", "gains must be positive");
  }
  const ContentDynamics& cd = spec.content;
  if (!(cd.difficulty_min > 0.0)) {
    fail_field("content.difficulty_min", "must be > 0");
  }
  if (cd.difficulty_max < cd.difficulty_min) {
    fail_field("content.difficulty_max", "must be >= difficulty_min");
  }
  if (cd.difficulty_init < cd.difficulty_min ||
      cd.difficulty_init > cd.difficulty_max) {
    fail_field("content.difficulty_init", "must lie within the walk bounds");
  }
  if (cd.walk_step < 0.0) fail_field("content.walk_step", "must be >= 0");
  if (spec.capacity.trace_path.empty()) {
    if (!(spec.capacity.mean_bandwidth_hz > 0.0)) {
      fail_field("capacity.mean_bandwidth_hz", "must be > 0");
    }
    if (!(spec.capacity.mean_compute_flops > 0.0)) {
      fail_field("capacity.mean_compute_flops", "must be > 0");
    }
    if (spec.capacity.cv < 0.0) fail_field("capacity.cv", "must be >= 0");
  }
  if (spec.sim.frames_per_slot < 1000) {
    fail_field("sim.frames_per_slot", "must be >= 1000");
  }
  if (spec.sim.warmup_fraction < 0.0 || spec.sim.warmup_fraction > 0.9) {
    fail_field("sim.warmup_fraction", "must lie in [0, 0.9]");
  }
  const LbcdParams& op = spec.optimizer;
  if (op.max_bcd_iters < 1) fail_field("optimizer.max_bcd_iters", "must be >= 1");
  if (!(op.bcd_rel_tol > 0.0)) fail_field("optimizer.bcd_rel_tol", "must be > 0");
  if (!(op.solver_tol > 0.0)) fail_field("optimizer.solver_tol", "must be > 0");
  if (op.max_solver_iters < 1) {
    fail_field("optimizer.max_solver_iters", "must be >= 1");
  }
  if (!(op.epsilon_stability > 0.0) || op.epsilon_stability >= 1.0) {
    fail_field("optimizer.epsilon_stability", "must lie in (0, 1)");
  }
  if (!(spec.jcab_latency_budget_s > 0.0)) {
    fail_field("jcab_latency_budget_s", "must be > 0");
  }
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("scenario file '" + path + "': " + e.what());
  }
  if (!doc.is_object()) fail("scenario file must hold a JSON object");

  check_keys(doc, "",
             {"schema_version", "cameras", "servers", "slots", "slot_length_s",
              "p_min", "v", "seeds", "resolutions_px", "models",
              "reference_resolution_px", "bits_per_pixel_sq", "tx_power_w",
              "noise_power_w", "channel_gains", "content", "capacity", "sim",
              "optimizer", "jcab_latency_budget_s"});
  if (!doc.contains("schema_version")) {
    fail_field("schema_version", "missing required field");
  }

  ScenarioSpec spec = default_scenario();
  spec.schema_version = int(get_count(doc, "", "schema_version", 1));
  spec.cameras = get_count(doc, "", "cameras", spec.cameras);
  spec.servers = get_count(doc, "", "servers", spec.servers);
  spec.slots = get_count(doc, "", "slots", spec.slots);
  spec.slot_length_s = get_number(doc, "", "slot_length_s", spec.slot_length_s);
  spec.p_min = get_number(doc, "", "p_min", spec.p_min);
  spec.v = get_number(doc, "", "v", spec.v);
  spec.reference_resolution_px =
      get_number(doc, "", "reference_resolution_px",
                 spec.reference_resolution_px);
  spec.bits_per_pixel_sq =
      get_number(doc, "", "bits_per_pixel_sq", spec.bits_per_pixel_sq);
  spec.tx_power_w = get_number(doc, "", "tx_power_w", spec.tx_power_w);
  spec.noise_power_w = get_number(doc, "", "noise_power_w", spec.noise_power_w);
  spec.jcab_latency_budget_s =
      get_number(doc, "", "jcab_latency_budget_s", spec.jcab_latency_budget_s);

  if (doc.contains("seeds")) {
    if (!doc["seeds"].is_array()) fail_field("seeds", "expected an array");
    spec.seeds.clear();
    for (const json& v : doc["seeds"]) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        fail_field("seeds", "expected nonnegative integers");
      }
      spec.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  if (doc.contains("resolutions_px")) {
    if (!doc["resolutions_px"].is_array()) {
      fail_field("resolutions_px", "expected an array");
    }
    spec.resolutions_px.clear();
    for (const json& v : doc["resolutions_px"]) {
      if (!v.is_number_integer()) {
        fail_field("resolutions_px", "expected integers");
      }
      spec.resolutions_px.push_back(v.get<int>());
    }
  }
  if (doc.contains("models")) {
    if (!doc["models"].is_array()) fail_field("models", "expected an array");
    spec.models.clear();
    std::size_t idx = 0;
    for (const json& v : doc["models"]) {
      const std::string where = "models[" + std::to_string(idx) + "]";
      if (!v.is_object()) fail_field(where, "expected an object");
      check_keys(v, where,
                 {"name", "flops_per_frame_at_ref", "accuracy_ceiling"});
      ModelSpec ms;
      ms.name = get_string(v, where, "name", "");
      ms.flops_per_frame_at_ref =
          get_number(v, where, "flops_per_frame_at_ref", 0.0);
      ms.accuracy_ceiling = get_number(v, where, "accuracy_ceiling", 0.0);
      spec.models.push_back(ms);
      ++idx;
    }
  }
  if (doc.contains("channel_gains")) {
    if (!doc["channel_gains"].is_array()) {
      fail_field("channel_gains", "expected an array");
    }
    spec.channel_gains.clear();
    for (const json& v : doc["channel_gains"]) {
      if (!v.is_number()) fail_field("channel_gains", "expected numbers");
      spec.channel_gains.push_back(v.get<double>());
    }
  } else if (spec.cameras != spec.channel_gains.size()) {
    // Regenerate the default staggered gains for a non-default camera count.
    spec.channel_gains.resize(spec.cameras);
    for (std::size_t n = 0; n < spec.cameras; ++n) {
      spec.channel_gains[n] = 20.0 * (1.0 + 0.3 * double(n % 7));
    }
  }
  if (doc.contains("content")) {
    const json& c = doc["content"];
    if (!c.is_object()) fail_field("content", "expected an object");
    check_keys(c, "content",
               {"difficulty_init", "walk_step", "difficulty_min",
                "difficulty_max"});
    spec.content.difficulty_init =
        get_number(c, "content", "difficulty_init", spec.content.difficulty_init);
    spec.content.walk_step =
        get_number(c, "content", "walk_step", spec.content.walk_step);
    spec.content.difficulty_min =
        get_number(c, "content", "difficulty_min", spec.content.difficulty_min);
    spec.content.difficulty_max =
        get_number(c, "content", "difficulty_max", spec.content.difficulty_max);
  }
  if (doc.contains("capacity")) {
    const json& c = doc["capacity"];
    if (!c.is_object()) fail_field("capacity", "expected an object");
    check_keys(c, "capacity",
               {"mean_bandwidth_hz", "mean_compute_flops", "cv", "trace_path"});
    spec.capacity.mean_bandwidth_hz = get_number(
        c, "capacity", "mean_bandwidth_hz", spec.capacity.mean_bandwidth_hz);
    spec.capacity.mean_compute_flops = get_number(
        c, "capacity", "mean_compute_flops", spec.capacity.mean_compute_flops);
    spec.capacity.cv = get_number(c, "capacity", "cv", spec.capacity.cv);
    spec.capacity.trace_path =
        get_string(c, "capacity", "trace_path", spec.capacity.trace_path);
    if (!spec.capacity.trace_path.empty()) {
      // Relative trace paths resolve against the spec file's directory.
      std::filesystem::path tp(spec.capacity.trace_path);
      if (tp.is_relative()) {
        spec.capacity.trace_path =
            (std::filesystem::path(path).parent_path() / tp).string();
      }
    }
  }
  if (doc.contains("sim")) {
    const json& c = doc["sim"];
    if (!c.is_object()) fail_field("sim", "expected an object");
    check_keys(c, "sim", {"frames_per_slot", "warmup_fraction"});
    spec.sim.frames_per_slot =
        get_count(c, "sim", "frames_per_slot", spec.sim.frames_per_slot);
    spec.sim.warmup_fraction =
        get_number(c, "sim", "warmup_fraction", spec.sim.warmup_fraction);
  }
  if (doc.contains("optimizer")) {
    const json& c = doc["optimizer"];
    if (!c.is_object()) fail_field("optimizer", "expected an object");
    check_keys(c, "optimizer",
               {"max_bcd_iters", "bcd_rel_tol", "solver_tol",
                "max_solver_iters", "epsilon_stability"});
    spec.optimizer.max_bcd_iters = int(
        get_count(c, "optimizer", "max_bcd_iters", spec.optimizer.max_bcd_iters));
    spec.optimizer.bcd_rel_tol =
        get_number(c, "optimizer", "bcd_rel_tol", spec.optimizer.bcd_rel_tol);
    spec.optimizer.solver_tol =
        get_number(c, "optimizer", "solver_tol", spec.optimizer.solver_tol);
    spec.optimizer.max_solver_iters =
        int(get_count(c, "optimizer", "max_solver_iters",
                      spec.optimizer.max_solver_iters));
    spec.optimizer.epsilon_stability = get_number(
        c, "optimizer", "epsilon_stability", spec.optimizer.epsilon_stability);
  }
  spec.optimizer.v = spec.v;

  validate_scenario(spec);
  return spec;
}

void save_scenario(const ScenarioSpec& spec, const std::string& path) {
  json doc;
  doc["schema_version"] = spec.schema_version;
  doc["cameras"] = spec.cameras;
  doc["servers"] = spec.servers;
  doc["slots"] = spec.slots;
  doc["slot_length_s"] = spec.slot_length_s;
  doc["p_min"] = spec.p_min;
  doc["v"] = spec.v;
  doc["seeds"] = spec.seeds;
  doc["resolutions_px"] = spec.resolutions_px;
  doc["models"] = json::array();
  for (const ModelSpec& m : spec.models) {
    doc["models"].push_back({{"name", m.name},
                             {"flops_per_frame_at_ref", m.flops_per_frame_at_ref},
                             {"accuracy_ceiling", m.accuracy_ceiling}});
  }
  doc["reference_resolution_px"] = spec.reference_resolution_px;
  doc["bits_per_pixel_sq"] = spec.bits_per_pixel_sq;
  doc["tx_power_w"] = spec.tx_power_w;
  doc["noise_power_w"] = spec.noise_power_w;
  doc["channel_gains"] = spec.channel_gains;
  doc["content"] = {{"difficulty_init", spec.content.difficulty_init},
                    {"walk_step", spec.content.walk_step},
                    {"difficulty_min", spec.content.difficulty_min},
                    {"difficulty_max", spec.content.difficulty_max}};
  doc["capacity"] = {{"mean_bandwidth_hz", spec.capacity.mean_bandwidth_hz},
                     {"mean_compute_flops", spec.capacity.mean_compute_flops},
                     {"cv", spec.capacity.cv},
                     {"trace_path", spec.capacity.trace_path}};
  doc["sim"] = {{"frames_per_slot", spec.sim.frames_per_slot},
                {"warmup_fraction", spec.sim.warmup_fraction}};
  doc["optimizer"] = {{"max_bcd_iters", spec.optimizer.max_bcd_iters},
                      {"bcd_rel_tol", spec.optimizer.bcd_rel_tol},
                      {"solver_tol", spec.optimizer.solver_tol},
                      {"max_solver_iters", spec.optimizer.max_solver_iters},
                      {"epsilon_stability", spec.optimizer.epsilon_stability}};
  doc["jcab_latency_budget_s"] = spec.jcab_latency_budget_s;

  std::ofstream out(path);
  if (!out) fail("cannot write scenario file '" + path + "'");
  out << doc.dump(2) << "\n";
}

TraceSeries gen_traces(const CapacitySpec& cap, std::size_t servers,
                       std::size_t slots, std::uint64_t seed) {
  if (!(cap.mean_bandwidth_hz > 0.0) || !(cap.mean_compute_flops > 0.0)) {
    fail_field("capacity", "means must be positive");
  }
  if (cap.cv < 0.0) fail_field("capacity.cv", "must be >= 0");
  const double sigma2 = std::log(1.0 + cap.cv * cap.cv);
  const double sigma = std::sqrt(sigma2);
  TraceSeries series;
  series.rows.assign(slots, std::vector<EdgeServerCapacity>(servers));
  for (std::size_t s = 0; s < servers; ++s) {
    RandomStream bw(seed, std::uint32_t(s), kBandwidthStream);
    RandomStream cp(seed, std::uint32_t(s), kComputeStream);
    for (std::size_t t = 0; t < slots; ++t) {
      const double zb = sigma > 0.0 ? bw.normal_at(t) : 0.0;
      const double zc = sigma > 0.0 ? cp.normal_at(t) : 0.0;
      const double b =
          cap.mean_bandwidth_hz * std::exp(sigma * zb - 0.5 * sigma2);
      const double c =
          cap.mean_compute_flops * std::exp(sigma * zc - 0.5 * sigma2);
      series.rows[t][s].bandwidth_hz =
          std::max(b, 0.05 * cap.mean_bandwidth_hz);
      series.rows[t][s].compute_flops =
          std::max(c, 0.05 * cap.mean_compute_flops);
    }
  }
  return series;
}

TraceSeries load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open trace file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail("trace file '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "slot,server,bandwidth_hz,compute_flops") {
    fail("trace header must be 'slot,server,bandwidth_hz,compute_flops'");
  }

  std::map<std::pair<std::size_t, std::size_t>, EdgeServerCapacity> cells;
  std::size_t max_slot = 0;
  std::size_t max_server = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(row, cell, ',')) cols.push_back(cell);
    const std::string where = "line " + std::to_string(lineno);
    if (cols.size() != 4) fail(where + ": expected 4 columns");
    std::size_t slot = 0, server = 0;
    double b = 0.0, c = 0.0;
    try {
      slot = std::stoull(cols[0]);
      server = std::stoull(cols[1]);
      b = std::stod(cols[2]);
      c = std::stod(cols[3]);
    } catch (const std::exception&) {
      fail(where + ": malformed number");
    }
    if (b < 0.0) {
      fail(where + ": negative bandwidth for slot " + cols[0] + " server " +
           cols[1]);
    }
    if (c < 0.0) {
      fail(where + ": negative compute for slot " + cols[0] + " server " +
           cols[1]);
    }
    const auto key = std::make_pair(slot, server);
    if (cells.count(key)) {
      fail(where + ": duplicate entry for slot " + cols[0] + " server " +
           cols[1]);
    }
    cells[key] = EdgeServerCapacity{b, c};
    max_slot = std::max(max_slot, slot);
    max_server = std::max(max_server, server);
  }
  if (cells.empty()) fail("trace file '" + path + "' has no data rows");

  TraceSeries series;
  series.rows.assign(max_slot + 1,
                     std::vector<EdgeServerCapacity>(max_server + 1));
  for (std::size_t t = 0; t <= max_slot; ++t) {
    for (std::size_t s = 0; s <= max_server; ++s) {
      auto it = cells.find({t, s});
      if (it == cells.end()) {
        fail("missing entry for slot " + std::to_string(t) + " server " +
             std::to_string(s));
      }
      series.rows[t][s] = it->second;
    }
  }
  return series;
}

void save_trace(const TraceSeries& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot write trace file '" + path + "'");
  out << "slot,server,bandwidth_hz,compute_flops\n";
  for (std::size_t t = 0; t < series.rows.size(); ++t) {
    for (std::size_t s = 0; s < series.rows[t].size(); ++s) {
      out << t << ',' << s << ','
          << format_double(series.rows[t][s].bandwidth_hz) << ','
          << format_double(series.rows[t][s].compute_flops) << '\n';
    }
  }
}

TraceSeries scenario_traces(const ScenarioSpec& spec, std::uint64_t seed) {
  TraceSeries series;
  if (spec.capacity.trace_path.empty()) {
    series = gen_traces(spec.capacity, spec.servers, spec.slots, seed);
  } else {
    series = load_trace(spec.capacity.trace_path);
    if (series.servers() != spec.servers) {
      fail("trace covers " + std::to_string(series.servers()) +
           " servers, scenario expects " + std::to_string(spec.servers));
    }
    if (series.slots() < spec.slots) {
      fail("trace covers " + std::to_string(series.slots()) +
           " slots, scenario expects " + std::to_string(spec.slots));
    }
  }
  return series;
}

Fleet make_fleet(const ScenarioSpec& spec,
                 const std::vector<double>& difficulty) {
  if (difficulty.size() != spec.cameras) {
    throw std::invalid_argument("difficulty vector size mismatch");
  }
  Fleet fleet;
  fleet.resolutions_px = spec.resolutions_px;
  fleet.complexity.ref_resolution_px = spec.reference_resolution_px;
  std::vector<double> ceilings;
  for (const ModelSpec& m : spec.models) {
    fleet.model_names.push_back(m.name);
    fleet.complexity.flops_at_ref.push_back(m.flops_per_frame_at_ref);
    ceilings.push_back(m.accuracy_ceiling);
  }
  fleet.links.reserve(spec.cameras);
  fleet.accuracy.reserve(spec.cameras);
  for (std::size_t n = 0; n < spec.cameras; ++n) {
    fleet.links.push_back(LinkParams{spec.tx_power_w, spec.channel_gains[n],
                                     spec.noise_power_w,
                                     spec.bits_per_pixel_sq});
    fleet.accuracy.push_back(AccuracyProfile{
        ceilings, difficulty[n], spec.reference_resolution_px});
  }
  return fleet;
}

std::vector<double> initial_difficulty(const ScenarioSpec& spec) {
  return std::vector<double>(spec.cameras, spec.content.difficulty_init);
}

void advance_difficulty(const ScenarioSpec& spec, std::uint64_t seed,
                        std::size_t slot, std::vector<double>& difficulty) {
  if (spec.content.walk_step == 0.0) return;
  for (std::size_t n = 0; n < difficulty.size(); ++n) {
    RandomStream walk(seed, std::uint32_t(n), kDifficultyStream);
    const double z = walk.normal_at(slot);
    difficulty[n] =
        std::clamp(difficulty[n] * std::exp(spec.content.walk_step * z),
                   spec.content.difficulty_min, spec.content.difficulty_max);
  }
}

}  // namespace aopi
