#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "aopi/scenario.hpp"

using namespace aopi;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "aopi_scenario_tests";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

void expect_error(const std::function<void()>& fn, const std::string& substr) {
  try {
    fn();
    FAIL_CHECK("expected ScenarioError mentioning '" << substr << "'");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find(substr) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("default scenario validates and round-trips through JSON") {
  const ScenarioSpec spec = default_scenario();
  CHECK_NOTHROW(validate_scenario(spec));
  CHECK(spec.cameras == 30);
  CHECK(spec.servers == 3);
  CHECK(spec.models.size() == 5);
  CHECK(spec.channel_gains.size() == 30);
  CHECK(spec.channel_gains[0] == 20.0);
  CHECK(spec.channel_gains[8] == doctest::Approx(20.0 * 1.3));
  CHECK(spec.optimizer.v == spec.v);

  const fs::path path = tmp_dir() / "roundtrip.json";
  save_scenario(spec, path.string());
  const ScenarioSpec back = load_scenario(path.string());
  CHECK(back.cameras == spec.cameras);
  CHECK(back.servers == spec.servers);
  CHECK(back.slots == spec.slots);
  CHECK(back.slot_length_s == spec.slot_length_s);
  CHECK(back.p_min == spec.p_min);
  CHECK(back.v == spec.v);
  CHECK(back.seeds == spec.seeds);
  CHECK(back.resolutions_px == spec.resolutions_px);
  REQUIRE(back.models.size() == spec.models.size());
  for (std::size_t m = 0; m < spec.models.size(); ++m) {
    CHECK(back.models[m].name == spec.models[m].name);
    CHECK(back.models[m].flops_per_frame_at_ref ==
          spec.models[m].flops_per_frame_at_ref);
    CHECK(back.models[m].accuracy_ceiling == spec.models[m].accuracy_ceiling);
  }
  CHECK(back.channel_gains == spec.channel_gains);
  CHECK(back.content.difficulty_init == spec.content.difficulty_init);
  CHECK(back.content.walk_step == spec.content.walk_step);
  CHECK(back.capacity.mean_bandwidth_hz == spec.capacity.mean_bandwidth_hz);
  CHECK(back.capacity.cv == spec.capacity.cv);
  CHECK(back.sim.frames_per_slot == spec.sim.frames_per_slot);
  CHECK(back.optimizer.epsilon_stability == spec.optimizer.epsilon_stability);
  CHECK(back.jcab_latency_budget_s == spec.jcab_latency_budget_s);
}

TEST_CASE("sparse spec files fill in defaults") {
  const fs::path path = tmp_dir() / "minimal.json";
  write_file(path, "{\"schema_version\": 1}\n");
  const ScenarioSpec spec = load_scenario(path.string());
  const ScenarioSpec def = default_scenario();
  CHECK(spec.cameras == def.cameras);
  CHECK(spec.seeds == def.seeds);
  CHECK(spec.models.size() == def.models.size());
  CHECK(spec.channel_gains == def.channel_gains);

  SUBCASE("link gains regenerate for a non-default camera count") {
    write_file(path, "{\"schema_version\": 1, \"cameras\": 9}\n");
    const ScenarioSpec small = load_scenario(path.string());
    REQUIRE(small.channel_gains.size() == 9);
    for (std::size_t n = 0; n < 9; ++n) {
      CHECK(small.channel_gains[n] ==
            doctest::Approx(20.0 * (1.0 + 0.3 * double(n % 7))));
    }
  }

  SUBCASE("the age weight propagates into the optimizer parameters") {
    write_file(path, "{\"schema_version\": 1, \"v\": 25.0}\n");
    CHECK(load_scenario(path.string()).optimizer.v == 25.0);
  }
}

TEST_CASE("spec loading names the offending field") {
  const fs::path path = tmp_dir() / "bad.json";
  const auto load = [&] { load_scenario(path.string()); };

  write_file(path, "{\"cameras\": 4}\n");
  expect_error(load, "schema_version");

  write_file(path, "{\"schema_version\": 1, \"bogus\": 3}\n");
  expect_error(load, "bogus");

  write_file(path, "{\"schema_version\": 1, \"content\": {\"bogus\": 3}}\n");
  expect_error(load, "content.bogus");

  write_file(path, "{\"schema_version\": 1, \"cameras\": \"three\"}\n");
  expect_error(load, "cameras");

  write_file(path, "{\"schema_version\": 1, \"seeds\": [-1]}\n");
  expect_error(load, "seeds");

  write_file(path, "{\"schema_version\": 1, \"resolutions_px\": [1.5]}\n");
  expect_error(load, "resolutions_px");

  write_file(path, "{\"schema_version\": 1, \"models\": [7]}\n");
  expect_error(load, "models[0]");

  write_file(path, "{\"schema_version\": 1, \"optimizer\": {\"max_bcd_iters\": 0}}\n");
  expect_error(load, "max_bcd_iters");

  write_file(path, "{not json\n");
  expect_error(load, path.string());

  expect_error([] { load_scenario("/nonexistent/nowhere.json"); }, "nowhere");
}

TEST_CASE("validation rejects out-of-range values") {
  const auto broken = [](const std::function<void(ScenarioSpec&)>& mutate) {
    ScenarioSpec spec = default_scenario();
    mutate(spec);
    return [spec] { validate_scenario(spec); };
  };
  expect_error(broken([](ScenarioSpec& s) { s.schema_version = 2; }),
               "schema_version");
  expect_error(broken([](ScenarioSpec& s) { s.cameras = 0; }), "cameras");
  expect_error(broken([](ScenarioSpec& s) { s.p_min = 1.5; }), "p_min");
  expect_error(broken([](ScenarioSpec& s) { s.v = 0.0; }), "'v'");
  expect_error(broken([](ScenarioSpec& s) { s.seeds.clear(); }), "seeds");
  expect_error(broken([](ScenarioSpec& s) { s.channel_gains.pop_back(); }),
               "channel_gains");
  expect_error(broken([](ScenarioSpec& s) { s.models[2].accuracy_ceiling = 1.2; }),
               "models[2].accuracy_ceiling");
  expect_error(broken([](ScenarioSpec& s) { s.content.walk_step = -0.1; }),
               "walk_step");
  expect_error(broken([](ScenarioSpec& s) { s.content.difficulty_init = 9.0; }),
               "difficulty_init");
  expect_error(broken([](ScenarioSpec& s) { s.sim.frames_per_slot = 999; }),
               "frames_per_slot");
  expect_error(broken([](ScenarioSpec& s) { s.sim.warmup_fraction = 0.95; }),
               "warmup_fraction");
  expect_error(broken([](ScenarioSpec& s) { s.optimizer.epsilon_stability = 1.0; }),
               "epsilon_stability");
  expect_error(broken([](ScenarioSpec& s) { s.jcab_latency_budget_s = 0.0; }),
               "jcab_latency_budget_s");
}

TEST_CASE("synthetic capacity series") {
  CapacitySpec cap;
  cap.mean_bandwidth_hz = 3e7;
  cap.mean_compute_flops = 5e13;

  SUBCASE("zero variation gives exactly the means") {
    cap.cv = 0.0;
    const TraceSeries series = gen_traces(cap, 2, 50, 1);
    for (const auto& row : series.rows) {
      for (const auto& c : row) {
        CHECK(c.bandwidth_hz == 3e7);
        CHECK(c.compute_flops == 5e13);
      }
    }
  }

  SUBCASE("deterministic in the seed, distinct across seeds and servers") {
    cap.cv = 0.25;
    const TraceSeries a = gen_traces(cap, 2, 20, 7);
    const TraceSeries b = gen_traces(cap, 2, 20, 7);
    const TraceSeries c = gen_traces(cap, 2, 20, 8);
    bool seed_differs = false;
    bool server_differs = false;
    for (std::size_t t = 0; t < 20; ++t) {
      CHECK(a.rows[t][0].bandwidth_hz == b.rows[t][0].bandwidth_hz);
      CHECK(a.rows[t][1].compute_flops == b.rows[t][1].compute_flops);
      seed_differs |= a.rows[t][0].bandwidth_hz != c.rows[t][0].bandwidth_hz;
      server_differs |= a.rows[t][0].bandwidth_hz != a.rows[t][1].bandwidth_hz;
    }
    CHECK(seed_differs);
    CHECK(server_differs);
  }

  SUBCASE("clipped below and unbiased in the mean") {
    cap.cv = 0.25;
    const TraceSeries series = gen_traces(cap, 1, 10000, 3);
    double sum_b = 0.0;
    for (const auto& row : series.rows) {
      REQUIRE(row[0].bandwidth_hz >= 0.05 * cap.mean_bandwidth_hz);
      REQUIRE(row[0].compute_flops >= 0.05 * cap.mean_compute_flops);
      sum_b += row[0].bandwidth_hz;
    }
    CHECK(sum_b / 10000.0 ==
          doctest::Approx(cap.mean_bandwidth_hz).epsilon(0.02));
  }

  SUBCASE("rejects bad parameters") {
    cap.mean_bandwidth_hz = 0.0;
    expect_error([&] { gen_traces(cap, 1, 1, 1); }, "capacity");
    cap.mean_bandwidth_hz = 3e7;
    cap.cv = -0.1;
    expect_error([&] { gen_traces(cap, 1, 1, 1); }, "cv");
  }
}

TEST_CASE("capacity trace files") {
  const fs::path path = tmp_dir() / "trace.csv";

  SUBCASE("round trip is bitwise exact") {
    CapacitySpec cap;
    cap.cv = 0.25;
    const TraceSeries series = gen_traces(cap, 3, 7, 42);
    save_trace(series, path.string());
    const TraceSeries back = load_trace(path.string());
    REQUIRE(back.slots() == 7);
    REQUIRE(back.servers() == 3);
    for (std::size_t t = 0; t < 7; ++t) {
      for (std::size_t s = 0; s < 3; ++s) {
        CHECK(back.rows[t][s].bandwidth_hz == series.rows[t][s].bandwidth_hz);
        CHECK(back.rows[t][s].compute_flops == series.rows[t][s].compute_flops);
      }
    }
  }

  SUBCASE("rejects malformed files with the line and cell named") {
    const auto load = [&] { load_trace(path.string()); };
    const std::string header = "slot,server,bandwidth_hz,compute_flops\n";

    write_file(path, "slot,server,bw,flops\n0,0,1,1\n");
    expect_error(load, "header");

    write_file(path, header);
    expect_error(load, "no data rows");

    write_file(path, header + "0,0,1e6\n");
    expect_error(load, "line 2");

    write_file(path, header + "0,0,1e6,abc\n");
    expect_error(load, "malformed number");

    write_file(path, header + "0,0,-1,1e11\n");
    expect_error(load, "negative bandwidth for slot 0 server 0");

    write_file(path, header + "0,0,1e6,1e11\n0,0,2e6,1e11\n");
    expect_error(load, "duplicate entry for slot 0 server 0");

    write_file(path, header + "0,0,1e6,1e11\n0,1,1e6,1e11\n1,0,1e6,1e11\n");
    expect_error(load, "missing entry for slot 1 server 1");

    expect_error([] { load_trace("/nonexistent/tr.csv"); }, "cannot open");
  }
}

TEST_CASE("scenario capacity series honors the configured trace") {
  const fs::path dir = tmp_dir() / "specdir";
  fs::create_directories(dir);
  CapacitySpec cap;
  cap.cv = 0.25;
  const TraceSeries series = gen_traces(cap, 2, 3, 11);
  save_trace(series, (dir / "cap.csv").string());
  write_file(dir / "sc.json",
             "{\"schema_version\": 1, \"servers\": 2, \"slots\": 3,"
             " \"capacity\": {\"trace_path\": \"cap.csv\"}}\n");

  ScenarioSpec spec = load_scenario((dir / "sc.json").string());
  CHECK(fs::path(spec.capacity.trace_path).filename() == "cap.csv");
  CHECK(fs::equivalent(fs::path(spec.capacity.trace_path).parent_path(), dir));
  const TraceSeries got = scenario_traces(spec, 99);
  REQUIRE(got.slots() == 3);
  CHECK(got.rows[2][1].bandwidth_hz == series.rows[2][1].bandwidth_hz);

  SUBCASE("shape mismatches are rejected") {
    spec.slots = 5;
    expect_error([&] { scenario_traces(spec, 1); }, "trace covers 3 slots");
    spec.slots = 3;
    spec.servers = 3;
    spec.channel_gains = default_scenario().channel_gains;
    expect_error([&] { scenario_traces(spec, 1); }, "trace covers 2 servers");
  }

  SUBCASE("an empty path falls back to synthetic series") {
    spec.capacity.trace_path.clear();
    const TraceSeries synth = scenario_traces(spec, 5);
    CHECK(synth.slots() == 3);
    CHECK(synth.rows[0][0].bandwidth_hz > 0.0);
  }
}

TEST_CASE("fleet assembly from a spec") {
  ScenarioSpec spec = default_scenario();
  spec.cameras = 2;
  spec.channel_gains = {10.0, 25.0};
  const std::vector<double> difficulty{2.0, 3.1};
  const Fleet fleet = make_fleet(spec, difficulty);
  REQUIRE(fleet.links.size() == 2);
  REQUIRE(fleet.accuracy.size() == 2);
  CHECK(fleet.links[1].channel_gain == 25.0);
  CHECK(fleet.links[0].tx_power_w == spec.tx_power_w);
  CHECK(fleet.links[0].bits_per_pixel_sq == spec.bits_per_pixel_sq);
  CHECK(fleet.accuracy[0].content_difficulty == 2.0);
  CHECK(fleet.accuracy[1].content_difficulty == 3.1);
  REQUIRE(fleet.accuracy[0].ceiling.size() == 5);
  CHECK(fleet.accuracy[0].ceiling[4] == 0.93);
  CHECK(fleet.model_names[2] == "m2");
  CHECK(fleet.complexity.flops_at_ref[2] == 0.45e12);
  CHECK(fleet.complexity.ref_resolution_px == 640.0);
  CHECK(fleet.resolutions_px == spec.resolutions_px);
  CHECK_THROWS_AS(make_fleet(spec, {2.0}), std::invalid_argument);
}

TEST_CASE("content difficulty walk") {
  ScenarioSpec spec = default_scenario();
  spec.cameras = 3;
  spec.channel_gains = {10.0, 10.0, 10.0};

  SUBCASE("starts at the configured value") {
    const std::vector<double> d = initial_difficulty(spec);
    REQUIRE(d.size() == 3);
    for (double v : d) CHECK(v == spec.content.difficulty_init);
  }

  SUBCASE("stays within bounds and is deterministic") {
    spec.content.walk_step = 0.5;
    std::vector<double> a = initial_difficulty(spec);
    std::vector<double> b = initial_difficulty(spec);
    bool cameras_differ = false;
    for (std::size_t t = 0; t < 200; ++t) {
      advance_difficulty(spec, 7, t, a);
      advance_difficulty(spec, 7, t, b);
      for (double v : a) {
        REQUIRE(v >= spec.content.difficulty_min);
        REQUIRE(v <= spec.content.difficulty_max);
      }
      cameras_differ |= a[0] != a[1];
    }
    CHECK(a == b);
    CHECK(cameras_differ);

    std::vector<double> c = initial_difficulty(spec);
    advance_difficulty(spec, 8, 0, c);
    CHECK(c != std::vector<double>(3, spec.content.difficulty_init));
  }

  SUBCASE("zero step freezes the difficulty") {
    spec.content.walk_step = 0.0;
    std::vector<double> d = initial_difficulty(spec);
    advance_difficulty(spec, 7, 0, d);
    advance_difficulty(spec, 7, 1, d);
    for (double v : d) CHECK(v == spec.content.difficulty_init);
  }
}
