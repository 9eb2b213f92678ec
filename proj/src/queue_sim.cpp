#include "aopi/queue_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "aopi/rng.hpp"

namespace aopi {

namespace {

constexpr int kBatches = 50;
constexpr double kStudentT49 = 2.0096;   // 97.5% quantile, 49 df

constexpr std::uint32_t kStreamTransmission = 0;
constexpr std::uint32_t kStreamService = 1;
constexpr std::uint32_t kStreamRecognition = 2;

struct Completion {
  double gen = 0.0;
  double dep = 0.0;
  bool accurate = false;
};

// Integrates the age path (slope 1, reset to dep - gen at each accurate
// completion with a newer generation time) over [0, end] and accumulates
// the [warm, end] portion into 50 equal-width batches.
struct AgeIntegrator {
  double warm;
  double end;
  double batch_width;
  std::vector<double> batch_area = std::vector<double>(kBatches, 0.0);
  double full_area = 0.0;
  double window_area = 0.0;

  AgeIntegrator(double warm_time, double end_time)
      : warm(warm_time),
        end(end_time),
        batch_width((end_time - warm_time) / kBatches) {}

  static double strip(double a, double b, double ref) {
    return 0.5 * ((b - ref) * (b - ref) - (a - ref) * (a - ref));
  }

  // Age over [a, b) references generation time `ref`.
  void add(double a, double b, double ref) {
    if (b <= a) return;
    full_area += strip(a, b, ref);
    const double lo = std::max(a, warm);
    const double hi = std::min(b, end);
    if (hi <= lo) return;
    window_area += strip(lo, hi, ref);
    if (batch_width <= 0.0) return;
    int first = int((lo - warm) / batch_width);
    first = std::clamp(first, 0, kBatches - 1);
    for (int k = first; k < kBatches; ++k) {
      const double bl = warm + k * batch_width;
      const double bh = (k == kBatches - 1) ? end : bl + batch_width;
      const double sl = std::max(lo, bl);
      const double sh = std::min(hi, bh);
      if (sh > sl) batch_area[k] += strip(sl, sh, ref);
      if (bh >= hi) break;
    }
  }
};

}  // namespace

SimResult simulate_single(const SimConfig& cfg) {
  const double lambda = cfg.inputs.lambda;
  const double mu = cfg.inputs.mu;
  const double p = cfg.inputs.p;
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("p must lie in (0, 1]");
  }
  if (cfg.horizon_frames < 1000) {
    throw std::invalid_argument("horizon_frames must be at least 1000");
  }
  if (cfg.warmup_fraction < 0.0 || cfg.warmup_fraction > 0.9) {
    throw std::invalid_argument("warmup_fraction must lie in [0, 0.9]");
  }
  if (cfg.inputs.policy == Policy::kFcfs && !(lambda < mu)) {
    std::ostringstream os;
    os << "fcfs unstable: lambda=" << lambda << " >= mu=" << mu;
    throw InstabilityError(os.str());
  }

  const RandomStream trans(cfg.seed, cfg.camera_id, kStreamTransmission);
  const RandomStream service(cfg.seed, cfg.camera_id, kStreamService);
  const RandomStream recog(cfg.seed, cfg.camera_id, kStreamRecognition);

  const std::uint64_t n = cfg.horizon_frames;
  const auto warm_index = std::uint64_t(cfg.warmup_fraction * double(n));

  SimResult res;
  res.generated = n;
  std::vector<Completion> completions;
  completions.reserve(n);
  if (cfg.keep_frame_log) res.frames.reserve(n);

  double gen = 0.0;
  double warm_time = 0.0;
  double prev_dep = 0.0;        // FCFS: departure of the previous frame
  double prev_trans = 0.0;      // FCFS diagnostics: T_{i-1}
  bool prev_in_window = false;  // FCFS diagnostics: i-1 >= warm_index
  double tw_sum = 0.0;
  std::uint64_t tw_samples = 0;

  if (cfg.inputs.policy == Policy::kFcfs) {
    for (std::uint64_t i = 0; i < n; ++i) {
      if (i == warm_index) warm_time = gen;
      const double t = trans.exponential_at(i, lambda);
      const double o = service.exponential_at(i, mu);
      const bool acc = recog.bernoulli_at(i, p);
      const double arrive = gen + t;
      const double wait = std::max(0.0, prev_dep - arrive);
      const double dep = arrive + wait + o;
      if (i > 0 && prev_in_window) {
        tw_sum += prev_trans * wait;
        ++tw_samples;
      }
      completions.push_back({gen, dep, acc});
      if (cfg.keep_frame_log) {
        res.frames.push_back({i, gen, arrive, dep, acc});
      }
      prev_dep = dep;
      prev_trans = t;
      prev_in_window = i >= warm_index;
      gen = arrive;
    }
  } else {
    double pending_gen = 0.0;
    double pending_dep = 0.0;
    bool pending = false;
    std::uint64_t pending_index = 0;
    bool pending_acc = false;
    double pending_arrive = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      if (i == warm_index) warm_time = gen;
      const double t = trans.exponential_at(i, lambda);
      const double o = service.exponential_at(i, mu);
      const bool acc = recog.bernoulli_at(i, p);
      const double arrive = gen + t;
      if (pending) {
        // The frame in service either finished before this arrival or is
        // preempted and discarded now.
        if (pending_dep <= arrive) {
          completions.push_back({pending_gen, pending_dep, pending_acc});
          if (cfg.keep_frame_log) {
            res.frames.push_back({pending_index, pending_gen, pending_arrive,
                                  pending_dep, pending_acc});
          }
        } else {
          ++res.preempted;
          if (cfg.keep_frame_log) {
            res.frames.push_back(
                {pending_index, pending_gen, pending_arrive, {}, false});
          }
        }
      }
      pending = true;
      pending_gen = gen;
      pending_arrive = arrive;
      pending_dep = arrive + o;
      pending_index = i;
      pending_acc = acc;
      gen = arrive;
    }
    if (pending) {
      completions.push_back({pending_gen, pending_dep, pending_acc});
      if (cfg.keep_frame_log) {
        res.frames.push_back(
            {pending_index, pending_gen, pending_arrive, pending_dep,
             pending_acc});
      }
    }
  }

  res.completed = completions.size();
  res.warmup_time = warm_time;
  res.end_time = completions.empty() ? gen : completions.back().dep;

  std::uint64_t accurate_total = 0;
  for (const Completion& c : completions) {
    if (c.accurate) ++accurate_total;
  }
  res.empirical_accuracy =
      res.completed == 0 ? 0.0 : double(accurate_total) / double(res.completed);

  AgeIntegrator integ(res.warmup_time, res.end_time);
  double ref = 0.0;   // fictitious accurate frame generated at t = 0
  double prev = 0.0;
  for (const Completion& c : completions) {
    integ.add(prev, c.dep, ref);
    if (c.accurate && c.gen > ref) ref = c.gen;
    prev = c.dep;
  }
  res.full_area = integ.full_area;
  res.window_area = integ.window_area;

  const double window = res.end_time - res.warmup_time;
  res.mean_aopi = window > 0.0 ? res.window_area / window : 0.0;
  if (window > 0.0) {
    double mean_of_batches = 0.0;
    std::vector<double> means(kBatches, 0.0);
    for (int k = 0; k < kBatches; ++k) {
      means[k] = integ.batch_area[k] / integ.batch_width;
      mean_of_batches += means[k];
    }
    mean_of_batches /= kBatches;
    double var = 0.0;
    for (int k = 0; k < kBatches; ++k) {
      const double d = means[k] - mean_of_batches;
      var += d * d;
    }
    var /= (kBatches - 1);
    res.aopi_ci95 = kStudentT49 * std::sqrt(var / kBatches);
  }

  // Diagnostics over post-warmup completions.
  SimDiagnostics& diag = res.diagnostics;
  diag.mean_trans_wait_product =
      cfg.inputs.policy == Policy::kFcfs && tw_samples > 0
          ? tw_sum / double(tw_samples)
          : std::numeric_limits<double>::quiet_NaN();
  double y_sum = 0.0;
  double y2_sum = 0.0;
  std::uint64_t y_samples = 0;
  std::uint64_t in_window = 0;
  double prev_window_dep = 0.0;
  bool have_prev = false;
  for (const Completion& c : completions) {
    if (c.dep < res.warmup_time) continue;
    ++in_window;
    if (have_prev) {
      const double y = c.dep - prev_window_dep;
      y_sum += y;
      y2_sum += y * y;
      ++y_samples;
    }
    prev_window_dep = c.dep;
    have_prev = true;
  }
  diag.completed_samples = in_window;
  diag.effective_rate = window > 0.0 ? double(in_window) / window : 0.0;
  diag.mean_interdeparture = y_samples > 0 ? y_sum / double(y_samples) : 0.0;
  diag.mean_sq_interdeparture =
      y_samples > 0 ? y2_sum / double(y_samples) : 0.0;
  return res;
}

DiagnosticsReport diagnostics_check(const SimResult& result,
                                    const AopiInputs& inputs) {
  if (result.diagnostics.completed_samples < 100000) {
    throw std::invalid_argument(
        "diagnostics need at least 1e5 completed samples, got " +
        std::to_string(result.diagnostics.completed_samples));
  }
  const double lambda = inputs.lambda;
  const double mu = inputs.mu;
  DiagnosticsReport rep;
  if (inputs.policy == Policy::kFcfs) {
    const double tw = (2.0 * lambda * lambda + mu * mu - lambda * mu) /
                      (mu * mu * (mu * mu - lambda * lambda));
    rep.trans_wait_product_rel_err =
        std::abs(result.diagnostics.mean_trans_wait_product - tw) / tw;
  } else {
    const double rate = lambda * mu / (lambda + mu);
    const double y1 = (lambda + mu) / (lambda * mu);
    const double y2 = 2.0 / (lambda * lambda) + 2.0 / (lambda * mu) +
                      2.0 / (mu * mu);
    rep.effective_rate_rel_err =
        std::abs(result.diagnostics.effective_rate - rate) / rate;
    rep.interdeparture_mean_rel_err =
        std::abs(result.diagnostics.mean_interdeparture - y1) / y1;
    rep.interdeparture_sq_rel_err =
        std::abs(result.diagnostics.mean_sq_interdeparture - y2) / y2;
  }
  return rep;
}

std::vector<SimResult> simulate_slot(const SlotDecision& decision,
                                     const Fleet& fleet, std::uint64_t seed,
                                     std::uint64_t horizon_frames,
                                     double warmup_fraction,
                                     bool keep_frame_log) {
  const std::size_t n = fleet.cameras();
  if (decision.cameras() != n) {
    throw std::invalid_argument(
        "decision dimensions do not match the camera count");
  }
  std::vector<SimResult> out;
  out.reserve(n);
  for (std::size_t cam = 0; cam < n; ++cam) {
    const VideoConfig& cfg = decision.config[cam];
    try {
      SimConfig sc;
      sc.inputs.lambda = transmission_rate(decision.bandwidth_hz[cam],
                                           fleet.links[cam],
                                           cfg.resolution_px);
      sc.inputs.mu = computation_rate(decision.compute_flops[cam], cfg,
                                      fleet.complexity);
      sc.inputs.p = accuracy(cfg, fleet.accuracy[cam]);
      sc.inputs.policy = cfg.policy;
      sc.horizon_frames = horizon_frames;
      sc.warmup_fraction = warmup_fraction;
      sc.seed = seed;
      sc.camera_id = std::uint32_t(cam);
      sc.keep_frame_log = keep_frame_log;
      out.push_back(simulate_single(sc));
    } catch (const InstabilityError& e) {
      throw InstabilityError("camera " + std::to_string(cam) + ": " +
                             e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("camera " + std::to_string(cam) + ": " +
                                  e.what());
    } catch (const std::out_of_range& e) {
      throw std::out_of_range("camera " + std::to_string(cam) + ": " +
                              e.what());
    }
  }
  return out;
}

}  // namespace aopi
