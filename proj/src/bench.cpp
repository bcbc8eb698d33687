#include "mixlab/bench.hpp"

#include "mixlab/attention.hpp"
#include "mixlab/random.hpp"
#include "mixlab/ssm.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <set>

namespace mixlab {

namespace {

class SingleThreadScope {
 public:
  SingleThreadScope() : saved_(omp_get_max_threads()) { omp_set_num_threads(1); }
  ~SingleThreadScope() { omp_set_num_threads(saved_); }
  SingleThreadScope(const SingleThreadScope&) = delete;
  SingleThreadScope& operator=(const SingleThreadScope&) = delete;

 private:
  int saved_;
};

// Keeps results alive so the optimizer cannot drop the work.
volatile double g_sink = 0.0;

void consume(const FeatureSequence& y) { g_sink = g_sink + y.values()(0, 0); }

}  // namespace

const std::vector<std::string>& bench_operations() {
  static const std::vector<std::string> ops = {"softmax_attention", "favor_attention", "ssm_scan",
                                               "bimamba_scan", "hydra_scan"};
  return ops;
}

PreparedOperation prepare_operation(const std::string& op, Eigen::Index t, Eigen::Index d,
                                    Eigen::Index r_or_n, std::uint64_t seed) {
  if (t < 1 || d < 1 || (op != "softmax_attention" && r_or_n < 1)) {
    throw ConfigError("prepare_operation: sizes must be positive");
  }
  CounterRng rng(seed);
  PreparedOperation p;
  if (op == "softmax_attention" || op == "favor_attention") {
    // Variance 1/sqrt(d) per entry keeps q.k at unit scale.
    const double qk_std = std::pow(static_cast<double>(d), -0.25);
    auto qkv = std::make_shared<QkvTriple>(gaussian_matrix(rng, t, d, qk_std),
                                           gaussian_matrix(rng, t, d, qk_std),
                                           gaussian_matrix(rng, t, d, 1.0));
    p.inputs = {qkv->q(), qkv->k(), qkv->v()};
    if (op == "softmax_attention") {
      p.run = [qkv] { consume(softmax_attention(*qkv)); };
    } else {
      auto omega = std::make_shared<OrthogonalFeatureMatrix>(draw_orthogonal_features(d, r_or_n, rng()));
      p.inputs.push_back(omega->omega);
      p.run = [qkv, omega] { consume(favor_attention(*qkv, *omega)); };
    }
    return p;
  }
  if (op == "ssm_scan" || op == "bimamba_scan" || op == "hydra_scan") {
    auto x = std::make_shared<FeatureSequence>(gaussian_matrix(rng, t, d, 1.0));
    auto w = std::make_shared<BidirectionalWeights>(random_bidirectional_weights(rng, d, r_or_n));
    p.inputs = {x->values(), w->fwd.w_b, w->fwd.w_c, w->bwd.w_b, w->bwd.w_c};
    if (op == "ssm_scan") {
      p.run = [x, w] { consume(ssm_channelwise(*x, w->fwd)); };
    } else if (op == "bimamba_scan") {
      p.run = [x, w] { consume(bimamba_channelwise(*x, *w)); };
    } else {
      p.run = [x, w] { consume(hydra_channelwise(*x, *w)); };
    }
    return p;
  }
  throw ConfigError("unknown bench operation '" + op + "'");
}

double estimate_peak_bytes(const std::string& op, Eigen::Index t, Eigen::Index d, Eigen::Index r_or_n) {
  const double T = static_cast<double>(t);
  const double D = static_cast<double>(d);
  const double R = static_cast<double>(r_or_n);
  double doubles = 0.0;
  if (op == "softmax_attention") {
    // q, k, v, out, plus one 64-row logit tile.
    doubles = 4.0 * T * D + 64.0 * T;
  } else if (op == "favor_attention") {
    // q, k, v, out, exponents and both feature maps.
    doubles = 4.0 * T * D + 3.0 * T * R + R * D;
  } else if (op == "ssm_scan" || op == "bimamba_scan" || op == "hydra_scan") {
    const double directions = op == "ssm_scan" ? 1.0 : 2.0;
    // x, y, reversed copy, and per-direction (a, delta, b, c).
    doubles = 3.0 * T * D + directions * (2.0 * T + 2.0 * T * R);
  } else {
    throw ConfigError("unknown bench operation '" + op + "'");
  }
  return doubles * sizeof(double);
}

std::vector<BenchSample> time_operation(const std::string& op,
                                        const std::vector<Eigen::Index>& t_values, Eigen::Index d,
                                        Eigen::Index r_or_n, int repeats, std::uint64_t seed) {
  if (t_values.size() < 3) throw ConfigError("time_operation: need at least 3 sequence lengths");
  if (std::adjacent_find(t_values.begin(), t_values.end(),
                         [](Eigen::Index a, Eigen::Index b) { return a >= b; }) != t_values.end()) {
    throw ConfigError("time_operation: sequence lengths must be strictly increasing");
  }
  if (repeats < 3) throw ConfigError("time_operation: need repeats >= 3");

  using clock = std::chrono::steady_clock;
  SingleThreadScope single;
  std::vector<BenchSample> samples;
  for (Eigen::Index t : t_values) {
    PreparedOperation prepared = prepare_operation(op, t, d, r_or_n, seed);
    prepared.run();  // warmup
    std::vector<double> times;
    for (int i = 0; i < repeats; ++i) {
      const auto start = clock::now();
      prepared.run();
      const std::chrono::duration<double> elapsed = clock::now() - start;
      times.push_back(std::max(elapsed.count(), 1e-9));
    }
    std::sort(times.begin(), times.end());
    const double med = times.size() % 2 == 1
                           ? times[times.size() / 2]
                           : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
    samples.push_back({op, t, d, r_or_n, med, repeats, estimate_peak_bytes(op, t, d, r_or_n)});
  }
  return samples;
}

ScalingReport fit_loglog_slope(std::vector<BenchSample> samples) {
  if (samples.size() < 3) throw ConfigError("fit_loglog_slope: need at least 3 samples");
  std::set<Eigen::Index> distinct;
  for (const auto& s : samples) {
    if (s.T < 1 || !(s.wall_time > 0.0)) throw ConfigError("fit_loglog_slope: T and times must be positive");
    distinct.insert(s.T);
  }
  if (distinct.size() != samples.size()) {
    throw ConfigError("fit_loglog_slope: sequence lengths must be distinct");
  }

  const double n = static_cast<double>(samples.size());
  double mx = 0.0, my = 0.0;
  for (const auto& s : samples) {
    mx += std::log(static_cast<double>(s.T));
    my += std::log(s.wall_time);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& s : samples) {
    const double dx = std::log(static_cast<double>(s.T)) - mx;
    const double dy = std::log(s.wall_time) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  ScalingReport report;
  report.op_label = samples.front().op_label;
  report.fitted_slope = sxy / sxx;
  const double ss_res = std::max(0.0, syy - report.fitted_slope * sxy);
  report.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  report.samples = std::move(samples);
  return report;
}

}  // namespace mixlab
