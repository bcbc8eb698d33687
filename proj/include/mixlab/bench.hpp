#pragma once

// Runtime-scaling measurements of the operational (never materialized) forms,
// and log-log slope fits over sequence length.

#include "mixlab/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mixlab {

struct BenchSample {
  std::string op_label;
  Eigen::Index T = 0;
  Eigen::Index d = 0;
  Eigen::Index r_or_N = 0;
  double wall_time = 0.0;  // seconds, median of repeats
  int repeats = 0;
  double est_peak_bytes = 0.0;  // analytic working-set estimate from shapes
};

struct ScalingReport {
  std::string op_label;
  double fitted_slope = 0.0;
  double r_squared = 0.0;
  std::vector<BenchSample> samples;
};

/// softmax_attention, favor_attention, ssm_scan, bimamba_scan, hydra_scan.
const std::vector<std::string>& bench_operations();

/// Seeded inputs for one operation, plus the closure that runs it once.
struct PreparedOperation {
  std::vector<Matrix> inputs;  // everything the run reads, for determinism checks
  std::function<void()> run;
};

/// Throws ConfigError on an unknown label.
PreparedOperation prepare_operation(const std::string& op_label, Eigen::Index T, Eigen::Index d,
                                    Eigen::Index r_or_N, std::uint64_t seed);

/// Bytes of the dominant live buffers for one run (inputs, features, outputs).
double estimate_peak_bytes(const std::string& op_label, Eigen::Index T, Eigen::Index d,
                           Eigen::Index r_or_N);

/// For each T: build inputs, one warmup, then the median of `repeats` timed runs.
/// Runs with OpenMP limited to one thread. Needs >= 3 ascending T values and repeats >= 3.
std::vector<BenchSample> time_operation(const std::string& op_label,
                                        const std::vector<Eigen::Index>& T_values, Eigen::Index d,
                                        Eigen::Index r_or_N, int repeats, std::uint64_t seed);

/// Least-squares line through (log T, log time). Needs >= 3 samples with distinct T.
ScalingReport fit_loglog_slope(std::vector<BenchSample> samples);

}  // namespace mixlab
