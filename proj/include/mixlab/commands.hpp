#pragma once

// The four CLI subcommands, as plain functions over a RunConfig so they can be
// driven from tests without spawning a process.

#include "mixlab/blocks.hpp"
#include "mixlab/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mixlab {

/// Exit statuses shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitIo = 3,
};

/// Environment variable consulted for the output directory when --out is absent.
inline constexpr const char* kOutputDirEnv = "MIXLAB_OUT_DIR";

struct RunConfig {
  std::uint64_t seed = 42;
  Eigen::Index T = 64;
  Eigen::Index d_model = 64;
  Eigen::Index num_heads = 4;
  Eigen::Index r = 16;
  Eigen::Index N = 16;
  Eigen::Index kernel_size = 7;
  Eigen::Index dilation_period = 4;
  Eigen::Index num_blocks = 2;
  MixerKind mixer_kind = MixerKind::hydra;
  std::filesystem::path output_dir = "mixlab_out";
  std::optional<std::string> preset;

  // equiv
  double tol = 1e-9;
  int trials = 20;
  // diagnose
  int bins = 50;
  std::optional<std::filesystem::path> qk_dump;
  // bench
  std::vector<Eigen::Index> bench_T = {256, 512, 1024, 2048};
  Eigen::Index bench_d = 64;
  int repeats = 3;
  // demo
  bool zero_weights = false;
  bool save_weights = true;

  /// Throws ConfigError for non-positive sizes or inconsistent head splits.
  void validate() const;
  /// The stack configuration this run describes, with the preset applied.
  BlockStackConfig stack_config() const;
};

/// Parses "a,b,c" into ascending-order-preserving integers. Throws ConfigError.
std::vector<Eigen::Index> parse_index_list(const std::string& text);

/// Scan/mixer and kernel/materialization equivalence suites. Writes equiv.csv
/// (case, max_abs_err, pass); returns kExitOk iff every case is within cfg.tol.
int cmd_equiv(const RunConfig& cfg);

/// Softmax and FAVOR+ maps from seeded (or dumped) Q/K. Writes rank_report.csv,
/// l2_hist.csv, locality.csv and approx_curve.csv for the head-averaged FAVOR+
/// map, plus l2_hist_softmax.csv and locality_softmax.csv for the softmax map.
int cmd_diagnose(const RunConfig& cfg);

/// Timing sweep over cfg.bench_T for every bench operation. Writes bench.csv,
/// scaling.csv and memory.csv.
int cmd_bench(const RunConfig& cfg);

/// Random block stack on a random input. Writes demo.csv (per-block output
/// norms, dilations and an output checksum) and, with save_weights, the stack
/// weights as weights.manifest / weights.bin.
int cmd_demo(const RunConfig& cfg);

}  // namespace mixlab
