#include "mixlab/commands.hpp"

#include "mixlab/attention.hpp"
#include "mixlab/bench.hpp"
#include "mixlab/diagnostics.hpp"
#include "mixlab/random.hpp"
#include "mixlab/reference.hpp"
#include "mixlab/ssm.hpp"
#include "mixlab/tensor_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mixlab {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Comma-separated, LF-terminated, header first.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write " + path.string());
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

std::string s(Eigen::Index v) { return std::to_string(v); }

// FNV-1a over the little-endian bytes of every entry.
std::string checksum(const Matrix& m) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits;
    const double v = m.data()[i];
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

struct EquivCase {
  std::string name;
  double max_abs_err = 0.0;
};

}  // namespace

void RunConfig::validate() const {
  if (T < 1 || d_model < 1 || num_heads < 1 || r < 1 || N < 1 || kernel_size < 1 ||
      dilation_period < 1 || num_blocks < 1) {
    throw ConfigError("all integer settings must be positive");
  }
  if (d_model % num_heads != 0) throw ConfigError("d_model must be divisible by num_heads");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (trials < 1 || bins < 1 || repeats < 1 || bench_d < 1) {
    throw ConfigError("trials, bins, repeats and bench_d must be positive");
  }
  stack_config().validate();
}

BlockStackConfig RunConfig::stack_config() const {
  BlockStackConfig c;
  c.d_model = d_model;
  c.num_blocks = num_blocks;
  c.dilation_period = dilation_period;
  c.kernel_size = kernel_size;
  c.mixer = mixer_kind;
  c.num_heads = num_heads;
  c.features = r;
  c.state_size = N;
  if (preset) c = apply_preset(c, *preset);
  return c;
}

std::vector<Eigen::Index> parse_index_list(const std::string& text) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    long long v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || v < 1) {
      throw ConfigError("expected a comma-separated list of positive integers, got '" + text + "'");
    }
    out.push_back(static_cast<Eigen::Index>(v));
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

int cmd_equiv(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.output_dir);
  const CounterRng root(cfg.seed);
  const Eigen::Index t = cfg.T;
  const Eigen::Index n = cfg.N;
  const Eigen::Index dh = cfg.d_model / cfg.num_heads;

  std::vector<EquivCase> cases = {{"ssm_scan_vs_mixer"},         {"bimamba_apply_vs_mixer"},
                                  {"hydra_apply_vs_mixer"},      {"favor_attention_vs_mixer"},
                                  {"softmax_attention_vs_mixer"}, {"hydra_channelwise_vs_reference"}};
  auto track = [](EquivCase& c, const Matrix& a, const Matrix& b) {
    c.max_abs_err = std::max(c.max_abs_err, (a - b).cwiseAbs().maxCoeff());
  };

  for (int trial = 0; trial < cfg.trials; ++trial) {
    CounterRng rng = root.fork(static_cast<std::uint64_t>(trial));
    const Vector x = gaussian_vector(rng, t);

    const ScanParams fwd = random_scan_params(rng, t, n);
    const ScanParams bwd = random_scan_params(rng, t, n);
    track(cases[0], ssm_scan(fwd, x), ssm_mixer(fwd).matrix() * x);

    const BiMambaParams bi{fwd, bwd};
    track(cases[1], bimamba_apply(bi, x), bimamba_mixer(bi).matrix() * x);

    const HydraParams hy{fwd, bwd, gaussian_vector(rng, t)};
    track(cases[2], hydra_apply(hy, x), hydra_mixer(hy).matrix() * x);

    const double qk_std = std::pow(static_cast<double>(dh), -0.25);
    const QkvTriple qkv(gaussian_matrix(rng, t, dh, qk_std), gaussian_matrix(rng, t, dh, qk_std),
                        gaussian_matrix(rng, t, dh));
    const auto omega = draw_orthogonal_features(dh, cfg.r, rng());
    const FeatureSequence v(qkv.v());
    track(cases[3], favor_attention(qkv, omega).values(),
          apply_mixer(favor_mixer(qkv.q(), qkv.k(), omega), v).values());
    track(cases[4], softmax_attention(qkv).values(),
          apply_mixer(softmax_mixer(qkv.q(), qkv.k()), v).values());

    const FeatureSequence xs(gaussian_matrix(rng, t, std::min<Eigen::Index>(cfg.d_model, 16)));
    const BidirectionalWeights w = random_bidirectional_weights(rng, xs.width(), n);
    track(cases[5], hydra_channelwise(xs, w).values(), reference::hydra_channelwise(xs, w).values());
  }

  bool all_pass = true;
  CsvWriter csv(cfg.output_dir / "equiv.csv", {"case", "max_abs_err", "pass"});
  for (const auto& c : cases) {
    const bool pass = c.max_abs_err <= cfg.tol;
    all_pass = all_pass && pass;
    csv.row({c.name, fmt_double(c.max_abs_err), pass ? "true" : "false"});
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_diagnose(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.output_dir);
  const CounterRng root(cfg.seed);

  std::vector<Matrix> qs, ks;
  if (cfg.qk_dump) {
    const auto tensors = load_tensors(*cfg.qk_dump);
    for (int h = 0;; ++h) {
      const std::string qn = "q." + std::to_string(h);
      const bool present = std::any_of(tensors.begin(), tensors.end(),
                                       [&](const NamedTensor& nt) { return nt.name == qn; });
      if (!present) break;
      qs.push_back(find_tensor(tensors, qn));
      ks.push_back(find_tensor(tensors, "k." + std::to_string(h)));
    }
    if (qs.empty()) throw IoError(cfg.qk_dump->string() + ": no tensors named q.0/k.0");
  } else {
    const Eigen::Index dh = cfg.d_model / cfg.num_heads;
    const double qk_std = std::pow(static_cast<double>(dh), -0.25);
    for (Eigen::Index h = 0; h < cfg.num_heads; ++h) {
      CounterRng rng = root.fork(static_cast<std::uint64_t>(h));
      qs.push_back(gaussian_matrix(rng, cfg.T, dh, qk_std));
      ks.push_back(gaussian_matrix(rng, cfg.T, dh, qk_std));
    }
  }
  const Eigen::Index t = qs.front().rows();
  const Eigen::Index dh = qs.front().cols();

  std::vector<MatrixMixer> soft, favor;
  for (std::size_t h = 0; h < qs.size(); ++h) {
    soft.push_back(softmax_mixer(qs[h], ks[h]));
    const auto omega = draw_orthogonal_features(dh, cfg.r, root.fork(1000 + h)());
    favor.push_back(favor_mixer(qs[h], ks[h], omega));
  }
  const MatrixMixer soft_avg = head_average(soft);
  const MatrixMixer favor_avg = head_average(favor);

  CounterRng ssm_rng = root.fork(2000);
  const Matrix x = gaussian_matrix(ssm_rng, t, cfg.d_model);
  const BidirectionalWeights w = random_bidirectional_weights(ssm_rng, cfg.d_model, cfg.N);
  const HydraParams hp = hydra_channel_params(x, w, 0);

  {
    CsvWriter csv(cfg.output_dir / "rank_report.csv", {"mixer_kind", "T", "d_or_N", "r", "rank"});
    csv.row({"softmax", s(t), s(dh), "0", std::to_string(numerical_rank(soft.front()))});
    csv.row({"favor", s(t), s(dh), s(cfg.r), std::to_string(numerical_rank(favor.front()))});
    csv.row({"softmax_head_avg", s(t), s(dh), "0", std::to_string(numerical_rank(soft_avg))});
    csv.row({"favor_head_avg", s(t), s(dh), s(cfg.r), std::to_string(numerical_rank(favor_avg))});
    csv.row({"ssm", s(t), s(cfg.N), "0", std::to_string(numerical_rank(ssm_mixer(hp.fwd)))});
    csv.row({"hydra", s(t), s(cfg.N), "0", std::to_string(numerical_rank(hydra_mixer(hp)))});
  }

  auto write_hist = [&](const std::string& file, const MatrixMixer& m) {
    const Histogram hist = pairwise_l2_histogram(m, cfg.bins);
    CsvWriter csv(cfg.output_dir / file, {"bin_lo", "bin_hi", "count"});
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
      csv.row({fmt_double(hist.bin_edges[b]), fmt_double(hist.bin_edges[b + 1]),
               std::to_string(hist.counts[b])});
    }
  };
  write_hist("l2_hist.csv", favor_avg);
  write_hist("l2_hist_softmax.csv", soft_avg);

  std::vector<Eigen::Index> windows = {0};
  for (Eigen::Index wdw = 1; wdw < t - 1; wdw *= 2) windows.push_back(wdw);
  if (t > 1) windows.push_back(t - 1);
  auto write_locality = [&](const std::string& file, const MatrixMixer& m) {
    CsvWriter csv(cfg.output_dir / file, {"window", "mass"});
    for (Eigen::Index wdw : windows) csv.row({s(wdw), fmt_double(locality_mass(m, wdw))});
  };
  write_locality("locality.csv", favor_avg);
  write_locality("locality_softmax.csv", soft_avg);

  std::vector<std::uint64_t> seeds;
  CounterRng seed_rng = root.fork(3000);
  for (int i = 0; i < 32; ++i) seeds.push_back(seed_rng());
  const auto curve = approximation_error_curve(qs.front(), ks.front(), {16, 64, 256, 1024}, seeds);
  CsvWriter csv(cfg.output_dir / "approx_curve.csv", {"r", "median_rel_err"});
  for (const auto& p : curve) csv.row({s(p.features), fmt_double(p.median_relative_error)});
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.bench_T.size() < 3) throw ConfigError("bench needs at least 3 sequence lengths in bench_T");
  ensure_dir(cfg.output_dir);
  CsvWriter bench(cfg.output_dir / "bench.csv",
                  {"op_label", "T", "d", "r_or_N", "median_seconds", "repeats"});
  CsvWriter scaling(cfg.output_dir / "scaling.csv", {"op_label", "slope", "r_squared"});
  CsvWriter memory(cfg.output_dir / "memory.csv", {"op_label", "T", "est_peak_bytes"});
  for (const std::string& op : bench_operations()) {
    const Eigen::Index r_or_n = op == "softmax_attention" ? 0 : op == "favor_attention" ? cfg.r : cfg.N;
    auto samples = time_operation(op, cfg.bench_T, cfg.bench_d, r_or_n, std::max(3, cfg.repeats), cfg.seed);
    for (const auto& smp : samples) {
      bench.row({smp.op_label, s(smp.T), s(smp.d), s(smp.r_or_N), fmt_double(smp.wall_time),
                 std::to_string(smp.repeats)});
      memory.row({smp.op_label, s(smp.T), fmt_double(smp.est_peak_bytes)});
    }
    const ScalingReport rep = fit_loglog_slope(std::move(samples));
    scaling.row({rep.op_label, fmt_double(rep.fitted_slope), fmt_double(rep.r_squared)});
    std::cerr << op << ": slope " << rep.fitted_slope << " (R^2 " << rep.r_squared << ")\n";
  }
  return kExitOk;
}

int cmd_demo(const RunConfig& cfg) {
  cfg.validate();
  ensure_dir(cfg.output_dir);
  const BlockStackConfig stack = cfg.stack_config();
  std::vector<DcHydraBlock> blocks = init_stack(stack, cfg.seed);
  if (cfg.zero_weights) {
    for (auto& b : blocks) zero_output_projections(b);
  }
  CounterRng rng = CounterRng(cfg.seed).fork(0xD3110);
  const FeatureSequence x(gaussian_matrix(rng, cfg.T, stack.d_model));

  std::vector<FeatureSequence> per_block;
  const FeatureSequence y = stack_forward(x, stack, blocks, &per_block);

  CsvWriter csv(cfg.output_dir / "demo.csv", {"entry", "dilation", "value"});
  for (std::size_t i = 0; i < per_block.size(); ++i) {
    csv.row({"block" + std::to_string(i) + "_norm", s(blocks[i].conv.dilation),
             fmt_double(per_block[i].values().norm())});
  }
  csv.row({"output_checksum", "", checksum(y.values())});
  if (cfg.save_weights) save_tensors(cfg.output_dir / "weights", flatten_stack(blocks));
  return kExitOk;
}

}  // namespace mixlab
