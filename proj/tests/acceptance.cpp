// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Pass criterion numbers as arguments to run a subset.

#include "mixlab/attention.hpp"
#include "mixlab/bench.hpp"
#include "mixlab/blocks.hpp"
#include "mixlab/commands.hpp"
#include "mixlab/diagnostics.hpp"
#include "mixlab/mixer.hpp"
#include "mixlab/ssm.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace mixlab;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Eigen::Index uniform_index(CounterRng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  const CounterRng root(101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    CounterRng rng = root.fork(static_cast<std::uint64_t>(i));
    const Eigen::Index t = uniform_index(rng, 1, 32);
    const Eigen::Index n = uniform_index(rng, 1, 8);
    const Vector x = gaussian_vector(rng, t);
    const ScanParams fwd = random_scan_params(rng, t, n);
    const ScanParams bwd = random_scan_params(rng, t, n);
    const HydraParams hy{fwd, bwd, gaussian_vector(rng, t)};
    const BiMambaParams bi{fwd, bwd};
    worst = std::max(worst, (ssm_scan(fwd, x) - ssm_mixer(fwd).matrix() * x).cwiseAbs().maxCoeff());
    worst = std::max(worst, (bimamba_apply(bi, x) - bimamba_mixer(bi).matrix() * x).cwiseAbs().maxCoeff());
    worst = std::max(worst, (hydra_apply(hy, x) - hydra_mixer(hy).matrix() * x).cwiseAbs().maxCoeff());
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-9 && elapsed < 10.0,
          "max_abs_err=" + fmt("%.3e", worst) + " time=" + fmt("%.2fs", elapsed)};
}

Outcome criterion2() {
  const CounterRng root(202);
  int ok = 0;
  for (int i = 0; i < 50; ++i) {
    CounterRng rng = root.fork(static_cast<std::uint64_t>(i));
    const Eigen::Index t = uniform_index(rng, 12, 32);
    const Eigen::Index n = uniform_index(rng, 1, 8);
    const int ni = static_cast<int>(n);
    const ScanParams fwd = random_scan_params(rng, t, n);
    const ScanParams bwd = random_scan_params(rng, t, n);
    const HydraParams hy{fwd, bwd, gaussian_vector(rng, t)};
    const BiMambaParams bi{fwd, bwd};
    const bool ssm_ok = check_structure(ssm_mixer(fwd), MixerClass::semiseparable(ni)).holds();
    const auto hm = hydra_mixer(hy);
    const bool hydra_ok = check_structure(hm, MixerClass::quasiseparable(ni)).holds();
    const bool bi_ok = check_structure(bimamba_mixer(bi), MixerClass::quasiseparable(ni)).holds();
    const bool hydra_not_semi = !check_structure(hm, MixerClass::semiseparable(ni)).holds();
    ok += (ssm_ok && hydra_ok && bi_ok && hydra_not_semi) ? 1 : 0;
  }
  return {ok == 50, std::to_string(ok) + "/50 trials"};
}

Outcome criterion3() {
  const CounterRng root(303);
  int ok = 0;
  for (int i = 0; i < 50; ++i) {
    CounterRng rng = root.fork(static_cast<std::uint64_t>(i));
    const Eigen::Index t = uniform_index(rng, 4, 24);
    const Eigen::Index n = uniform_index(rng, 1, 8);
    const HydraParams base{random_scan_params(rng, t, n), random_scan_params(rng, t, n), gaussian_vector(rng, t)};
    const Vector diag = hydra_mixer(base).matrix().diagonal();
    bool trial_ok = true;
    for (int which = 0; which < 6; ++which) {
      HydraParams p = base;
      ScanParams& side = which < 3 ? p.fwd : p.bwd;
      switch (which % 3) {
        case 0: side.b = gaussian_matrix(rng, t, n); break;
        case 1: side.c = gaussian_matrix(rng, t, n); break;
        default: side.a = uniform_vector(rng, t, 0.05, 1.0); break;
      }
      trial_ok = trial_ok && hydra_mixer(p).matrix().diagonal() == diag;
    }
    BiMambaParams bi{base.fwd, base.bwd};
    const Vector bi_diag = bimamba_mixer(bi).matrix().diagonal();
    bi.fwd.b = gaussian_matrix(rng, t, n);
    trial_ok = trial_ok && bimamba_mixer(bi).matrix().diagonal() != bi_diag;
    ok += trial_ok ? 1 : 0;
  }
  return {ok == 50, std::to_string(ok) + "/50 trials"};
}

Outcome criterion4() {
  const CounterRng root(404);
  const Eigen::Index t = 64, d = 64;
  const double qk_std = std::pow(static_cast<double>(d), -0.25);
  int favor_ok = 0, softmax_full = 0;
  int worst_favor = 0;
  for (int i = 0; i < 100; ++i) {
    CounterRng rng = root.fork(static_cast<std::uint64_t>(i));
    const Matrix q = gaussian_matrix(rng, t, d, qk_std);
    const Matrix k = gaussian_matrix(rng, t, d, qk_std);
    const Eigen::Index r = i % 2 == 0 ? 4 : 16;
    const int fr = numerical_rank(favor_mixer(q, k, draw_orthogonal_features(d, r, rng())));
    worst_favor = std::max(worst_favor, fr - static_cast<int>(r));
    favor_ok += fr <= r ? 1 : 0;
    softmax_full += numerical_rank(softmax_mixer(q, k)) == t ? 1 : 0;
  }
  return {favor_ok == 100 && softmax_full >= 99,
          "favor<=r " + std::to_string(favor_ok) + "/100, softmax full rank " + std::to_string(softmax_full) +
              "/100"};
}

Outcome criterion5() {
  const auto t0 = Clock::now();
  CounterRng rng(505);
  const Eigen::Index d = 8;
  // Entries have variance 1/sqrt(d).
  const double qk_std = std::pow(static_cast<double>(d), -0.25);
  const Matrix q = gaussian_matrix(rng, 16, d, qk_std);
  const Matrix k = gaussian_matrix(rng, 16, d, qk_std);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < 32; ++i) seeds.push_back(rng());
  const auto curve = approximation_error_curve(q, k, {16, 64, 256, 1024}, seeds);
  bool decreasing = true;
  std::string detail = "errors";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    detail += " r" + std::to_string(curve[i].features) + "=" + fmt("%.4f", curve[i].median_relative_error);
    if (i > 0) decreasing = decreasing && curve[i].median_relative_error < curve[i - 1].median_relative_error;
  }
  const double ratio = curve.back().median_relative_error / curve.front().median_relative_error;
  const double elapsed = seconds_since(t0);
  detail += " ratio=" + fmt("%.3f", ratio) + " time=" + fmt("%.2fs", elapsed);
  return {decreasing && ratio < 0.5 && elapsed < 30.0, detail};
}

Outcome criterion6() {
  const CounterRng root(606);
  int ok = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    CounterRng rng = root.fork(static_cast<std::uint64_t>(i));
    const Eigen::Index t = uniform_index(rng, 1, 64);
    const Eigen::Index d = 2 * uniform_index(rng, 1, 16);
    const double sd = std::pow(static_cast<double>(d), -0.25);
    const Matrix q = gaussian_matrix(rng, t, d, sd);
    const Matrix k = gaussian_matrix(rng, t, d, sd);
    const Eigen::Index r = uniform_index(rng, 1, 64);
    bool trial_ok = true;
    for (const MatrixMixer& m : {softmax_mixer(q, k), favor_mixer(q, k, draw_orthogonal_features(d, r, rng()))}) {
      const double dev = (m.matrix().rowwise().sum().array() - 1.0).abs().maxCoeff();
      worst = std::max(worst, dev);
      trial_ok = trial_ok && dev <= 1e-10 && m.matrix().minCoeff() >= 0.0;
    }
    ok += trial_ok ? 1 : 0;
  }
  return {ok == 100, std::to_string(ok) + "/100 trials, max |rowsum-1|=" + fmt("%.2e", worst)};
}

Outcome criterion7() {
  const auto t0 = Clock::now();
  const std::vector<Eigen::Index> lengths = {4096, 8192, 16384, 32768, 65536};
  struct Case {
    std::string op;
    Eigen::Index r_or_n;
    bool superlinear;
  };
  const std::vector<Case> cases = {{"softmax_attention", 0, true},
                                   {"favor_attention", 256, false},
                                   {"ssm_scan", 16, false},
                                   {"hydra_scan", 16, false}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const ScalingReport rep = fit_loglog_slope(time_operation(c.op, lengths, 64, c.r_or_n, 3, 707));
    const bool slope_ok = c.superlinear ? rep.fitted_slope >= 1.7 : rep.fitted_slope <= 1.3;
    pass = pass && slope_ok && rep.r_squared >= 0.95;
    detail += c.op + " slope=" + fmt("%.3f", rep.fitted_slope) + " R2=" + fmt("%.4f", rep.r_squared) + "; ";
  }
  const double elapsed = seconds_since(t0);
  detail += "time=" + fmt("%.1fs", elapsed);
  return {pass && elapsed < 600.0, detail};
}

Outcome criterion8() {
  const std::vector<Eigen::Index> want8 = {1, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<Eigen::Index> want12 = {1, 1, 1, 1, 2, 2, 2, 2, 4, 4, 4, 4};
  auto dilations = [](const std::string& preset, Eigen::Index& d_model) {
    BlockStackConfig cfg = apply_preset({}, preset);
    d_model = cfg.d_model;
    std::vector<Eigen::Index> out;
    for (const auto& b : init_stack(cfg, 808)) out.push_back(b.conv.dilation);
    return out;
  };
  Eigen::Index d8 = 0, d12 = 0;
  const bool ok8 = dilations("latent-denoiser", d8) == want8 && d8 == 256;
  const bool ok12 = dilations("token-generator", d12) == want12 && d12 == 512;
  return {ok8 && ok12, std::string("latent-denoiser ") + (ok8 ? "match" : "mismatch") + ", token-generator " +
                           (ok12 ? "match" : "mismatch")};
}

Outcome criterion9() {
  CounterRng rng(909);
  int ok = 0, total = 0;
  for (MixerKind kind : {MixerKind::hydra, MixerKind::bimamba, MixerKind::favor, MixerKind::softmax}) {
    BlockStackConfig cfg;
    cfg.d_model = 32;
    cfg.mixer = kind;
    for (Eigen::Index t : {1, 7, 64}) {
      auto blocks = init_stack(cfg, 99);
      const FeatureSequence x(gaussian_matrix(rng, t, cfg.d_model));
      const FeatureSequence y = block_forward(x, blocks[0]);
      const bool shape_ok = y.length() == t && y.width() == cfg.d_model;
      zero_output_projections(blocks[0]);
      const bool ln_ok = block_forward(x, blocks[0]).values() ==
                         layer_norm_apply(x, blocks[0].norm_scale, blocks[0].norm_shift).values();
      ok += shape_ok && ln_ok ? 1 : 0;
      ++total;
    }
  }
  return {ok == total, std::to_string(ok) + "/" + std::to_string(total) + " (kind, T) cases"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[entry.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome criterion10() {
  const fs::path base = fs::temp_directory_path() / "mixlab_acceptance_determinism";
  std::string detail;
  bool pass = true;
  const std::vector<std::pair<std::string, std::function<int(const RunConfig&)>>> commands = {
      {"equiv", cmd_equiv}, {"diagnose", cmd_diagnose}, {"demo", cmd_demo}};
  for (const auto& [name, fn] : commands) {
    std::map<std::string, std::string> runs[2];
    for (int run = 0; run < 2; ++run) {
      RunConfig cfg;
      cfg.seed = 1234;
      cfg.T = 48;
      cfg.d_model = 32;
      cfg.num_heads = 2;
      cfg.output_dir = base / (name + std::to_string(run));
      fs::remove_all(cfg.output_dir);
      fn(cfg);
      runs[run] = snapshot(cfg.output_dir);
    }
    const bool same = !runs[0].empty() && runs[0] == runs[1];
    pass = pass && same;
    detail += name + (same ? " identical (" : " DIFFERENT (") + std::to_string(runs[0].size()) + " files); ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8,
                                                          criterion9, criterion10};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "usage: %s [criterion numbers 1-%zu]\n", argv[0], criteria.size());
      return 2;
    }
    selected.insert(n);
  }
  bool all = true;
  for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) {
    if (!selected.empty() && selected.count(n) == 0) continue;
    Outcome o{false, ""};
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
