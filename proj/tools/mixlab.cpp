// mixlab: equivalence checks, attention diagnostics, scaling benchmarks and
// block-stack demos from one seeded configuration.
//
//   mixlab [--config FILE] [--key value ...] {equiv|diagnose|bench|demo}
//
// Config files hold `key = value` lines with `#` comments. Keys match the long
// flag names; flags given on the command line win over the file.

#include "mixlab/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int run(int argc, char** argv) {
  mixlab::RunConfig cfg;
  std::string mixer = mixlab::to_string(cfg.mixer_kind);
  std::string preset;
  std::string qk_dump;
  std::string bench_t = "256,512,1024,2048";
  std::string out = cfg.output_dir.string();

  CLI::App app{"Sequence-mixer laboratory"};
  app.set_config("--config", "", "Read `key = value` settings from FILE");
  app.allow_config_extras(false);
  app.require_subcommand(1);

  app.add_option("--seed", cfg.seed, "Root RNG seed")->capture_default_str();
  app.add_option("--out,--output_dir", out, "Output directory")
      ->envname(mixlab::kOutputDirEnv)
      ->capture_default_str();
  app.add_option("--T", cfg.T, "Sequence length")->capture_default_str();
  app.add_option("--d_model", cfg.d_model, "Model width")->capture_default_str();
  app.add_option("--num_heads", cfg.num_heads, "Attention heads")->capture_default_str();
  app.add_option("--r", cfg.r, "FAVOR+ random features")->capture_default_str();
  app.add_option("--N", cfg.N, "SSM state size")->capture_default_str();
  app.add_option("--kernel_size", cfg.kernel_size, "Depthwise conv kernel size")->capture_default_str();
  app.add_option("--dilation_period", cfg.dilation_period, "Blocks per dilation doubling")
      ->capture_default_str();
  app.add_option("--num_blocks", cfg.num_blocks, "Blocks in the stack")->capture_default_str();
  app.add_option("--mixer_kind", mixer, "hydra | bimamba | favor | softmax")->capture_default_str();
  app.add_option("--preset", preset, "latent-denoiser | token-generator");
  app.add_option("--tol", cfg.tol, "equiv: max abs error allowed")->capture_default_str();
  app.add_option("--trials", cfg.trials, "equiv: random instances per case")->capture_default_str();
  app.add_option("--bins", cfg.bins, "diagnose: histogram bins")->capture_default_str();
  app.add_option("--qk_dump", qk_dump, "diagnose: tensor container stem with q.H / k.H");
  app.add_option("--bench_T", bench_t, "bench: comma-separated sequence lengths")->capture_default_str();
  app.add_option("--bench_d", cfg.bench_d, "bench: feature width")->capture_default_str();
  app.add_option("--repeats", cfg.repeats, "bench: timed repeats per point")->capture_default_str();
  app.add_option("--zero_weights", cfg.zero_weights, "demo: zero every residual branch")
      ->capture_default_str();
  app.add_option("--save_weights", cfg.save_weights, "demo: write weights.manifest/.bin")
      ->capture_default_str();

  auto* equiv = app.add_subcommand("equiv", "Scan vs materialized mixer equivalence; writes equiv.csv");
  auto* diagnose = app.add_subcommand("diagnose", "Rank, L2 and locality reports for attention maps");
  auto* bench = app.add_subcommand("bench", "Runtime scaling sweep; writes bench.csv and scaling.csv");
  auto* demo = app.add_subcommand("demo", "Forward a random block stack; writes demo.csv");
  for (auto* sub : {equiv, diagnose, bench, demo}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::FileError& e) {
    std::cerr << "mixlab: " << e.what() << '\n';
    return mixlab::kExitIo;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mixlab::kExitOk : mixlab::kExitUsage;
  }

  try {
    cfg.mixer_kind = mixlab::parse_mixer_kind(mixer);
    cfg.output_dir = out;
    cfg.bench_T = mixlab::parse_index_list(bench_t);
    if (!preset.empty()) cfg.preset = preset;
    if (!qk_dump.empty()) cfg.qk_dump = qk_dump;

    if (equiv->parsed()) return mixlab::cmd_equiv(cfg);
    if (diagnose->parsed()) return mixlab::cmd_diagnose(cfg);
    if (bench->parsed()) return mixlab::cmd_bench(cfg);
    return mixlab::cmd_demo(cfg);
  } catch (const mixlab::ConfigError& e) {
    std::cerr << "mixlab: config error: " << e.what() << '\n';
    return mixlab::kExitUsage;
  } catch (const mixlab::ShapeError& e) {
    std::cerr << "mixlab: config error: " << e.what() << '\n';
    return mixlab::kExitUsage;
  } catch (const mixlab::IoError& e) {
    std::cerr << "mixlab: I/O error: " << e.what() << '\n';
    return mixlab::kExitIo;
  } catch (const mixlab::NumericError& e) {
    std::cerr << "mixlab: numeric failure: " << e.what() << '\n';
    return mixlab::kExitCheckFailed;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
