#include "mixlab/blocks.hpp"

#include "mixlab/random.hpp"

#include <algorithm>
#include <cmath>

namespace mixlab {

namespace {

constexpr Eigen::Index kRowChunk = 256;

double silu(double v) { return v / (1.0 + std::exp(-v)); }

void require_width(const FeatureSequence& x, Eigen::Index d, const char* what) {
  if (x.width() != d) {
    throw ShapeError(std::string(what) + ": input width " + std::to_string(x.width()) +
                     " != expected " + std::to_string(d));
  }
}

FfwWeights random_ffw(CounterRng& rng, Eigen::Index d) {
  const Eigen::Index hidden = 4 * d;
  return {gaussian_matrix(rng, d, hidden, 1.0 / std::sqrt(static_cast<double>(d))),
          Vector::Zero(hidden),
          gaussian_matrix(rng, hidden, d, 1.0 / std::sqrt(static_cast<double>(hidden))),
          Vector::Zero(d)};
}

}  // namespace

std::string to_string(MixerKind kind) {
  switch (kind) {
    case MixerKind::hydra: return "hydra";
    case MixerKind::bimamba: return "bimamba";
    case MixerKind::favor: return "favor";
    case MixerKind::softmax: return "softmax";
  }
  return "unknown";
}

MixerKind parse_mixer_kind(const std::string& name) {
  for (MixerKind k : {MixerKind::hydra, MixerKind::bimamba, MixerKind::favor, MixerKind::softmax}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown mixer kind '" + name + "' (expected hydra, bimamba, favor, softmax)");
}

void BlockStackConfig::validate() const {
  if (d_model < 1 || num_blocks < 1 || dilation_period < 1 || kernel_size < 1 || num_heads < 1 ||
      features < 1 || state_size < 1) {
    throw ConfigError("BlockStackConfig: all sizes must be positive");
  }
  if (mixer == MixerKind::favor || mixer == MixerKind::softmax) {
    MultiHeadConfig heads(num_heads, d_model);
    RopeConfig rope(heads.d_head());
  }
}

BlockStackConfig apply_preset(BlockStackConfig base, const std::string& preset) {
  // Codec context for these stacks (not modeled here): 9 codebooks of 1024
  // entries, 8-dimensional codewords, 86 frames per second.
  if (preset == "latent-denoiser") {
    base.d_model = 256;
    base.num_blocks = 8;
  } else if (preset == "token-generator") {
    base.d_model = 512;
    base.num_blocks = 12;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected latent-denoiser, token-generator)");
  }
  base.dilation_period = 4;
  return base;
}

FeatureSequence ffw_apply(const FeatureSequence& x, const FfwWeights& w) {
  const Eigen::Index d = x.width();
  const Eigen::Index hidden = w.w1.cols();
  if (w.w1.rows() != d || w.b1.size() != hidden || w.w2.rows() != hidden || w.w2.cols() != d ||
      w.b2.size() != d) {
    throw ShapeError("ffw_apply: weights do not match width " + std::to_string(d));
  }
  const Matrix& xv = x.values();
  const Eigen::Index t = x.length();
  Matrix y(t, d);
  const Eigen::Index chunks = (t + kRowChunk - 1) / kRowChunk;
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index r0 = c * kRowChunk;
    const Eigen::Index rows = std::min(kRowChunk, t - r0);
    Matrix h = xv.middleRows(r0, rows) * w.w1;
    h.rowwise() += w.b1.transpose();
    h = h.unaryExpr([](double v) { return silu(v); });
    auto out = y.middleRows(r0, rows);
    out.noalias() = h * w.w2;
    out.rowwise() += w.b2.transpose();
  }
  return FeatureSequence(std::move(y));
}

FeatureSequence dilated_dw_conv(const FeatureSequence& x, const DilatedConvWeights& w) {
  const Eigen::Index d = x.width();
  const Eigen::Index k = w.kernel.cols();
  if (w.kernel.rows() != d || w.bias.size() != d) throw ShapeError("dilated_dw_conv: weights do not match width");
  if (k < 1 || w.dilation < 1) throw ConfigError("dilated_dw_conv: need k >= 1 and dilation >= 1");
  const Eigen::Index t = x.length();
  const Eigen::Index left = ((k - 1) * w.dilation) / 2;
  const Matrix& xv = x.values();
  Matrix y(t, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < t; ++s) {
    for (Eigen::Index ch = 0; ch < d; ++ch) y(s, ch) = w.bias(ch);
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index src = s + j * w.dilation - left;
      if (src < 0 || src >= t) continue;
      for (Eigen::Index ch = 0; ch < d; ++ch) y(s, ch) += w.kernel(ch, j) * xv(src, ch);
    }
  }
  return FeatureSequence(std::move(y));
}

Eigen::Index dilation_for_block(Eigen::Index block_index, Eigen::Index period) {
  if (block_index < 0 || period < 1) throw ConfigError("dilation_for_block: need index >= 0, period >= 1");
  const Eigen::Index doublings = block_index / period;
  if (doublings >= 62) throw ConfigError("dilation_for_block: dilation overflows");
  return Eigen::Index{1} << doublings;
}

FeatureSequence layer_norm_apply(const FeatureSequence& x, const Vector& scale, const Vector& shift) {
  const Eigen::Index d = x.width();
  if (scale.size() != d || shift.size() != d) throw ShapeError("layer_norm_apply: scale/shift width");
  const Matrix& xv = x.values();
  Matrix y(x.length(), d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < x.length(); ++s) {
    const double mean = xv.row(s).mean();
    const double var = (xv.row(s).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    y.row(s) = ((xv.row(s).array() - mean) * inv * scale.transpose().array() +
                shift.transpose().array()).matrix();
  }
  return FeatureSequence(std::move(y));
}

FeatureSequence mixer_apply(const FeatureSequence& x, const MixerWeights& mixer) {
  switch (mixer.kind) {
    case MixerKind::hydra:
    case MixerKind::bimamba: {
      const auto* w = std::get_if<SsmMixerWeights>(&mixer.weights);
      if (w == nullptr) throw ConfigError("mixer_apply: SSM mixer kind needs SSM weights");
      if (w->w_out.rows() != x.width() || w->w_out.cols() != x.width()) {
        throw ShapeError("mixer_apply: w_out must be d x d");
      }
      const FeatureSequence scanned = mixer.kind == MixerKind::hydra
                                          ? hydra_channelwise(x, w->scan)
                                          : bimamba_channelwise(x, w->scan);
      return FeatureSequence(scanned.values() * w->w_out);
    }
    case MixerKind::favor:
    case MixerKind::softmax: {
      const auto* w = std::get_if<AttentionMixerWeights>(&mixer.weights);
      if (w == nullptr) throw ConfigError("mixer_apply: attention mixer kind needs attention weights");
      const MultiHeadConfig cfg(w->num_heads, x.width());
      return multi_head_attention(
          x, w->attn, cfg, mixer.kind == MixerKind::favor ? AttentionKind::favor : AttentionKind::softmax);
    }
  }
  throw ConfigError("mixer_apply: unknown mixer kind");
}

FeatureSequence block_forward(const FeatureSequence& x, const DcHydraBlock& block) {
  const FeatureSequence y1(x.values() + ffw_apply(x, block.ffw_in).values());
  const FeatureSequence y2(y1.values() + mixer_apply(y1, block.mixer).values());
  const FeatureSequence conv = dilated_dw_conv(y2, block.conv);
  const FeatureSequence y3(y2.values() + conv.values().unaryExpr([](double v) { return silu(v); }));
  const FeatureSequence y4(y3.values() + ffw_apply(y3, block.ffw_out).values());
  return layer_norm_apply(y4, block.norm_scale, block.norm_shift);
}

FeatureSequence stack_forward(const FeatureSequence& x, const BlockStackConfig& cfg,
                              const std::vector<DcHydraBlock>& blocks,
                              std::vector<FeatureSequence>* per_block) {
  cfg.validate();
  require_width(x, cfg.d_model, "stack_forward");
  if (static_cast<Eigen::Index>(blocks.size()) != cfg.num_blocks) {
    throw ConfigError("stack_forward: expected " + std::to_string(cfg.num_blocks) + " blocks, got " +
                      std::to_string(blocks.size()));
  }
  FeatureSequence h = x;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Eigen::Index expected = dilation_for_block(static_cast<Eigen::Index>(i), cfg.dilation_period);
    if (blocks[i].conv.dilation != expected) {
      throw ConfigError("stack_forward: block " + std::to_string(i) + " has dilation " +
                        std::to_string(blocks[i].conv.dilation) + ", schedule says " +
                        std::to_string(expected));
    }
    h = block_forward(h, blocks[i]);
    if (per_block != nullptr) per_block->push_back(h);
  }
  return h;
}

std::vector<DcHydraBlock> init_stack(const BlockStackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Eigen::Index d = cfg.d_model;
  std::vector<DcHydraBlock> blocks;
  blocks.reserve(static_cast<std::size_t>(cfg.num_blocks));
  const CounterRng root(seed);
  for (Eigen::Index i = 0; i < cfg.num_blocks; ++i) {
    CounterRng rng = root.fork(static_cast<std::uint64_t>(i));
    DcHydraBlock b;
    b.ffw_in = random_ffw(rng, d);

    b.mixer.kind = cfg.mixer;
    if (cfg.mixer == MixerKind::hydra || cfg.mixer == MixerKind::bimamba) {
      SsmMixerWeights w;
      w.scan = random_bidirectional_weights(rng, d, cfg.state_size);
      w.w_out = gaussian_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d)));
      b.mixer.weights = std::move(w);
    } else {
      const MultiHeadConfig heads(cfg.num_heads, d);
      const double proj = 1.0 / std::sqrt(static_cast<double>(d));
      const double qk = proj * std::pow(static_cast<double>(heads.d_head()), -0.25);
      AttentionMixerWeights w;
      w.num_heads = cfg.num_heads;
      w.attn.wq = gaussian_matrix(rng, d, d, qk);
      w.attn.wk = gaussian_matrix(rng, d, d, qk);
      w.attn.wv = gaussian_matrix(rng, d, d, proj);
      w.attn.wo = gaussian_matrix(rng, d, d, proj);
      w.attn.rope.emplace(heads.d_head());
      if (cfg.mixer == MixerKind::favor) {
        for (Eigen::Index h = 0; h < cfg.num_heads; ++h) {
          w.attn.head_features.push_back(
              draw_orthogonal_features(heads.d_head(), cfg.features, rng()));
        }
      }
      b.mixer.weights = std::move(w);
    }

    b.conv.kernel = gaussian_matrix(rng, d, cfg.kernel_size,
                                    1.0 / std::sqrt(static_cast<double>(cfg.kernel_size)));
    b.conv.dilation = dilation_for_block(i, cfg.dilation_period);
    b.conv.bias = Vector::Zero(d);
    b.ffw_out = random_ffw(rng, d);
    b.norm_scale = Vector::Ones(d);
    b.norm_shift = Vector::Zero(d);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

void zero_output_projections(DcHydraBlock& block) {
  for (FfwWeights* f : {&block.ffw_in, &block.ffw_out}) {
    f->w2.setZero();
    f->b2.setZero();
  }
  if (auto* s = std::get_if<SsmMixerWeights>(&block.mixer.weights)) s->w_out.setZero();
  if (auto* a = std::get_if<AttentionMixerWeights>(&block.mixer.weights)) a->attn.wo.setZero();
  block.conv.kernel.setZero();
  block.conv.bias.setZero();
}

}  // namespace mixlab
