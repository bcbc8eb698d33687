#pragma once

// DC-Hydra backbone: FFW -> mixer -> dilated depthwise conv -> FFW, each with a
// unit residual, then LayerNorm on the block output.

#include "mixlab/attention.hpp"
#include "mixlab/ssm.hpp"
#include "mixlab/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mixlab {

inline constexpr double kLayerNormEpsilon = 1e-5;

/// SiLU(x W1 + b1) W2 + b2 with W1: d x 4d, W2: 4d x d.
struct FfwWeights {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

struct DilatedConvWeights {
  Matrix kernel;  // d x k, one k-tap filter per channel
  Eigen::Index dilation = 1;
  Vector bias;  // d
};

enum class MixerKind { hydra, bimamba, favor, softmax };

std::string to_string(MixerKind kind);
/// Throws ConfigError on an unknown name.
MixerKind parse_mixer_kind(const std::string& name);

/// Channel-wise bidirectional SSM followed by a d x d output projection.
struct SsmMixerWeights {
  BidirectionalWeights scan;
  Matrix w_out;
};

struct AttentionMixerWeights {
  AttentionWeights attn;
  Eigen::Index num_heads = 1;
};

struct MixerWeights {
  MixerKind kind = MixerKind::hydra;
  std::variant<SsmMixerWeights, AttentionMixerWeights> weights;
};

struct DcHydraBlock {
  FfwWeights ffw_in;
  MixerWeights mixer;
  DilatedConvWeights conv;
  FfwWeights ffw_out;
  Vector norm_scale;
  Vector norm_shift;
};

struct BlockStackConfig {
  Eigen::Index d_model = 64;
  Eigen::Index num_blocks = 2;
  Eigen::Index dilation_period = 4;
  Eigen::Index kernel_size = 7;
  MixerKind mixer = MixerKind::hydra;
  Eigen::Index num_heads = 4;  // attention mixers
  Eigen::Index features = 16;  // FAVOR+ r
  Eigen::Index state_size = 16;  // SSM N

  void validate() const;
};

/// Named stack shapes: "latent-denoiser" (8 blocks, 256 channels) and
/// "token-generator" (12 blocks, 512 channels). Other fields keep `base`'s values.
BlockStackConfig apply_preset(BlockStackConfig base, const std::string& preset);

FeatureSequence ffw_apply(const FeatureSequence& x, const FfwWeights& w);

/// Depthwise 1-D convolution with taps spaced by `dilation`, zero padded to keep
/// length T. Tap j of an odd-length kernel reads offset (j - (k-1)/2) * dilation.
FeatureSequence dilated_dw_conv(const FeatureSequence& x, const DilatedConvWeights& w);

/// 2^(block_index / period).
Eigen::Index dilation_for_block(Eigen::Index block_index, Eigen::Index period);

FeatureSequence layer_norm_apply(const FeatureSequence& x, const Vector& scale, const Vector& shift);

/// The mixer stage alone (no residual).
FeatureSequence mixer_apply(const FeatureSequence& x, const MixerWeights& mixer);

FeatureSequence block_forward(const FeatureSequence& x, const DcHydraBlock& block);

/// Blocks applied in order. Block i must carry dilation_for_block(i, cfg.dilation_period)
/// and there must be cfg.num_blocks of them. The output of every block is appended
/// to `per_block` when it is non-null.
FeatureSequence stack_forward(const FeatureSequence& x, const BlockStackConfig& cfg,
                              const std::vector<DcHydraBlock>& blocks,
                              std::vector<FeatureSequence>* per_block = nullptr);

/// Random weights for a full stack; block i gets dilation_for_block(i, period).
std::vector<DcHydraBlock> init_stack(const BlockStackConfig& cfg, std::uint64_t seed);

/// Zeroes the last projection of every sub-module so each residual branch
/// contributes exactly zero.
void zero_output_projections(DcHydraBlock& block);

}  // namespace mixlab
