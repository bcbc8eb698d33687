#pragma once

// Serial scalar-loop versions of the parallel kernels. They follow the defining
// formulas term by term with no tiling, BLAS, or threading, and exist so tests
// and the kernel benchmark have something independent to compare against.

#include "mixlab/attention.hpp"
#include "mixlab/blocks.hpp"
#include "mixlab/ssm.hpp"

namespace mixlab::reference {

FeatureSequence softmax_attention(const QkvTriple& qkv);
FeatureSequence favor_attention(const QkvTriple& qkv, const OrthogonalFeatureMatrix& omega);
FeatureSequence ffw_apply(const FeatureSequence& x, const FfwWeights& w);
FeatureSequence dilated_dw_conv(const FeatureSequence& x, const DilatedConvWeights& w);
FeatureSequence layer_norm_apply(const FeatureSequence& x, const Vector& scale, const Vector& shift);
FeatureSequence ssm_channelwise(const FeatureSequence& x, const SelectiveWeights& weights);
FeatureSequence hydra_channelwise(const FeatureSequence& x, const BidirectionalWeights& weights);

}  // namespace mixlab::reference
