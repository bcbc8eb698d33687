#pragma once

// Selective state-space scans and their matrix-mixer forms.
//
// Transitions are scalar times identity (A_t = a_t I). Indices are 0-based: time
// step t here is step t + 1 in the usual 1-based notation. The initial state is zero.
//
// Backward parameters are stored in scan order, i.e. entry s of a backward
// ScanParams belongs to original position T - 1 - s. A backward pass is
// reverse(ssm_scan(bwd, reverse(x))). The mixer builders translate to original
// positions internally.

#include "mixlab/mixer.hpp"
#include "mixlab/random.hpp"
#include "mixlab/types.hpp"

namespace mixlab {

/// Per-step parameters of a scalar-transition selective SSM with state size N.
///
/// Invariants: a_t in [0, 1], delta_t > 0, b and c are T x N, all finite.
struct ScanParams {
  Vector a;      // T
  Matrix b;      // T x N
  Matrix c;      // T x N
  Vector delta;  // T

  Eigen::Index length() const noexcept { return a.size(); }
  Eigen::Index state_size() const noexcept { return b.cols(); }

  /// Throws ConfigError/ShapeError when an invariant fails.
  void validate() const;
  /// Same parameters listed back to front.
  ScanParams reversed() const;
};

/// Produces ScanParams from a T x d input:
///   delta_t = softplus(w_delta . x_t + bias)
///   a_t     = exp(-delta_t * exp(a_log))
///   b_t     = delta_t * (w_b x_t)
///   c_t     = w_c x_t
struct SelectiveWeights {
  Vector w_delta;  // d
  double bias = 0.0;
  Matrix w_b;  // N x d
  Matrix w_c;  // N x d
  double a_log = 0.0;

  Eigen::Index width() const noexcept { return w_delta.size(); }
  Eigen::Index state_size() const noexcept { return w_b.rows(); }
};

struct BiMambaParams {
  ScanParams fwd;
  ScanParams bwd;  // scan order

  void validate() const;
};

struct HydraParams {
  ScanParams fwd;
  ScanParams bwd;  // scan order
  Vector diag_delta;

  void validate() const;
};

/// Weights of the channel-wise bidirectional mixers. Both directions derive
/// their parameters from the whole T x d input; the backward set sees it reversed.
struct BidirectionalWeights {
  SelectiveWeights fwd;
  SelectiveWeights bwd;
  Vector diag_gain;  // d, Hydra only: delta_t = diag_gain[channel] for every t
};

/// Random selective weights: projections ~ N(0, 1/d), initial step sizes near
/// 0.05, continuous decay rate exp(a_log) uniform on [1, 16].
SelectiveWeights random_selective_weights(CounterRng& rng, Eigen::Index d, Eigen::Index n);
/// Both directions plus a N(0, 1) diagonal gain per channel.
BidirectionalWeights random_bidirectional_weights(CounterRng& rng, Eigen::Index d, Eigen::Index n);

/// Random hand-set parameters for equivalence checks: a_t uniform on (0, 1],
/// b and c Gaussian with a per-instance magnitude spread over two decades,
/// delta_t uniform on [0.01, 1).
ScanParams random_scan_params(CounterRng& rng, Eigen::Index t, Eigen::Index n);

ScanParams selective_parameterize(const Matrix& x, const SelectiveWeights& weights);

/// h_t = a_t h_{t-1} + b_t x_t,  y_t = c_t . h_t,  h_{-1} = 0.
Vector ssm_scan(const ScanParams& params, const Vector& x);

/// Product of the scalar transitions between positions j and i:
///   i > j: a[j+1] * ... * a[i]
///   i = j: 1
///   i < j: a[i] * ... * a[j-1]
double segment_product(const Vector& a, Eigen::Index i, Eigen::Index j);

/// Lower-triangular m_ij = (c_i . b_j) * segment_product(a, i, j), tagged semiseparable(N).
MatrixMixer ssm_mixer(const ScanParams& params);

/// Forward scan plus reversed backward scan.
Vector bimamba_apply(const BiMambaParams& p, const Vector& x);
MatrixMixer bimamba_mixer(const BiMambaParams& p);

/// Quasiseparable mixer whose diagonal is diag_delta and whose off-diagonal
/// triangles are the forward and backward scans shifted by one step.
Vector hydra_apply(const HydraParams& p, const Vector& x);
MatrixMixer hydra_mixer(const HydraParams& p);

/// One parameter set from the whole input, then every channel scanned on its own.
/// Channels run in parallel; the result does not depend on the thread count.
FeatureSequence ssm_channelwise(const FeatureSequence& x, const SelectiveWeights& weights);
FeatureSequence bimamba_channelwise(const FeatureSequence& x, const BidirectionalWeights& weights);
FeatureSequence hydra_channelwise(const FeatureSequence& x, const BidirectionalWeights& weights);

/// Parameters hydra_channelwise uses for one channel. Exposed for tests and tools.
HydraParams hydra_channel_params(const Matrix& x, const BidirectionalWeights& weights,
                                 Eigen::Index channel);

}  // namespace mixlab
