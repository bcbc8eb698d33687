#pragma once

// Softmax attention, FAVOR+ linear attention with positive orthogonal random
// features, and rotary position embeddings.
//
// Logits are Q K^T with no 1/sqrt(d) factor; fold any temperature into the
// projection weights.

#include "mixlab/mixer.hpp"
#include "mixlab/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mixlab {

/// Queries, keys and values, each T x d_head (values may have their own width).
class QkvTriple {
 public:
  QkvTriple(Matrix q, Matrix k, Matrix v);

  const Matrix& q() const noexcept { return q_; }
  const Matrix& k() const noexcept { return k_; }
  const Matrix& v() const noexcept { return v_; }
  Eigen::Index length() const noexcept { return q_.rows(); }

 private:
  Matrix q_, k_, v_;
};

/// Random projection Omega (r x d_head) for the positive feature map.
///
/// Rows come in blocks of d_head that are mutually orthogonal; each row norm is
/// an independent chi(d_head) draw, so every row is marginally N(0, I).
struct OrthogonalFeatureMatrix {
  Matrix omega;
  std::uint64_t seed = 0;

  Eigen::Index features() const noexcept { return omega.rows(); }
  Eigen::Index head_dim() const noexcept { return omega.cols(); }
};

class RopeConfig {
 public:
  explicit RopeConfig(Eigen::Index d_head, double base = 10000.0);

  Eigen::Index d_head() const noexcept { return d_head_; }
  double base() const noexcept { return base_; }

 private:
  Eigen::Index d_head_;
  double base_;
};

class MultiHeadConfig {
 public:
  MultiHeadConfig(Eigen::Index num_heads, Eigen::Index d_model);

  Eigen::Index num_heads() const noexcept { return num_heads_; }
  Eigen::Index d_model() const noexcept { return d_model_; }
  Eigen::Index d_head() const noexcept { return d_model_ / num_heads_; }

 private:
  Eigen::Index num_heads_;
  Eigen::Index d_model_;
};

enum class AttentionKind { softmax, favor };

/// Projection weights for multi-head attention. Each projection is d_model x d_model
/// and applied on the right (rows of X are frames). Head h owns columns
/// [h * d_head, (h + 1) * d_head) of the projected Q, K, V.
struct AttentionWeights {
  Matrix wq, wk, wv, wo;
  std::vector<OrthogonalFeatureMatrix> head_features;  // one per head, FAVOR+ only
  std::optional<RopeConfig> rope;
};

/// Positive features with the stabilizing shift kept separate:
/// phi(x) = values * exp(log_scale).
struct PositiveFeatures {
  Matrix values;  // T x r, strictly positive
  double log_scale = 0.0;
};

/// Row-softmax(Q K^T) V, evaluated in query tiles without forming the T x T matrix.
FeatureSequence softmax_attention(const QkvTriple& qkv);

/// Softmax(Q K^T) as an explicit dense mixer.
MatrixMixer softmax_mixer(const Matrix& q, const Matrix& k);

OrthogonalFeatureMatrix draw_orthogonal_features(Eigen::Index d_head, Eigen::Index r,
                                                 std::uint64_t seed);

/// phi(x) = r^{-1/2} exp(Omega x - |x|^2 / 2), row by row.
///
/// The maximum exponent over the whole call is subtracted before exp and returned
/// in log_scale. Throws NumericError if any feature is non-finite or underflows to 0.
PositiveFeatures positive_feature_map(const Matrix& x, const OrthogonalFeatureMatrix& omega);

/// D^{-1} phi(Q) (phi(K)^T V) in O(T r d).
FeatureSequence favor_attention(const QkvTriple& qkv, const OrthogonalFeatureMatrix& omega);

/// D^{-1} phi(Q) phi(K)^T, tagged low_rank(r).
MatrixMixer favor_mixer(const Matrix& q, const Matrix& k, const OrthogonalFeatureMatrix& omega);

/// Rotates pair (2i, 2i+1) of row t by angle t * base^{-2i / d_head}.
Matrix apply_rope(const Matrix& x, const RopeConfig& cfg);

/// Project, rotate Q and K (when weights.rope is set), attend per head,
/// concatenate, project out.
FeatureSequence multi_head_attention(const FeatureSequence& x, const AttentionWeights& weights,
                                     const MultiHeadConfig& cfg, AttentionKind kind);

}  // namespace mixlab
