#include "mixlab/attention.hpp"

#include "mixlab/random.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>
#include <string>

namespace mixlab {

namespace {

// Tile sizes are fixed, never derived from the thread count, so results are
// bitwise identical for any OMP_NUM_THREADS.
constexpr Eigen::Index kQueryTile = 64;
constexpr Eigen::Index kReduceChunk = 512;

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Eigen::Index tile_count(Eigen::Index n, Eigen::Index tile) { return (n + tile - 1) / tile; }

}  // namespace

QkvTriple::QkvTriple(Matrix q, Matrix k, Matrix v)
    : q_(std::move(q)), k_(std::move(k)), v_(std::move(v)) {
  require_same_shape(q_, k_, "QkvTriple(q, k)");
  if (v_.rows() != q_.rows()) throw ShapeError("QkvTriple: v has a different length");
  if (q_.rows() < 1 || q_.cols() < 1 || v_.cols() < 1) throw ShapeError("QkvTriple: empty input");
  require_finite(q_, "QkvTriple q");
  require_finite(k_, "QkvTriple k");
  require_finite(v_, "QkvTriple v");
}

RopeConfig::RopeConfig(Eigen::Index d_head, double base) : d_head_(d_head), base_(base) {
  if (d_head < 2 || d_head % 2 != 0) {
    throw ConfigError("RopeConfig: d_head must be even and positive, got " +
                      std::to_string(d_head));
  }
  if (!(base > 0.0) || !std::isfinite(base)) throw ConfigError("RopeConfig: base must be > 0");
}

MultiHeadConfig::MultiHeadConfig(Eigen::Index num_heads, Eigen::Index d_model)
    : num_heads_(num_heads), d_model_(d_model) {
  if (num_heads < 1 || d_model < 1) throw ConfigError("MultiHeadConfig: sizes must be positive");
  if (d_model % num_heads != 0) {
    throw ConfigError("MultiHeadConfig: d_model " + std::to_string(d_model) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
}

FeatureSequence softmax_attention(const QkvTriple& qkv) {
  const Matrix& q = qkv.q();
  const Matrix& k = qkv.k();
  const Matrix& v = qkv.v();
  const Eigen::Index t = q.rows();
  Matrix out(t, v.cols());
  const Eigen::Index tiles = tile_count(t, kQueryTile);

#pragma omp parallel for schedule(static)
  for (Eigen::Index tile = 0; tile < tiles; ++tile) {
    const Eigen::Index r0 = tile * kQueryTile;
    const Eigen::Index rows = std::min(kQueryTile, t - r0);
    Matrix logits = q.middleRows(r0, rows) * k.transpose();
    Vector row_max = logits.rowwise().maxCoeff();
    logits.colwise() -= row_max;
    logits = logits.array().exp().matrix();
    Vector row_sum = logits.rowwise().sum();
    Matrix block = logits * v;
    out.middleRows(r0, rows) = row_sum.cwiseInverse().asDiagonal() * block;
  }
  return FeatureSequence(std::move(out));
}

MatrixMixer softmax_mixer(const Matrix& q, const Matrix& k) {
  require_same_shape(q, k, "softmax_mixer");
  require_finite(q, "softmax_mixer q");
  require_finite(k, "softmax_mixer k");
  Matrix m = q * k.transpose();
  Vector row_max = m.rowwise().maxCoeff();
  m.colwise() -= row_max;
  m = m.array().exp().matrix();
  Vector row_sum = m.rowwise().sum();
  m = row_sum.cwiseInverse().asDiagonal() * m;
  return MatrixMixer(std::move(m), MixerClass::dense());
}

OrthogonalFeatureMatrix draw_orthogonal_features(Eigen::Index d_head, Eigen::Index r,
                                                 std::uint64_t seed) {
  if (d_head < 1 || r < 1) throw ConfigError("draw_orthogonal_features: d_head, r must be >= 1");
  CounterRng rng(seed);
  Matrix omega(r, d_head);
  for (Eigen::Index start = 0; start < r; start += d_head) {
    const Eigen::Index rows = std::min(d_head, r - start);
    Matrix g = gaussian_matrix(rng, d_head, d_head);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix basis = qr.householderQ();  // orthonormal columns
    // Householder fixes the signs of diag(R); flipping columns to make it
    // positive is what makes Q Haar distributed.
    const Matrix& packed = qr.matrixQR();
    for (Eigen::Index j = 0; j < d_head; ++j) {
      if (packed(j, j) < 0.0) basis.col(j) *= -1.0;
    }
    omega.middleRows(start, rows) = basis.leftCols(rows).transpose();
  }
  // Norm of a fresh Gaussian d_head-vector is exactly chi(d_head) distributed.
  for (Eigen::Index i = 0; i < r; ++i) {
    omega.row(i) *= gaussian_vector(rng, d_head).norm();
  }
  return {std::move(omega), seed};
}

PositiveFeatures positive_feature_map(const Matrix& x, const OrthogonalFeatureMatrix& omega) {
  if (x.cols() != omega.head_dim()) {
    throw ShapeError("positive_feature_map: input width " + std::to_string(x.cols()) +
                     " != feature matrix width " + std::to_string(omega.head_dim()));
  }
  require_finite(x, "positive_feature_map");
  const Eigen::Index t = x.rows();
  const Eigen::Index r = omega.features();
  Matrix exponent(t, r);
  const Eigen::Index tiles = tile_count(t, kReduceChunk);

  double shift = -std::numeric_limits<double>::infinity();
  double lowest = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(static) reduction(max : shift) reduction(min : lowest)
  for (Eigen::Index tile = 0; tile < tiles; ++tile) {
    const Eigen::Index r0 = tile * kReduceChunk;
    const Eigen::Index rows = std::min(kReduceChunk, t - r0);
    auto block = exponent.middleRows(r0, rows);
    block.noalias() = x.middleRows(r0, rows) * omega.omega.transpose();
    block.colwise() -= 0.5 * x.middleRows(r0, rows).rowwise().squaredNorm();
    shift = std::max(shift, block.maxCoeff());
    lowest = std::min(lowest, block.minCoeff());
  }
  if (!std::isfinite(shift) || !std::isfinite(lowest)) {
    throw NumericError("positive_feature_map: exponent overflow");
  }
  // Vectorized exp clamps its argument instead of returning 0, so underflow
  // has to be caught on the exponent itself.
  if (lowest - shift < std::log(std::numeric_limits<double>::min())) {
    throw NumericError("positive_feature_map: features underflow after stabilization "
                       "(exponent spread too large)");
  }

  const double norm = 1.0 / std::sqrt(static_cast<double>(r));
  PositiveFeatures out{Matrix(t, r), shift};
  out.values = ((exponent.array() - shift).exp() * norm).matrix();
  if (!(out.values.array() > 0.0).all() || !out.values.allFinite()) {
    throw NumericError("positive_feature_map: features left the positive range after "
                       "stabilization (exponent spread too large)");
  }
  return out;
}

FeatureSequence favor_attention(const QkvTriple& qkv, const OrthogonalFeatureMatrix& omega) {
  const PositiveFeatures phi_q = positive_feature_map(qkv.q(), omega);
  const PositiveFeatures phi_k = positive_feature_map(qkv.k(), omega);
  const Matrix& v = qkv.v();
  const Eigen::Index t = v.rows();
  const Eigen::Index r = omega.features();

  // phi(K)^T [V | 1], reduced over fixed-size chunks and summed in chunk order.
  const Eigen::Index chunks = tile_count(t, kReduceChunk);
  std::vector<Matrix> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index r0 = c * kReduceChunk;
    const Eigen::Index rows = std::min(kReduceChunk, t - r0);
    Matrix kv(r, v.cols() + 1);
    kv.leftCols(v.cols()).noalias() = phi_k.values.middleRows(r0, rows).transpose() *
                                      v.middleRows(r0, rows);
    kv.col(v.cols()) = phi_k.values.middleRows(r0, rows).colwise().sum().transpose();
    partial[static_cast<std::size_t>(c)] = std::move(kv);
  }
  Matrix kv = std::move(partial[0]);
  for (std::size_t c = 1; c < partial.size(); ++c) kv += partial[c];

  Matrix out(t, v.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index r0 = c * kReduceChunk;
    const Eigen::Index rows = std::min(kReduceChunk, t - r0);
    Matrix num = phi_q.values.middleRows(r0, rows) * kv;
    out.middleRows(r0, rows) =
        num.col(v.cols()).cwiseInverse().asDiagonal() * num.leftCols(v.cols());
  }
  return FeatureSequence(std::move(out));
}

MatrixMixer favor_mixer(const Matrix& q, const Matrix& k, const OrthogonalFeatureMatrix& omega) {
  require_same_shape(q, k, "favor_mixer");
  const PositiveFeatures phi_q = positive_feature_map(q, omega);
  const PositiveFeatures phi_k = positive_feature_map(k, omega);
  Matrix m = phi_q.values * phi_k.values.transpose();
  Vector row_sum = m.rowwise().sum();
  m = row_sum.cwiseInverse().asDiagonal() * m;
  return MatrixMixer(std::move(m), MixerClass::low_rank(static_cast<int>(omega.features())));
}

Matrix apply_rope(const Matrix& x, const RopeConfig& cfg) {
  if (x.cols() != cfg.d_head()) {
    throw ShapeError("apply_rope: width " + std::to_string(x.cols()) + " != d_head " +
                     std::to_string(cfg.d_head()));
  }
  const Eigen::Index pairs = cfg.d_head() / 2;
  Vector freq(pairs);
  for (Eigen::Index i = 0; i < pairs; ++i) {
    freq(i) = std::pow(cfg.base(), -2.0 * static_cast<double>(i) / static_cast<double>(cfg.d_head()));
  }
  Matrix out(x.rows(), x.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (Eigen::Index i = 0; i < pairs; ++i) {
      const double angle = static_cast<double>(t) * freq(i);
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      const double x0 = x(t, 2 * i);
      const double x1 = x(t, 2 * i + 1);
      out(t, 2 * i) = c * x0 - s * x1;
      out(t, 2 * i + 1) = s * x0 + c * x1;
    }
  }
  return out;
}

FeatureSequence multi_head_attention(const FeatureSequence& x, const AttentionWeights& weights,
                                     const MultiHeadConfig& cfg, AttentionKind kind) {
  const Eigen::Index dm = cfg.d_model();
  const Eigen::Index dh = cfg.d_head();
  if (x.width() != dm) throw ShapeError("multi_head_attention: input width != d_model");
  for (const Matrix* w : {&weights.wq, &weights.wk, &weights.wv, &weights.wo}) {
    if (w->rows() != dm || w->cols() != dm) {
      throw ShapeError("multi_head_attention: projections must be d_model x d_model");
    }
  }
  if (kind == AttentionKind::favor &&
      static_cast<Eigen::Index>(weights.head_features.size()) != cfg.num_heads()) {
    throw ShapeError("multi_head_attention: need one feature matrix per head for FAVOR+");
  }
  if (weights.rope && weights.rope->d_head() != dh) {
    throw ShapeError("multi_head_attention: RoPE d_head != d_model / num_heads");
  }

  const Matrix q = x.values() * weights.wq;
  const Matrix k = x.values() * weights.wk;
  const Matrix v = x.values() * weights.wv;
  Matrix heads(x.length(), dm);
  for (Eigen::Index h = 0; h < cfg.num_heads(); ++h) {
    Matrix qh = q.middleCols(h * dh, dh);
    Matrix kh = k.middleCols(h * dh, dh);
    if (weights.rope) {
      qh = apply_rope(qh, *weights.rope);
      kh = apply_rope(kh, *weights.rope);
    }
    QkvTriple qkv(std::move(qh), std::move(kh), v.middleCols(h * dh, dh));
    const FeatureSequence y =
        kind == AttentionKind::softmax
            ? softmax_attention(qkv)
            : favor_attention(qkv, weights.head_features[static_cast<std::size_t>(h)]);
    heads.middleCols(h * dh, dh) = y.values();
  }
  return FeatureSequence(heads * weights.wo);
}

}  // namespace mixlab
