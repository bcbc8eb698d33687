#include "mixlab/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixlab::reference {

FeatureSequence softmax_attention(const QkvTriple& qkv) {
  const Matrix& q = qkv.q();
  const Matrix& k = qkv.k();
  const Matrix& v = qkv.v();
  const Eigen::Index t = q.rows();
  Matrix out = Matrix::Zero(t, v.cols());
  std::vector<double> logits(static_cast<std::size_t>(t));
  for (Eigen::Index i = 0; i < t; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < t; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < q.cols(); ++c) s += q(i, c) * k(j, c);
      logits[static_cast<std::size_t>(j)] = s;
      mx = std::max(mx, s);
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < t; ++j) {
      const double p = std::exp(logits[static_cast<std::size_t>(j)] - mx);
      total += p;
      for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += p * v(j, c);
    }
    for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) /= total;
  }
  return FeatureSequence(std::move(out));
}

namespace {

// Unnormalized exponents of the positive feature map.
Matrix feature_exponents(const Matrix& x, const Matrix& omega) {
  Matrix e(x.rows(), omega.rows());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    double sq = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) sq += x(t, c) * x(t, c);
    for (Eigen::Index f = 0; f < omega.rows(); ++f) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) s += omega(f, c) * x(t, c);
      e(t, f) = s - 0.5 * sq;
    }
  }
  return e;
}

double silu(double v) { return v / (1.0 + std::exp(-v)); }

}  // namespace

FeatureSequence favor_attention(const QkvTriple& qkv, const OrthogonalFeatureMatrix& omega) {
  const Matrix& v = qkv.v();
  const Eigen::Index t = v.rows();
  const Eigen::Index r = omega.features();
  Matrix eq = feature_exponents(qkv.q(), omega.omega);
  Matrix ek = feature_exponents(qkv.k(), omega.omega);
  const double sq = eq.maxCoeff();
  const double sk = ek.maxCoeff();
  for (Eigen::Index i = 0; i < eq.size(); ++i) eq.data()[i] = std::exp(eq.data()[i] - sq);
  for (Eigen::Index i = 0; i < ek.size(); ++i) ek.data()[i] = std::exp(ek.data()[i] - sk);

  // The r^{-1/2} factors and the shifts cancel in the normalization.
  Matrix kv = Matrix::Zero(r, v.cols());
  Vector ksum = Vector::Zero(r);
  for (Eigen::Index s = 0; s < t; ++s) {
    for (Eigen::Index f = 0; f < r; ++f) {
      ksum(f) += ek(s, f);
      for (Eigen::Index c = 0; c < v.cols(); ++c) kv(f, c) += ek(s, f) * v(s, c);
    }
  }
  Matrix out(t, v.cols());
  for (Eigen::Index i = 0; i < t; ++i) {
    double den = 0.0;
    for (Eigen::Index f = 0; f < r; ++f) den += eq(i, f) * ksum(f);
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      double num = 0.0;
      for (Eigen::Index f = 0; f < r; ++f) num += eq(i, f) * kv(f, c);
      out(i, c) = num / den;
    }
  }
  return FeatureSequence(std::move(out));
}

FeatureSequence ffw_apply(const FeatureSequence& x, const FfwWeights& w) {
  const Matrix& xv = x.values();
  const Eigen::Index hidden = w.w1.cols();
  Matrix out(x.length(), x.width());
  std::vector<double> h(static_cast<std::size_t>(hidden));
  for (Eigen::Index t = 0; t < x.length(); ++t) {
    for (Eigen::Index j = 0; j < hidden; ++j) {
      double s = w.b1(j);
      for (Eigen::Index c = 0; c < x.width(); ++c) s += xv(t, c) * w.w1(c, j);
      h[static_cast<std::size_t>(j)] = silu(s);
    }
    for (Eigen::Index c = 0; c < x.width(); ++c) {
      double s = w.b2(c);
      for (Eigen::Index j = 0; j < hidden; ++j) s += h[static_cast<std::size_t>(j)] * w.w2(j, c);
      out(t, c) = s;
    }
  }
  return FeatureSequence(std::move(out));
}

FeatureSequence dilated_dw_conv(const FeatureSequence& x, const DilatedConvWeights& w) {
  const Matrix& xv = x.values();
  const Eigen::Index t = x.length();
  const Eigen::Index k = w.kernel.cols();
  const Eigen::Index pad = ((k - 1) * w.dilation) / 2;
  Matrix out(t, x.width());
  for (Eigen::Index c = 0; c < x.width(); ++c) {
    for (Eigen::Index s = 0; s < t; ++s) {
      double acc = w.bias(c);
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::Index src = s - pad + j * w.dilation;
        if (src >= 0 && src < t) acc += w.kernel(c, j) * xv(src, c);
      }
      out(s, c) = acc;
    }
  }
  return FeatureSequence(std::move(out));
}

FeatureSequence layer_norm_apply(const FeatureSequence& x, const Vector& scale, const Vector& shift) {
  const Matrix& xv = x.values();
  const Eigen::Index d = x.width();
  Matrix out(x.length(), d);
  for (Eigen::Index t = 0; t < x.length(); ++t) {
    double mean = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) mean += xv(t, c);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) var += (xv(t, c) - mean) * (xv(t, c) - mean);
    var /= static_cast<double>(d);
    const double denom = std::sqrt(var + kLayerNormEpsilon);
    for (Eigen::Index c = 0; c < d; ++c) out(t, c) = (xv(t, c) - mean) / denom * scale(c) + shift(c);
  }
  return FeatureSequence(std::move(out));
}

FeatureSequence ssm_channelwise(const FeatureSequence& x, const SelectiveWeights& weights) {
  const ScanParams p = selective_parameterize(x.values(), weights);
  Matrix out(x.length(), x.width());
  for (Eigen::Index c = 0; c < x.width(); ++c) out.col(c) = ssm_scan(p, x.values().col(c));
  return FeatureSequence(std::move(out));
}

FeatureSequence hydra_channelwise(const FeatureSequence& x, const BidirectionalWeights& weights) {
  Matrix out(x.length(), x.width());
  for (Eigen::Index c = 0; c < x.width(); ++c) {
    const HydraParams p = hydra_channel_params(x.values(), weights, c);
    out.col(c) = hydra_apply(p, x.values().col(c));
  }
  return FeatureSequence(std::move(out));
}

}  // namespace mixlab::reference
