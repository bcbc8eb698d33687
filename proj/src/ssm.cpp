#include "mixlab/ssm.hpp"

#include <cmath>
#include <string>

namespace mixlab {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }

Vector reverse(const Vector& x) { return x.reverse(); }

// L[i][j] = (c_i . b_j) * segment_product(a, i, j) for i >= j, zero above.
Matrix lower_kernel(const ScanParams& p) {
  const Eigen::Index t = p.length();
  const Matrix cb = p.c * p.b.transpose();
  Matrix out = Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    double prod = 1.0;
    out(i, i) = cb(i, i);
    for (Eigen::Index j = i - 1; j >= 0; --j) {
      prod *= p.a(j + 1);
      out(i, j) = cb(i, j) * prod;
    }
  }
  return out;
}

// Backward parameters translated to original positions, as U[i][j] for i <= j.
Matrix upper_kernel_from_scan_order(const ScanParams& bwd) {
  const ScanParams g = bwd.reversed();
  const Eigen::Index t = g.length();
  const Matrix cb = g.c * g.b.transpose();
  Matrix out = Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    double prod = 1.0;
    out(i, i) = cb(i, i);
    for (Eigen::Index j = i + 1; j < t; ++j) {
      prod *= g.a(j - 1);
      out(i, j) = cb(i, j) * prod;
    }
  }
  return out;
}

void require_width(const Matrix& x, const SelectiveWeights& w, const char* what) {
  if (x.cols() != w.width() || w.w_b.cols() != w.width() || w.w_c.cols() != w.width() ||
      w.w_c.rows() != w.state_size()) {
    throw ShapeError(std::string(what) + ": input width " + std::to_string(x.cols()) +
                     " does not match weights");
  }
}

void require_same_length(const ScanParams& p, Eigen::Index n, const char* what) {
  if (p.length() != n) {
    throw ShapeError(std::string(what) + ": params have T=" + std::to_string(p.length()) +
                     " but input has length " + std::to_string(n));
  }
}

// Scan into `y` without allocating. x and y are strided views so a matrix
// column can be used directly.
template <typename In, typename Out>
void scan_into(const ScanParams& p, const In& x, Out&& y, double* state) {
  const Eigen::Index t = p.length();
  const Eigen::Index n = p.state_size();
  for (Eigen::Index k = 0; k < n; ++k) state[k] = 0.0;
  for (Eigen::Index s = 0; s < t; ++s) {
    const double a = p.a(s);
    const double xs = x(s);
    const double* b = p.b.row(s).data();
    const double* c = p.c.row(s).data();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      state[k] = a * state[k] + b[k] * xs;
      acc += c[k] * state[k];
    }
    y(s) = acc;
  }
}

// Channelwise scans work on chunks of kTimeChunk rows: parameterize the chunk,
// then advance every channel through it, so the working set stays in cache.
// Channels are split into fixed-width blocks for threading. Neither size
// depends on the thread count, and neither does any per-channel arithmetic.
constexpr Eigen::Index kTimeChunk = 256;
constexpr Eigen::Index kChannelBlock = 32;

// emit(s, c0, w, out) receives the scan outputs for channels [c0, c0 + w) at
// time row s. With reversed_time rows are visited from T - 1 down to 0.
template <typename Emit>
void chunked_scan(const Matrix& x, const SelectiveWeights& w, bool reversed_time, Emit&& emit) {
  const Eigen::Index t = x.rows();
  const Eigen::Index width = x.cols();
  const Eigen::Index n = w.state_size();
  const Eigen::Index blocks = (width + kChannelBlock - 1) / kChannelBlock;
  const Eigen::Index chunks = (t + kTimeChunk - 1) / kTimeChunk;
  std::vector<double> state(static_cast<std::size_t>(n * kChannelBlock * blocks), 0.0);
  for (Eigen::Index ci = 0; ci < chunks; ++ci) {
    const Eigen::Index s0 = (reversed_time ? chunks - 1 - ci : ci) * kTimeChunk;
    const Eigen::Index rows = std::min(kTimeChunk, t - s0);
    const ScanParams p = selective_parameterize(Matrix(x.middleRows(s0, rows)), w);
#pragma omp parallel for schedule(static)
    for (Eigen::Index blk = 0; blk < blocks; ++blk) {
      const Eigen::Index c0 = blk * kChannelBlock;
      const Eigen::Index cw = std::min(kChannelBlock, width - c0);
      double* st_base = state.data() + blk * n * kChannelBlock;
      double out[kChannelBlock];
      for (Eigen::Index u = 0; u < rows; ++u) {
        const Eigen::Index r = reversed_time ? rows - 1 - u : u;
        const double a = p.a(r);
        const double* xs = x.row(s0 + r).data() + c0;
        const double* b = p.b.row(r).data();
        const double* c = p.c.row(r).data();
        std::fill(out, out + cw, 0.0);
        for (Eigen::Index k = 0; k < n; ++k) {
          double* st = st_base + k * cw;
          const double bk = b[k];
          const double ck = c[k];
          for (Eigen::Index j = 0; j < cw; ++j) {
            st[j] = a * st[j] + bk * xs[j];
            out[j] += ck * st[j];
          }
        }
        emit(s0 + r, c0, cw, out);
      }
    }
  }
}

// Hydra action for one channel, with the diagonal given per position.
template <typename Diag>
Vector hydra_parts(const ScanParams& fwd, const ScanParams& bwd, const Diag& diag,
                   const Vector& x) {
  const Eigen::Index t = x.size();
  std::vector<double> state(static_cast<std::size_t>(fwd.state_size()));
  Vector forward(t);
  scan_into(fwd, x, forward, state.data());
  Vector xr = x.reverse();
  Vector backward_scan(t);
  scan_into(bwd, xr, backward_scan, state.data());
  // backward(i) = backward_scan(T - 1 - i)
  Vector y(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    double v = diag(i) * x(i);
    if (i > 0) v += forward(i - 1);
    if (i + 1 < t) v += backward_scan(t - 2 - i);
    y(i) = v;
  }
  return y;
}

}  // namespace

void ScanParams::validate() const {
  const Eigen::Index t = a.size();
  if (t < 1) throw ShapeError("ScanParams: T must be >= 1");
  if (delta.size() != t || b.rows() != t || c.rows() != t) {
    throw ShapeError("ScanParams: a, b, c, delta must share length T");
  }
  if (b.cols() < 1 || c.cols() != b.cols()) throw ShapeError("ScanParams: b and c must be T x N");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite() || !delta.allFinite()) {
    throw NumericError("ScanParams: non-finite entry");
  }
  if ((a.array() < 0.0).any() || (a.array() > 1.0).any()) {
    throw ConfigError("ScanParams: transitions a_t must lie in [0, 1]");
  }
  if (!(delta.array() > 0.0).all()) throw ConfigError("ScanParams: step sizes must be > 0");
}

ScanParams ScanParams::reversed() const {
  return {a.reverse(), b.colwise().reverse(), c.colwise().reverse(), delta.reverse()};
}

void BiMambaParams::validate() const {
  fwd.validate();
  bwd.validate();
  if (fwd.length() != bwd.length() || fwd.state_size() != bwd.state_size()) {
    throw ShapeError("BiMambaParams: directions disagree on T or N");
  }
}

void HydraParams::validate() const {
  fwd.validate();
  bwd.validate();
  if (fwd.length() != bwd.length() || fwd.state_size() != bwd.state_size()) {
    throw ShapeError("HydraParams: directions disagree on T or N");
  }
  if (diag_delta.size() != fwd.length()) throw ShapeError("HydraParams: diag_delta must be length T");
  if (!diag_delta.allFinite()) throw NumericError("HydraParams: non-finite diagonal");
}

SelectiveWeights random_selective_weights(CounterRng& rng, Eigen::Index d, Eigen::Index n) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  SelectiveWeights w;
  w.w_delta = gaussian_vector(rng, d, scale);
  w.bias = std::log(std::expm1(0.05));  // softplus^{-1}(0.05)
  w.w_b = gaussian_matrix(rng, n, d, scale);
  w.w_c = gaussian_matrix(rng, n, d, scale);
  w.a_log = std::log(uniform_vector(rng, 1, 1.0, 16.0)(0));
  return w;
}

BidirectionalWeights random_bidirectional_weights(CounterRng& rng, Eigen::Index d, Eigen::Index n) {
  BidirectionalWeights w;
  w.fwd = random_selective_weights(rng, d, n);
  w.bwd = random_selective_weights(rng, d, n);
  w.diag_gain = gaussian_vector(rng, d, 1.0);
  return w;
}

ScanParams random_scan_params(CounterRng& rng, Eigen::Index t, Eigen::Index n) {
  if (t < 1 || n < 1) throw ConfigError("random_scan_params: T and N must be >= 1");
  ScanParams p;
  p.a = (1.0 - uniform_vector(rng, t, 0.0, 1.0).array()).matrix();
  const double b_scale = std::pow(10.0, uniform_vector(rng, 1, -1.0, 1.0)(0));
  const double c_scale = std::pow(10.0, uniform_vector(rng, 1, -1.0, 1.0)(0));
  p.b = gaussian_matrix(rng, t, n, b_scale);
  p.c = gaussian_matrix(rng, t, n, c_scale);
  p.delta = uniform_vector(rng, t, 0.01, 1.0);
  return p;
}

ScanParams selective_parameterize(const Matrix& x, const SelectiveWeights& w) {
  if (x.cols() != w.width() || w.w_b.cols() != w.width() || w.w_c.cols() != w.width() ||
      w.w_c.rows() != w.state_size()) {
    throw ShapeError("selective_parameterize: input width " + std::to_string(x.cols()) +
                     " does not match weights");
  }
  if (x.rows() < 1) throw ShapeError("selective_parameterize: empty input");
  const Eigen::Index t = x.rows();
  ScanParams p;
  p.delta.resize(t);
  const Vector z = x * w.w_delta;
  for (Eigen::Index s = 0; s < t; ++s) p.delta(s) = softplus(z(s) + w.bias);
  const double rate = std::exp(w.a_log);
  p.a = (-p.delta.array() * rate).exp().matrix();
  p.b = p.delta.asDiagonal() * (x * w.w_b.transpose());
  p.c = x * w.w_c.transpose();
  if (!p.delta.allFinite() || !p.a.allFinite() || !p.b.allFinite() || !p.c.allFinite() ||
      !std::isfinite(rate)) {
    throw NumericError("selective_parameterize: non-finite intermediate");
  }
  if (!(p.delta.array() > 0.0).all()) {
    throw NumericError("selective_parameterize: step size underflowed to zero");
  }
  return p;
}

Vector ssm_scan(const ScanParams& params, const Vector& x) {
  require_same_length(params, x.size(), "ssm_scan");
  Vector y(x.size());
  std::vector<double> state(static_cast<std::size_t>(params.state_size()));
  scan_into(params, x, y, state.data());
  return y;
}

double segment_product(const Vector& a, Eigen::Index i, Eigen::Index j) {
  const Eigen::Index t = a.size();
  if (i < 0 || j < 0 || i >= t || j >= t) {
    throw std::out_of_range("segment_product: index out of range for T=" + std::to_string(t));
  }
  double prod = 1.0;
  if (i > j) {
    for (Eigen::Index k = j + 1; k <= i; ++k) prod *= a(k);
  } else if (i < j) {
    for (Eigen::Index k = i; k < j; ++k) prod *= a(k);
  }
  return prod;
}

MatrixMixer ssm_mixer(const ScanParams& params) {
  params.validate();
  return MatrixMixer(lower_kernel(params),
                     MixerClass::semiseparable(static_cast<int>(params.state_size())));
}

Vector bimamba_apply(const BiMambaParams& p, const Vector& x) {
  require_same_length(p.fwd, x.size(), "bimamba_apply");
  require_same_length(p.bwd, x.size(), "bimamba_apply");
  return ssm_scan(p.fwd, x) + reverse(ssm_scan(p.bwd, reverse(x)));
}

MatrixMixer bimamba_mixer(const BiMambaParams& p) {
  p.validate();
  const Matrix lower = lower_kernel(p.fwd);
  const Matrix upper = upper_kernel_from_scan_order(p.bwd);
  Matrix m = lower.triangularView<Eigen::StrictlyLower>();
  m += upper.triangularView<Eigen::StrictlyUpper>().toDenseMatrix();
  m.diagonal() = lower.diagonal() + upper.diagonal();
  return MatrixMixer(std::move(m), MixerClass::quasiseparable(static_cast<int>(p.fwd.state_size())));
}

Vector hydra_apply(const HydraParams& p, const Vector& x) {
  require_same_length(p.fwd, x.size(), "hydra_apply");
  require_same_length(p.bwd, x.size(), "hydra_apply");
  if (p.diag_delta.size() != x.size()) throw ShapeError("hydra_apply: diag_delta length");
  return hydra_parts(p.fwd, p.bwd, p.diag_delta, x);
}

MatrixMixer hydra_mixer(const HydraParams& p) {
  p.validate();
  const Eigen::Index t = p.fwd.length();
  const Matrix lower = lower_kernel(p.fwd);
  const Matrix upper = upper_kernel_from_scan_order(p.bwd);
  Matrix m = Matrix::Zero(t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) m(i, j) = lower(i - 1, j);
    m(i, i) = p.diag_delta(i);
    for (Eigen::Index j = i + 1; j < t; ++j) m(i, j) = upper(i + 1, j);
  }
  return MatrixMixer(std::move(m), MixerClass::quasiseparable(static_cast<int>(p.fwd.state_size())));
}

FeatureSequence ssm_channelwise(const FeatureSequence& x, const SelectiveWeights& weights) {
  require_width(x.values(), weights, "ssm_channelwise");
  Matrix y(x.length(), x.width());
  chunked_scan(x.values(), weights, false,
               [&](Eigen::Index s, Eigen::Index c0, Eigen::Index w, const double* out) {
                 double* row = y.row(s).data() + c0;
                 for (Eigen::Index j = 0; j < w; ++j) row[j] = out[j];
               });
  return FeatureSequence(std::move(y));
}

FeatureSequence bimamba_channelwise(const FeatureSequence& x, const BidirectionalWeights& weights) {
  require_width(x.values(), weights.fwd, "bimamba_channelwise");
  require_width(x.values(), weights.bwd, "bimamba_channelwise");
  if (weights.fwd.state_size() != weights.bwd.state_size()) {
    throw ShapeError("bimamba_channelwise: state sizes differ");
  }
  Matrix y(x.length(), x.width());
  chunked_scan(x.values(), weights.fwd, false,
               [&](Eigen::Index s, Eigen::Index c0, Eigen::Index w, const double* out) {
                 double* row = y.row(s).data() + c0;
                 for (Eigen::Index j = 0; j < w; ++j) row[j] = out[j];
               });
  chunked_scan(x.values(), weights.bwd, true,
               [&](Eigen::Index s, Eigen::Index c0, Eigen::Index w, const double* out) {
                 double* row = y.row(s).data() + c0;
                 for (Eigen::Index j = 0; j < w; ++j) row[j] += out[j];
               });
  return FeatureSequence(std::move(y));
}

FeatureSequence hydra_channelwise(const FeatureSequence& x, const BidirectionalWeights& weights) {
  if (weights.diag_gain.size() != x.width()) {
    throw ShapeError("hydra_channelwise: diag_gain must have one entry per channel");
  }
  require_width(x.values(), weights.fwd, "hydra_channelwise");
  require_width(x.values(), weights.bwd, "hydra_channelwise");
  if (weights.fwd.state_size() != weights.bwd.state_size()) {
    throw ShapeError("hydra_channelwise: state sizes differ");
  }
  const Eigen::Index t = x.length();
  Matrix y = x.values() * weights.diag_gain.asDiagonal();
  // The forward scan at s feeds row s + 1 and the backward scan at s feeds
  // row s - 1, so neither touches the diagonal.
  chunked_scan(x.values(), weights.fwd, false,
               [&](Eigen::Index s, Eigen::Index c0, Eigen::Index w, const double* out) {
                 if (s + 1 >= t) return;
                 double* row = y.row(s + 1).data() + c0;
                 for (Eigen::Index j = 0; j < w; ++j) row[j] += out[j];
               });
  chunked_scan(x.values(), weights.bwd, true,
               [&](Eigen::Index s, Eigen::Index c0, Eigen::Index w, const double* out) {
                 if (s == 0) return;
                 double* row = y.row(s - 1).data() + c0;
                 for (Eigen::Index j = 0; j < w; ++j) row[j] += out[j];
               });
  return FeatureSequence(std::move(y));
}

HydraParams hydra_channel_params(const Matrix& x, const BidirectionalWeights& weights,
                                 Eigen::Index channel) {
  if (channel < 0 || channel >= x.cols() || weights.diag_gain.size() != x.cols()) {
    throw ShapeError("hydra_channel_params: channel out of range");
  }
  return {selective_parameterize(x, weights.fwd),
          selective_parameterize(x.colwise().reverse(), weights.bwd),
          Vector::Constant(x.rows(), weights.diag_gain(channel))};
}

}  // namespace mixlab
