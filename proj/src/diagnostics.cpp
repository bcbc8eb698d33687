#include "mixlab/diagnostics.hpp"

#include "mixlab/attention.hpp"

#include <algorithm>
#include <cmath>

namespace mixlab {

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

MatrixMixer head_average(const std::vector<MatrixMixer>& mixers) {
  if (mixers.empty()) throw ConfigError("head_average: no mixers given");
  const Eigen::Index t = mixers.front().size();
  Matrix sum = Matrix::Zero(t, t);
  for (const auto& m : mixers) {
    if (m.size() != t) throw ShapeError("head_average: mixers differ in size");
    sum += m.matrix();
  }
  return MatrixMixer(sum / static_cast<double>(mixers.size()), MixerClass::dense());
}

int numerical_rank(const MatrixMixer& mixer, double tol) {
  if (!(tol > 0.0)) throw ConfigError("numerical_rank: tol must be > 0");
  return matrix_rank(mixer.matrix(), tol);
}

Histogram pairwise_l2_histogram(const MatrixMixer& mixer, int bins) {
  if (bins < 1) throw ConfigError("pairwise_l2_histogram: bins must be >= 1");
  const Matrix& m = mixer.matrix();
  const Eigen::Index t = m.rows();

  // Row i owns the distances to rows j > i; rows are handled independently so
  // the parallel split cannot change any value.
  std::vector<std::vector<double>> per_row(static_cast<std::size_t>(t));
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < t; ++i) {
    auto& d = per_row[static_cast<std::size_t>(i)];
    d.reserve(static_cast<std::size_t>(t - i - 1));
    for (Eigen::Index j = i + 1; j < t; ++j) d.push_back((m.row(i) - m.row(j)).norm());
  }
  double hi = 0.0;
  for (const auto& row : per_row) {
    for (double v : row) hi = std::max(hi, v);
  }

  Histogram h;
  if (hi == 0.0) {
    h.bin_edges = {0.0, kEmptyRangeWidth};
    h.counts = {0};
  } else {
    h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int b = 0; b <= bins; ++b) h.bin_edges[static_cast<std::size_t>(b)] = hi * b / bins;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
  }
  const auto nbins = static_cast<long long>(h.counts.size());
  for (const auto& row : per_row) {
    for (double v : row) {
      long long b = hi == 0.0 ? 0 : static_cast<long long>(std::floor(v / hi * static_cast<double>(nbins)));
      b = std::clamp(b, 0LL, nbins - 1);
      ++h.counts[static_cast<std::size_t>(b)];
      ++h.total;
    }
  }
  return h;
}

double locality_mass(const MatrixMixer& mixer, Eigen::Index window) {
  if (window < 0) throw ConfigError("locality_mass: window must be >= 0");
  const Matrix& m = mixer.matrix();
  const Eigen::Index t = m.rows();
  // Mass is accumulated outward from the diagonal, so the in-window sum is a
  // prefix of the total and the ratio is monotone in window, exactly.
  double acc = 0.0;
  for (Eigen::Index i = 0; i < t; ++i) {
    double inside = std::abs(m(i, i));
    double total = inside;
    for (Eigen::Index off = 1; off < t; ++off) {
      double ring = 0.0;
      if (i - off >= 0) ring += std::abs(m(i, i - off));
      if (i + off < t) ring += std::abs(m(i, i + off));
      total += ring;
      if (off <= window) inside = total;
    }
    acc += total == 0.0 ? 1.0 : inside / total;
  }
  return std::min(1.0, acc / static_cast<double>(t));
}

std::vector<ApproximationPoint> approximation_error_curve(const Matrix& q, const Matrix& k,
                                                          const std::vector<Eigen::Index>& r_values,
                                                          const std::vector<std::uint64_t>& seeds) {
  if (r_values.empty() || seeds.empty()) {
    throw ConfigError("approximation_error_curve: need at least one r and one seed");
  }
  const MatrixMixer exact = softmax_mixer(q, k);
  const double exact_norm = exact.matrix().norm();
  std::vector<ApproximationPoint> curve;
  for (Eigen::Index r : r_values) {
    std::vector<double> errors;
    errors.reserve(seeds.size());
    for (std::uint64_t seed : seeds) {
      const auto omega = draw_orthogonal_features(q.cols(), r, seed);
      const MatrixMixer approx = favor_mixer(q, k, omega);
      errors.push_back((approx.matrix() - exact.matrix()).norm() / exact_norm);
    }
    curve.push_back({r, median(std::move(errors))});
  }
  return curve;
}

MixerReport analyze_mixer(const std::string& kind, const MatrixMixer& mixer,
                          const std::vector<int>& windows, int bins, double tol) {
  MixerReport r;
  r.kind = kind;
  r.rank = numerical_rank(mixer, tol);
  const Vector sums = mixer.matrix().rowwise().sum();
  r.row_sum_range = {sums.minCoeff(), sums.maxCoeff()};
  r.l2_histogram = pairwise_l2_histogram(mixer, bins);
  for (int w : windows) r.locality.emplace_back(w, locality_mass(mixer, w));
  return r;
}

}  // namespace mixlab
