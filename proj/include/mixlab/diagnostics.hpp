#pragma once

// Attention-map diagnostics usable on any mixer: head averaging, numerical rank,
// histograms of pairwise row distances, locality mass, and the FAVOR+ versus
// softmax approximation-error curve.

#include "mixlab/mixer.hpp"
#include "mixlab/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mixlab {

inline constexpr int kDefaultHistogramBins = 50;
/// Upper edge of the single bin used when every distance is zero.
inline constexpr double kEmptyRangeWidth = 1e-12;

struct Histogram {
  std::vector<double> bin_edges;  // B + 1, strictly increasing
  std::vector<long long> counts;  // B
  long long total = 0;
};

struct MixerReport {
  std::string kind;
  int rank = 0;
  std::pair<double, double> row_sum_range{0.0, 0.0};
  Histogram l2_histogram;
  std::vector<std::pair<int, double>> locality;  // (window, mass)
};

struct ApproximationPoint {
  Eigen::Index features;
  double median_relative_error;
};

/// Elementwise mean, tagged dense.
MatrixMixer head_average(const std::vector<MatrixMixer>& mixers);

int numerical_rank(const MatrixMixer& mixer, double tol = kRankTolerance);

/// Histogram over [0, max] of |row_i - row_j|_2 for all i < j. The last bin is closed.
Histogram pairwise_l2_histogram(const MatrixMixer& mixer, int bins = kDefaultHistogramBins);

/// Mean over rows of the share of absolute row mass within |j - i| <= window.
/// Rows with no mass count as fully local.
double locality_mass(const MatrixMixer& mixer, Eigen::Index window);

/// For each r: median over seeds of |favor - softmax|_F / |softmax|_F.
std::vector<ApproximationPoint> approximation_error_curve(const Matrix& q, const Matrix& k,
                                                          const std::vector<Eigen::Index>& r_values,
                                                          const std::vector<std::uint64_t>& seeds);

MixerReport analyze_mixer(const std::string& kind, const MatrixMixer& mixer,
                          const std::vector<int>& windows, int bins = kDefaultHistogramBins,
                          double tol = kRankTolerance);

}  // namespace mixlab
