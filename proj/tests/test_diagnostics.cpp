#include "mixlab/attention.hpp"
#include "mixlab/diagnostics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace mixlab {
namespace {

MatrixMixer dense(const Matrix& m) { return MatrixMixer(m, MixerClass::dense()); }

TEST(HeadAverage, SingleAndCancelling) {
  CounterRng rng(1);
  const Matrix m = oracle::random_matrix(rng, 5, 5);
  EXPECT_EQ(head_average({dense(m)}).matrix(), m);
  EXPECT_TRUE(head_average({dense(m), dense(-m)}).matrix().isZero(0.0));
  EXPECT_THROW(head_average({}), ConfigError);
  EXPECT_THROW(head_average({dense(m), dense(Matrix::Zero(4, 4))}), ShapeError);
}

TEST(HeadAverage, ElementwiseMean) {
  CounterRng rng(2);
  std::vector<MatrixMixer> heads;
  std::vector<Matrix> raw;
  for (int h = 0; h < 4; ++h) {
    raw.push_back(oracle::random_matrix(rng, 6, 6));
    heads.push_back(dense(raw.back()));
  }
  const Matrix avg = head_average(heads).matrix();
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) {
      const double mean = (raw[0](i, j) + raw[1](i, j) + raw[2](i, j) + raw[3](i, j)) / 4.0;
      EXPECT_NEAR(avg(i, j), mean, 1e-15);
    }
  }
}

TEST(NumericalRank, KnownRanks) {
  CounterRng rng(3);
  EXPECT_EQ(numerical_rank(dense(Matrix::Identity(7, 7))), 7);
  const Matrix low = oracle::random_matrix(rng, 9, 3) * oracle::random_matrix(rng, 3, 9);
  EXPECT_EQ(numerical_rank(dense(low)), 3);
  EXPECT_EQ(numerical_rank(dense(low)), oracle::rank(low));
  EXPECT_THROW(numerical_rank(dense(low), 0.0), ConfigError);
}

TEST(L2Histogram, IdenticalRowsFallInFirstBin) {
  Matrix m = Matrix::Zero(5, 5);
  m.col(1).setOnes();
  const Histogram h = pairwise_l2_histogram(dense(m), 10);
  EXPECT_EQ(h.total, 10);
  EXPECT_EQ(h.counts.front(), 10);
  ASSERT_GE(h.bin_edges.size(), 2u);
  EXPECT_EQ(h.bin_edges.front(), 0.0);
  EXPECT_GT(h.bin_edges[1], 0.0);
}

TEST(L2Histogram, TwoBasisRows) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  const Histogram h = pairwise_l2_histogram(dense(m), 4);
  EXPECT_EQ(h.total, 1);
  EXPECT_EQ(h.counts.back(), 1);
  EXPECT_NEAR(h.bin_edges.back(), std::sqrt(2.0), 1e-15);
}

TEST(L2Histogram, MatchesDoubleLoop) {
  CounterRng rng(4);
  const Eigen::Index t = 8;
  const int bins = 10;
  const Matrix m = oracle::random_matrix(rng, t, t);
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = i + 1; j < t; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < t; ++c) s += (m(i, c) - m(j, c)) * (m(i, c) - m(j, c));
      dist.push_back(std::sqrt(s));
    }
  }
  const double hi = *std::max_element(dist.begin(), dist.end());
  std::vector<long long> expected(bins, 0);
  for (double v : dist) {
    int b = static_cast<int>(v / hi * bins);
    if (b == bins) b = bins - 1;
    ++expected[static_cast<std::size_t>(b)];
  }
  const Histogram h = pairwise_l2_histogram(dense(m), bins);
  EXPECT_EQ(h.counts, expected);
  EXPECT_EQ(h.total, t * (t - 1) / 2);
  EXPECT_NEAR(h.bin_edges.back(), hi, 1e-12);
  for (std::size_t b = 1; b < h.bin_edges.size(); ++b) EXPECT_LT(h.bin_edges[b - 1], h.bin_edges[b]);
}

TEST(L2Histogram, LengthOneIsEmpty) {
  const Histogram h = pairwise_l2_histogram(dense(Matrix::Constant(1, 1, 2.0)), 5);
  EXPECT_EQ(h.total, 0);
  long long sum = 0;
  for (auto c : h.counts) sum += c;
  EXPECT_EQ(sum, 0);
  EXPECT_THROW(pairwise_l2_histogram(dense(Matrix::Identity(2, 2)), 0), ConfigError);
}

TEST(Locality, Examples) {
  EXPECT_DOUBLE_EQ(locality_mass(dense(Matrix::Identity(6, 6)), 0), 1.0);
  EXPECT_NEAR(locality_mass(dense(Matrix::Constant(5, 5, 0.2)), 0), 0.2, 1e-15);
  Matrix tri = Matrix::Zero(6, 6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - 1); j <= std::min<Eigen::Index>(5, i + 1); ++j) {
      tri(i, j) = 1.0 + static_cast<double>(i + j);
    }
  }
  EXPECT_DOUBLE_EQ(locality_mass(dense(tri), 1), 1.0);
  EXPECT_DOUBLE_EQ(locality_mass(dense(Matrix::Zero(3, 3)), 0), 1.0);
  EXPECT_THROW(locality_mass(dense(tri), -1), ConfigError);
}

TEST(Locality, MonotoneInWindowAndBounded) {
  CounterRng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixMixer m = dense(oracle::random_matrix(rng, 13, 13));
    double prev = -1.0;
    for (Eigen::Index w = 0; w < 13; ++w) {
      const double v = locality_mass(m, w);
      EXPECT_GE(v, prev);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
    EXPECT_DOUBLE_EQ(locality_mass(m, 12), 1.0);
  }
}

TEST(ApproximationCurve, ZeroQueriesAreExact) {
  const Matrix zero = Matrix::Zero(6, 4);
  const auto curve = approximation_error_curve(zero, zero, {2, 8}, {1, 2, 3});
  ASSERT_EQ(curve.size(), 2u);
  for (const auto& p : curve) EXPECT_LE(p.median_relative_error, 1e-14);
  EXPECT_EQ(curve[1].features, 8);
}

TEST(ApproximationCurve, DeterministicAndShrinking) {
  CounterRng rng(6);
  const Matrix q = oracle::random_matrix(rng, 16, 8, std::pow(8.0, -0.25));
  const Matrix k = oracle::random_matrix(rng, 16, 8, std::pow(8.0, -0.25));
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 16; ++s) seeds.push_back(100 + s);
  const auto a = approximation_error_curve(q, k, {8, 512}, seeds);
  const auto b = approximation_error_curve(q, k, {8, 512}, seeds);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].median_relative_error, b[i].median_relative_error);
  EXPECT_LT(a[1].median_relative_error, a[0].median_relative_error);
  EXPECT_THROW(approximation_error_curve(q, k, {}, seeds), ConfigError);
}

TEST(AnalyzeMixer, CollectsEveryField) {
  const Matrix m = Matrix::Constant(4, 4, 0.25);
  const MixerReport r = analyze_mixer("uniform", dense(m), {0, 1, 3}, 5);
  EXPECT_EQ(r.kind, "uniform");
  EXPECT_EQ(r.rank, 1);
  EXPECT_NEAR(r.row_sum_range.first, 1.0, 1e-15);
  EXPECT_NEAR(r.row_sum_range.second, 1.0, 1e-15);
  EXPECT_EQ(r.l2_histogram.total, 6);
  ASSERT_EQ(r.locality.size(), 3u);
  EXPECT_NEAR(r.locality[0].second, 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(r.locality[2].second, 1.0);
}

}  // namespace
}  // namespace mixlab
