#include "mixlab/random.hpp"

#include <random>

namespace mixlab {

Matrix gaussian_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = dist(rng);
  }
  return out;
}

Vector gaussian_vector(CounterRng& rng, Eigen::Index size, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Vector out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = dist(rng);
  return out;
}

Matrix uniform_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = dist(rng);
  }
  return out;
}

Vector uniform_vector(CounterRng& rng, Eigen::Index size, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vector out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = dist(rng);
  return out;
}

}  // namespace mixlab
