#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixlab {

/// Dense row-major double matrix. Rows are time steps, columns are channels.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Operand shapes disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A value left the representable or admissible range (NaN, Inf, underflow to zero).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or parameter values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem failures; the message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

inline void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite entry");
}

/// Length-T, width-d sequence of feature frames.
///
/// Invariants: T >= 1, d >= 1, every entry finite. Checked on construction.
class FeatureSequence {
 public:
  explicit FeatureSequence(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw ShapeError("FeatureSequence: need T >= 1 and d >= 1");
    }
    require_finite(values_, "FeatureSequence");
  }

  static FeatureSequence zeros(Eigen::Index length, Eigen::Index width) {
    return FeatureSequence(Matrix::Zero(length, width));
  }

  const Matrix& values() const noexcept { return values_; }
  Eigen::Index length() const noexcept { return values_.rows(); }
  Eigen::Index width() const noexcept { return values_.cols(); }

 private:
  Matrix values_;
};

}  // namespace mixlab
