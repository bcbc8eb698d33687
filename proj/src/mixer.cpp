#include "mixlab/mixer.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace mixlab {

MixerClass MixerClass::low_rank(int r) {
  if (r < 1) throw ConfigError("low_rank class needs r >= 1");
  return {Kind::low_rank, r};
}

MixerClass MixerClass::semiseparable(int n) {
  if (n < 1) throw ConfigError("semiseparable class needs N >= 1");
  return {Kind::semiseparable, n};
}

MixerClass MixerClass::quasiseparable(int n) {
  if (n < 1) throw ConfigError("quasiseparable class needs N >= 1");
  return {Kind::quasiseparable, n};
}

std::string MixerClass::name() const {
  switch (kind) {
    case Kind::dense: return "dense";
    case Kind::low_rank: return "low_rank(" + std::to_string(order) + ")";
    case Kind::semiseparable: return "semiseparable(" + std::to_string(order) + ")";
    case Kind::quasiseparable: return "quasiseparable(" + std::to_string(order) + ")";
  }
  return "unknown";
}

MatrixMixer::MatrixMixer(Matrix m, MixerClass cls) : m_(std::move(m)), cls_(cls) {
  if (m_.rows() < 1 || m_.rows() != m_.cols()) {
    throw ShapeError("MatrixMixer: matrix must be square and non-empty, got " +
                     std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
  }
  require_finite(m_, "MatrixMixer");
}

int matrix_rank(const Eigen::Ref<const Matrix>& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  if (svd.info() != Eigen::Success) throw NumericError("SVD did not converge");
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double cutoff = tol * s(0);
  return static_cast<int>((s.array() > cutoff).count());
}

FeatureSequence apply_mixer(const MatrixMixer& mixer, const FeatureSequence& x) {
  if (mixer.size() != x.length()) {
    throw ShapeError("apply_mixer: mixer is " + std::to_string(mixer.size()) +
                     "x" + std::to_string(mixer.size()) + " but sequence has T=" +
                     std::to_string(x.length()));
  }
  return FeatureSequence(mixer.matrix() * x.values());
}

StructureReport check_structure(const MatrixMixer& mixer, double tol) {
  return check_structure(mixer, mixer.class_tag(), tol);
}

StructureReport check_structure(const MatrixMixer& mixer, const MixerClass& cls, double tol) {
  if (!(tol > 0.0)) throw ConfigError("check_structure: tol must be > 0");
  const Matrix& m = mixer.matrix();
  const Eigen::Index t = m.rows();

  StructureReport report{cls, 0, {}};
  auto check_block = [&](Eigen::Index r0, Eigen::Index r1, Eigen::Index c0, Eigen::Index c1,
                         int allowed) {
    if (r1 <= r0 || c1 <= c0) return;
    const int rank = matrix_rank(m.block(r0, c0, r1 - r0, c1 - c0), tol);
    report.max_offdiag_block_rank = std::max(report.max_offdiag_block_rank, rank);
    if (rank > allowed) report.violations.push_back({r0, r1, c0, c1, rank, allowed});
  };

  switch (cls.kind) {
    case MixerClass::Kind::dense:
      break;
    case MixerClass::Kind::low_rank: {
      const int allowed = static_cast<int>(std::min<Eigen::Index>(t, cls.order));
      check_block(0, t, 0, t, allowed);
      break;
    }
    case MixerClass::Kind::semiseparable:
      for (Eigen::Index i = 0; i < t; ++i) check_block(i, t, 0, i + 1, cls.order);
      for (Eigen::Index i = 1; i < t; ++i) check_block(0, i, i, t, 0);
      break;
    case MixerClass::Kind::quasiseparable:
      for (Eigen::Index i = 1; i < t; ++i) {
        check_block(i, t, 0, i, cls.order);
        check_block(0, i, i, t, cls.order);
      }
      break;
  }
  return report;
}

}  // namespace mixlab
