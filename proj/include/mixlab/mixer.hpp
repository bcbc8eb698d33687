#pragma once

// Matrix-mixer view of sequence models: every mixer here is a T x T matrix M
// acting on a T x d sequence as Y = M X. Structured classes are verified by
// block-rank checks rather than trusted.

#include "mixlab/types.hpp"

#include <string>
#include <vector>

namespace mixlab {

/// Default relative tolerance for numerical rank: sigma_k counts iff sigma_k > tol * sigma_max.
inline constexpr double kRankTolerance = 1e-6;

struct MixerClass {
  enum class Kind { dense, low_rank, semiseparable, quasiseparable };

  Kind kind = Kind::dense;
  int order = 0;  // r for low_rank, N for (quasi)semiseparable, unused for dense

  static MixerClass dense() { return {Kind::dense, 0}; }
  static MixerClass low_rank(int r);
  static MixerClass semiseparable(int n);
  static MixerClass quasiseparable(int n);

  std::string name() const;
  friend bool operator==(const MixerClass&, const MixerClass&) = default;
};

/// Explicit T x T mixing matrix tagged with the structural class it claims.
class MatrixMixer {
 public:
  MatrixMixer(Matrix m, MixerClass cls);

  const Matrix& matrix() const noexcept { return m_; }
  const MixerClass& class_tag() const noexcept { return cls_; }
  Eigen::Index size() const noexcept { return m_.rows(); }

 private:
  Matrix m_;
  MixerClass cls_;
};

/// Half-open block [row_begin, row_end) x [col_begin, col_end) with its observed rank.
struct BlockViolation {
  Eigen::Index row_begin, row_end, col_begin, col_end;
  int rank;
  int allowed;
};

struct StructureReport {
  MixerClass checked_class;
  /// Largest rank seen over the blocks the class constrains. For low_rank this is
  /// the rank of the whole matrix.
  int max_offdiag_block_rank = 0;
  std::vector<BlockViolation> violations;

  bool holds() const noexcept { return violations.empty(); }
};

/// Count of singular values strictly above tol * sigma_max. Zero matrix has rank 0.
int matrix_rank(const Eigen::Ref<const Matrix>& m, double tol = kRankTolerance);

/// Y = M X.
FeatureSequence apply_mixer(const MatrixMixer& mixer, const FeatureSequence& x);

/// Verifies `mixer` against its own class tag.
StructureReport check_structure(const MatrixMixer& mixer, double tol = kRankTolerance);

/// Verifies `mixer` against an arbitrary class.
///
/// Only the maximal blocks are tested; every contiguous sub-block of a maximal
/// block has no larger rank, so the T-1 (or T) maximal blocks per triangle suffice.
///   semiseparable(N): lower blocks m[i:T, 0:i+1] (touching the diagonal) have rank
///                     <= N, and upper blocks m[0:i, i:T] have rank 0.
///   quasiseparable(N): lower blocks m[i:T, 0:i] and upper blocks m[0:i, i:T]
///                      (strictly off-diagonal) have rank <= N.
///   low_rank(r): whole matrix rank <= min(T, r).
///   dense: nothing to check.
StructureReport check_structure(const MatrixMixer& mixer, const MixerClass& cls,
                                double tol = kRankTolerance);

}  // namespace mixlab
