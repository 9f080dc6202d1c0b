#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "repmtl/errors.hpp"

namespace repmtl {

using Rng = std::mt19937_64;

/// A p x r matrix with orthonormal columns (1 <= r <= p). Construction
/// validates the invariant; the stored matrix is immutable afterwards.
class OrthoBasis {
 public:
  static constexpr double kOrthoTol = 1e-10;

  /// Throws InvalidArgument if `m` is not column-orthonormal within kOrthoTol.
  explicit OrthoBasis(Eigen::MatrixXd m);

  /// Canonical basis (first r columns of I_p).
  static OrthoBasis identity(Eigen::Index p, Eigen::Index r);

  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::Index p() const { return m_.rows(); }
  Eigen::Index r() const { return m_.cols(); }

  /// A A^T.
  Eigen::MatrixXd projector() const { return m_ * m_.transpose(); }

  /// max |A^T A - I|.
  double orthonormality_error() const;

 private:
  Eigen::MatrixXd m_;
};

/// Thin QR factor of a full-column-rank matrix, with the triangular factor's
/// diagonal made non-negative. Throws RankDeficient when the numerical rank
/// (at 1e-10 * sigma_1) is below the column count.
OrthoBasis orthonormalize(const Eigen::MatrixXd& m);

/// ||A A^T - B B^T||_2, in [0, 1].
double projector_distance_spectral(const OrthoBasis& a, const OrthoBasis& b);

/// ||A A^T - B B^T||_F.
double projector_distance_frobenius(const OrthoBasis& a, const OrthoBasis& b);

struct ProcrustesResult {
  Eigen::MatrixXd rotation;  ///< r x r orthogonal R minimizing ||A - B R||_F
  double residual = 0.0;     ///< ||A - B R||_F
};

ProcrustesResult procrustes_align(const OrthoBasis& a, const OrthoBasis& b);

struct ExtrinsicMean {
  OrthoBasis basis;
  bool degenerate = false;  ///< eigen-gap lambda_r - lambda_{r+1} below 1e-12
  Eigen::VectorXd eigenvalues;  ///< of the averaged projector, descending
};

/// Top-r eigenvectors of the averaged projector (1/T) sum_t A_t A_t^T.
/// Each column is signed so its largest-magnitude entry is positive.
ExtrinsicMean extrinsic_mean(std::span<const OrthoBasis> bases);

/// Left singular factor of a p x r standard Gaussian matrix.
OrthoBasis random_orthobasis(Rng& rng, Eigen::Index p, Eigen::Index r);

/// Flips column signs so each column's largest-magnitude entry is positive
/// (first index wins ties).
void canonicalize_column_signs(Eigen::MatrixXd& m);

/// Top singular pair of the symmetric matrix D = A A^T - B B^T expressed as
/// the rank-one subgradient sign(l) v v^T of ||D||_2. Zero when D == 0.
Eigen::MatrixXd spectral_subgradient(const Eigen::MatrixXd& d);

/// Basis of the r-dimensional subspace that contains `beta` and is closest in
/// projector distance to col(center): beta's direction plus the (r-1)-dim part
/// of col(center) orthogonal to the projection of beta. Its spectral distance
/// to the center is sin of the angle between beta and col(center).
OrthoBasis aligned_basis(const Eigen::VectorXd& beta, const OrthoBasis& center);

}  // namespace repmtl
