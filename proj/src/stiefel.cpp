#include "repmtl/stiefel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace repmtl {

namespace {

void require_same_shape(const OrthoBasis& a, const OrthoBasis& b) {
  if (a.p() != b.p() || a.r() != b.r()) {
    throw ShapeError("basis shape mismatch: " + std::to_string(a.p()) + "x" +
                     std::to_string(a.r()) + " vs " + std::to_string(b.p()) + "x" +
                     std::to_string(b.r()));
  }
}

}  // namespace

OrthoBasis::OrthoBasis(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.cols() < 1 || m_.cols() > m_.rows()) {
    throw InvalidArgument("OrthoBasis requires 1 <= r <= p");
  }
  if (!m_.allFinite()) {
    throw InvalidArgument("OrthoBasis has non-finite entries");
  }
  if (orthonormality_error() > kOrthoTol) {
    throw InvalidArgument("columns are not orthonormal");
  }
}

OrthoBasis OrthoBasis::identity(Eigen::Index p, Eigen::Index r) {
  return OrthoBasis(Eigen::MatrixXd::Identity(p, r));
}

double OrthoBasis::orthonormality_error() const {
  const Eigen::Index r = m_.cols();
  return (m_.transpose() * m_ - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
}

OrthoBasis orthonormalize(const Eigen::MatrixXd& m) {
  const Eigen::Index p = m.rows();
  const Eigen::Index r = m.cols();
  if (r < 1 || r > p) throw RankDeficient("need 1 <= columns <= rows");
  if (!m.allFinite()) throw InvalidArgument("orthonormalize: non-finite input");

  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  if (sv(0) == 0.0 || sv(r - 1) < 1e-10 * sv(0)) throw RankDeficient();

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, r);
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < r; ++j) {
    if (packed(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return OrthoBasis(std::move(q));
}

double projector_distance_spectral(const OrthoBasis& a, const OrthoBasis& b) {
  require_same_shape(a, b);
  const Eigen::MatrixXd d = a.projector() - b.projector();
  // D is symmetric: its largest singular value is its largest |eigenvalue|.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d, Eigen::EigenvaluesOnly);
  const double v = es.eigenvalues().cwiseAbs().maxCoeff();
  return std::clamp(v, 0.0, 1.0);
}

double projector_distance_frobenius(const OrthoBasis& a, const OrthoBasis& b) {
  require_same_shape(a, b);
  return (a.projector() - b.projector()).norm();
}

ProcrustesResult procrustes_align(const OrthoBasis& a, const OrthoBasis& b) {
  require_same_shape(a, b);
  const Eigen::MatrixXd cross = b.matrix().transpose() * a.matrix();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult out;
  out.rotation = svd.matrixU() * svd.matrixV().transpose();
  out.residual = (a.matrix() - b.matrix() * out.rotation).norm();
  return out;
}

void canonicalize_column_signs(Eigen::MatrixXd& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (std::abs(m(i, j)) > best) {
        best = std::abs(m(i, j));
        arg = i;
      }
    }
    if (m(arg, j) < 0.0) m.col(j) *= -1.0;
  }
}

ExtrinsicMean extrinsic_mean(std::span<const OrthoBasis> bases) {
  if (bases.empty()) throw InvalidArgument("extrinsic_mean: empty list");
  const Eigen::Index p = bases.front().p();
  const Eigen::Index r = bases.front().r();
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(p, p);
  for (const auto& b : bases) {
    require_same_shape(b, bases.front());
    avg.noalias() += b.matrix() * b.matrix().transpose();
  }
  avg /= static_cast<double>(bases.size());
  avg = (0.5 * (avg + avg.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(avg);
  // Eigen returns ascending order; reverse to descending.
  const Eigen::VectorXd evals = es.eigenvalues().reverse();
  Eigen::MatrixXd top(p, r);
  for (Eigen::Index j = 0; j < r; ++j) top.col(j) = es.eigenvectors().col(p - 1 - j);
  canonicalize_column_signs(top);

  const bool degenerate = r < p && (evals(r - 1) - evals(r)) < 1e-12;
  // Re-orthonormalize through QR only when rounding pushed us off the manifold.
  OrthoBasis basis = (top.transpose() * top - Eigen::MatrixXd::Identity(r, r))
                                 .cwiseAbs()
                                 .maxCoeff() > 1e-12
                         ? orthonormalize(top)
                         : OrthoBasis(top);
  return ExtrinsicMean{std::move(basis), degenerate, evals};
}

OrthoBasis random_orthobasis(Rng& rng, Eigen::Index p, Eigen::Index r) {
  if (r < 1 || r > p) throw InvalidArgument("random_orthobasis requires 1 <= r <= p");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Eigen::MatrixXd c(p, r);
    for (Eigen::Index j = 0; j < r; ++j)
      for (Eigen::Index i = 0; i < p; ++i) c(i, j) = normal(rng);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    if (sv(r - 1) < 1e-10 * sv(0)) continue;
    Eigen::MatrixXd u = svd.matrixU().leftCols(r);
    canonicalize_column_signs(u);
    return OrthoBasis(std::move(u));
  }
}

Eigen::MatrixXd spectral_subgradient(const Eigen::MatrixXd& d) {
  const Eigen::Index p = d.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (d + d.transpose()));
  const auto& ev = es.eigenvalues();
  // Ascending order; compare the two extremes, preferring the first triplet on ties.
  const double lo = ev(0);
  const double hi = ev(p - 1);
  if (std::max(std::abs(lo), std::abs(hi)) == 0.0) return Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd v;
  double sign;
  if (std::abs(hi) >= std::abs(lo)) {
    v = es.eigenvectors().col(p - 1);
    sign = 1.0;
  } else {
    v = es.eigenvectors().col(0);
    sign = -1.0;
  }
  return sign * v * v.transpose();
}

OrthoBasis aligned_basis(const Eigen::VectorXd& beta, const OrthoBasis& center) {
  const Eigen::Index p = center.p();
  const Eigen::Index r = center.r();
  if (beta.size() != p) throw ShapeError("aligned_basis: beta has wrong length");
  const double norm = beta.norm();
  if (r == p || norm == 0.0) return center;

  const Eigen::VectorXd u = beta / norm;
  const Eigen::MatrixXd& c = center.matrix();
  Eigen::VectorXd coords = c.transpose() * u;
  const double off = (u - c * coords).norm();
  if (off <= 1e-14) return center;

  if (coords.norm() <= 1e-14) coords = Eigen::VectorXd::Unit(r, 0);
  const Eigen::MatrixXd coord_col = coords;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(coord_col);
  const Eigen::MatrixXd full_q = qr.householderQ() * Eigen::MatrixXd::Identity(r, r);

  Eigen::MatrixXd a(p, r);
  a.col(0) = u;
  if (r > 1) a.rightCols(r - 1) = c * full_q.rightCols(r - 1);
  return OrthoBasis(std::move(a));
}

}  // namespace repmtl
