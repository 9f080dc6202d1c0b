#include "repmtl/losses.hpp"

#include <cmath>
#include <string>

namespace repmtl {

namespace {

constexpr double kNewtonGradTol = 1e-8;
constexpr int kNewtonMaxIter = 200;
constexpr double kGaussNewtonGradTol = 1e-6;
constexpr int kGaussNewtonMaxIter = 500;
constexpr double kMinCurvature = 1e-12;
constexpr double kArmijo = 1e-4;

double stable_log1pexp(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }

double stable_sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

void require_finite(double v) {
  if (!std::isfinite(v)) throw LossOverflow();
}

void check_rank(const Eigen::MatrixXd& z) {
  if (z.rows() < z.cols()) {
    throw RankDeficient("design has fewer rows (" + std::to_string(z.rows()) +
                        ") than columns (" + std::to_string(z.cols()) + ")");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(1e-10);
  if (qr.rank() < z.cols()) throw RankDeficient("singular normal equations");
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& z, const Eigen::VectorXd& y) {
  check_rank(z);
  return z.householderQr().solve(y);
}

// Backtracking along `dir` from `w`. Returns the accepted step length, or 0 when
// no decrease was found above rounding level.
double backtrack(const ModelFamily& family, const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& w, double f0, const Eigen::VectorXd& grad,
                 const Eigen::VectorXd& dir) {
  const double slope = grad.dot(dir);
  double t = 1.0;
  for (int k = 0; k < 60; ++k, t *= 0.5) {
    double ft;
    try {
      ft = design_loss(family, z, y, w + t * dir);
    } catch (const LossOverflow&) {
      continue;
    }
    if (ft <= f0 + kArmijo * t * slope) return t;
  }
  return 0.0;
}

Eigen::VectorXd newton_glm(const ModelFamily& family, const Eigen::MatrixXd& z,
                           const Eigen::VectorXd& y) {
  check_rank(z);
  const double n = static_cast<double>(z.rows());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(z.cols());
  double gnorm = 0.0;
  for (int it = 0; it < kNewtonMaxIter; ++it) {
    const Eigen::VectorXd g = design_grad(family, z, y, w);
    gnorm = g.norm();
    if (gnorm <= kNewtonGradTol) return w;
    const Eigen::VectorXd u = z * w;
    Eigen::VectorXd weight(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      weight(i) = std::max(family.d2psi(u(i)), kMinCurvature);
    const Eigen::MatrixXd h = z.transpose() * weight.asDiagonal() * z / n;
    const Eigen::VectorXd dir = h.ldlt().solve(-g);
    const double t = backtrack(family, z, y, w, design_loss(family, z, y, w), g, dir);
    if (t > 0.0) {
      w += t * dir;
      continue;
    }
    // At rounding level the Armijo test is meaningless; a full step that
    // shrinks the gradient is still progress.
    const Eigen::VectorXd trial = w + dir;
    if (design_grad(family, z, y, trial).norm() < gnorm) {
      w = trial;
      continue;
    }
    break;
  }
  gnorm = design_grad(family, z, y, w).norm();
  if (gnorm <= kNewtonGradTol) return w;
  throw NonConvergence("Newton solver did not converge (grad norm " + std::to_string(gnorm) + ")",
                       w, gnorm);
}

Eigen::VectorXd gauss_newton(const ModelFamily& family, const Eigen::MatrixXd& z,
                             const Eigen::VectorXd& y) {
  Eigen::VectorXd w = least_squares(z, y);
  double gnorm = 0.0;
  for (int it = 0; it < kGaussNewtonMaxIter; ++it) {
    const Eigen::VectorXd g = design_grad(family, z, y, w);
    gnorm = g.norm();
    if (gnorm <= kGaussNewtonGradTol) return w;
    const Eigen::VectorXd u = z * w;
    Eigen::VectorXd resid(u.size()), slope(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      resid(i) = y(i) - family.link(u(i));
      slope(i) = family.dlink(u(i));
    }
    const Eigen::MatrixXd jac = slope.asDiagonal() * z;
    const Eigen::VectorXd dir = jac.householderQr().solve(resid);
    const double t = backtrack(family, z, y, w, design_loss(family, z, y, w), g, dir);
    if (t > 0.0) {
      w += t * dir;
      continue;
    }
    const Eigen::VectorXd trial = w + dir;
    if (design_grad(family, z, y, trial).norm() < gnorm) {
      w = trial;
      continue;
    }
    break;
  }
  gnorm = design_grad(family, z, y, w).norm();
  if (gnorm <= kGaussNewtonGradTol) return w;
  throw NonConvergence(
      "Gauss-Newton solver did not converge (grad norm " + std::to_string(gnorm) + ")", w, gnorm);
}

}  // namespace

TaskData::TaskData(Eigen::MatrixXd x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.rows() < 1) throw InvalidArgument("TaskData needs n >= 1");
  if (y_.size() != x_.rows()) throw ShapeError("TaskData: Y length differs from row count of X");
  if (!x_.allFinite()) throw InvalidArgument("TaskData: X has non-finite entries");
  if (!y_.allFinite()) throw InvalidArgument("TaskData: Y has non-finite entries");
}

ModelFamily ModelFamily::linear() {
  return ModelFamily(FamilyKind::Linear, "linear", nullptr, nullptr, nullptr, 2.0);
}

ModelFamily ModelFamily::logistic() {
  return ModelFamily(
      FamilyKind::Glm, "logistic", stable_log1pexp, stable_sigmoid,
      [](double u) {
        const double s = stable_sigmoid(u);
        return s * (1.0 - s);
      },
      0.25);
}

ModelFamily ModelFamily::glm(std::string name, ScalarFn psi, ScalarFn dpsi, ScalarFn d2psi,
                             double curvature_bound) {
  if (!psi || !dpsi || !d2psi) throw InvalidArgument("glm family needs psi, psi', psi''");
  if (!(curvature_bound > 0.0)) throw InvalidArgument("glm curvature bound must be positive");
  return ModelFamily(FamilyKind::Glm, std::move(name), std::move(psi), std::move(dpsi),
                     std::move(d2psi), curvature_bound);
}

ModelFamily ModelFamily::nonlinear(std::string name, ScalarFn g, ScalarFn dg,
                                   double slope_bound) {
  if (!g || !dg) throw InvalidArgument("nonlinear family needs g and g'");
  if (!(slope_bound > 0.0)) throw InvalidArgument("nonlinear slope bound must be positive");
  return ModelFamily(FamilyKind::Nonlinear, std::move(name), std::move(g), std::move(dg), nullptr,
                     2.0 * slope_bound);
}

ModelFamily ModelFamily::soft_linear() {
  return nonlinear(
      "soft_linear", [](double u) { return u + 0.5 * std::tanh(u); },
      [](double u) {
        const double t = std::tanh(u);
        return 1.0 + 0.5 * (1.0 - t * t);
      },
      2.25);
}

ModelFamily ModelFamily::from_name(const std::string& name) {
  if (name == "linear") return linear();
  if (name == "logistic") return logistic();
  if (name == "soft_linear") return soft_linear();
  throw InvalidArgument("unknown model family '" + name +
                        "' (expected linear, logistic or soft_linear)");
}

double design_loss(const ModelFamily& family, const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& w) {
  if (z.cols() != w.size() || z.rows() != y.size()) throw ShapeError("loss: dimension mismatch");
  const Eigen::VectorXd u = z * w;
  const double n = static_cast<double>(z.rows());
  double total = 0.0;
  switch (family.kind()) {
    case FamilyKind::Linear:
      total = (y - u).squaredNorm();
      break;
    case FamilyKind::Glm:
      for (Eigen::Index i = 0; i < u.size(); ++i) total += -y(i) * u(i) + family.psi(u(i));
      break;
    case FamilyKind::Nonlinear:
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double e = y(i) - family.link(u(i));
        total += e * e;
      }
      break;
  }
  const double value = total / n;
  require_finite(value);
  return value;
}

Eigen::VectorXd design_grad(const ModelFamily& family, const Eigen::MatrixXd& z,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (z.cols() != w.size() || z.rows() != y.size()) throw ShapeError("grad: dimension mismatch");
  const Eigen::VectorXd u = z * w;
  const double n = static_cast<double>(z.rows());
  Eigen::VectorXd s(u.size());
  switch (family.kind()) {
    case FamilyKind::Linear:
      s = 2.0 * (u - y);
      break;
    case FamilyKind::Glm:
      for (Eigen::Index i = 0; i < u.size(); ++i) s(i) = family.dpsi(u(i)) - y(i);
      break;
    case FamilyKind::Nonlinear:
      for (Eigen::Index i = 0; i < u.size(); ++i)
        s(i) = -2.0 * family.dlink(u(i)) * (y(i) - family.link(u(i)));
      break;
  }
  Eigen::VectorXd g = z.transpose() * s / n;
  if (!g.allFinite()) throw LossOverflow();
  return g;
}

double loss_value(const ModelFamily& family, const TaskData& data, const Eigen::VectorXd& beta) {
  return design_loss(family, data.X(), data.Y(), beta);
}

Eigen::VectorXd loss_grad(const ModelFamily& family, const TaskData& data,
                          const Eigen::VectorXd& beta) {
  return design_grad(family, data.X(), data.Y(), beta);
}

Eigen::VectorXd fit_design(const ModelFamily& family, const Eigen::MatrixXd& z,
                           const Eigen::VectorXd& y) {
  switch (family.kind()) {
    case FamilyKind::Linear:
      return least_squares(z, y);
    case FamilyKind::Glm:
      return newton_glm(family, z, y);
    case FamilyKind::Nonlinear:
      return gauss_newton(family, z, y);
  }
  throw InvalidArgument("unknown family kind");
}

Eigen::VectorXd single_task_fit(const ModelFamily& family, const TaskData& data) {
  return fit_design(family, data.X(), data.Y());
}

Eigen::VectorXd restricted_fit(const ModelFamily& family, const TaskData& data,
                               const OrthoBasis& basis) {
  if (basis.p() != data.p()) throw ShapeError("restricted_fit: basis rows differ from p");
  return fit_design(family, data.X() * basis.matrix(), data.Y());
}

Eigen::MatrixXd empirical_covariance(const TaskData& data) {
  Eigen::MatrixXd s = data.X().transpose() * data.X() / static_cast<double>(data.n());
  return 0.5 * (s + s.transpose());
}

}  // namespace repmtl
