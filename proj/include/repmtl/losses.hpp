#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "repmtl/errors.hpp"
#include "repmtl/stiefel.hpp"

namespace repmtl {

/// One task's sample: an n x p design and its n responses.
class TaskData {
 public:
  TaskData(Eigen::MatrixXd x, Eigen::VectorXd y);

  const Eigen::MatrixXd& X() const { return x_; }
  const Eigen::VectorXd& Y() const { return y_; }
  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index p() const { return x_.cols(); }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

using ScalarFn = std::function<double(double)>;

enum class FamilyKind { Linear, Glm, Nonlinear };

/// Loss family shared by all tasks of one experiment.
///
///  - Linear:    f(b) = (1/n) sum (y - x'b)^2
///  - Glm:       f(b) = (1/n) sum [-y x'b + psi(x'b)]       (psi convex, psi'' bounded)
///  - Nonlinear: f(b) = (1/n) sum (y - g(x'b))^2           (g monotone, g' bounded)
///
/// The callables must be re-entrant; a family is shared read-only across threads.
class ModelFamily {
 public:
  static ModelFamily linear();
  /// psi(u) = log(1 + e^u), evaluated in overflow-safe form.
  static ModelFamily logistic();
  /// `curvature_bound` is sup psi''.
  static ModelFamily glm(std::string name, ScalarFn psi, ScalarFn dpsi, ScalarFn d2psi,
                         double curvature_bound);
  /// `slope_bound` is sup g'^2.
  static ModelFamily nonlinear(std::string name, ScalarFn g, ScalarFn dg, double slope_bound);
  /// g(u) = u + 0.5 tanh(u); 1 <= g' <= 1.5.
  static ModelFamily soft_linear();

  /// "linear", "logistic" or "soft_linear". Throws InvalidArgument otherwise.
  static ModelFamily from_name(const std::string& name);

  FamilyKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  /// Upper bound on the loss Hessian divided by lambda_max(X'X/n).
  double curvature_bound() const { return curvature_; }

  // Per-sample pieces. For Glm these are psi, psi', psi''; for Nonlinear, g and g'.
  double psi(double u) const { return f0_(u); }
  double dpsi(double u) const { return f1_(u); }
  double d2psi(double u) const { return f2_ ? f2_(u) : 0.0; }
  double link(double u) const { return f0_(u); }
  double dlink(double u) const { return f1_(u); }

 private:
  ModelFamily(FamilyKind kind, std::string name, ScalarFn f0, ScalarFn f1, ScalarFn f2,
              double curvature)
      : kind_(kind), name_(std::move(name)), f0_(std::move(f0)), f1_(std::move(f1)),
        f2_(std::move(f2)), curvature_(curvature) {}

  FamilyKind kind_;
  std::string name_;
  ScalarFn f0_, f1_, f2_;
  double curvature_;
};

/// Empirical loss f(beta). Throws LossOverflow on a non-finite result.
double loss_value(const ModelFamily& family, const TaskData& data, const Eigen::VectorXd& beta);

/// Analytic gradient of loss_value.
Eigen::VectorXd loss_grad(const ModelFamily& family, const TaskData& data,
                          const Eigen::VectorXd& beta);

/// argmin_beta f(beta). Linear: least squares through QR. Glm: damped Newton
/// (grad norm <= 1e-8 or 200 iterations). Nonlinear: Gauss-Newton with
/// backtracking from the linear fit (grad norm <= 1e-6 or 500 iterations).
/// Throws RankDeficient on a singular design, NonConvergence on iteration cap.
Eigen::VectorXd single_task_fit(const ModelFamily& family, const TaskData& data);

/// theta_A = argmin_theta f(A theta), i.e. single_task_fit on the reduced
/// design X A.
Eigen::VectorXd restricted_fit(const ModelFamily& family, const TaskData& data,
                               const OrthoBasis& basis);

/// (1/n) X'X.
Eigen::MatrixXd empirical_covariance(const TaskData& data);

/// Same as single_task_fit but on an arbitrary design matrix `z` (n x k).
Eigen::VectorXd fit_design(const ModelFamily& family, const Eigen::MatrixXd& z,
                           const Eigen::VectorXd& y);

/// Loss and gradient for the linear predictor u = z w; shared by the solvers.
double design_loss(const ModelFamily& family, const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& w);
Eigen::VectorXd design_grad(const ModelFamily& family, const Eigen::MatrixXd& z,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& w);

}  // namespace repmtl
