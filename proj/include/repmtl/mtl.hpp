#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "repmtl/losses.hpp"
#include "repmtl/stiefel.hpp"

namespace repmtl {

struct MtlConfig {
  double lambda = 0.0;  ///< Step-1 penalty scale, multiplies 1/sqrt(n)
  double gamma = 0.0;   ///< Step-2 penalty scale, multiplies 1/sqrt(n)
  Eigen::Index r = 1;
  int max_outer_iters = 200;
  double tol = 1e-7;  ///< relative objective change that ends Step 1
  double riemannian_step = 0.1;
  int riemannian_substeps = 5;

  void validate(Eigen::Index p) const;
};

/// lambda = sqrt(r (p + ln T)).
double default_lambda(Eigen::Index r, Eigen::Index p, std::size_t num_tasks);
/// gamma = 0.5 sqrt(p + ln T).
double default_gamma(Eigen::Index p, std::size_t num_tasks);

struct Step1Result {
  std::vector<OrthoBasis> bases;
  std::vector<Eigen::VectorXd> thetas;
  OrthoBasis center;
  std::vector<double> objective_trace;
  bool converged = false;
};

struct MtlFit {
  std::vector<OrthoBasis> per_task_basis;
  std::vector<Eigen::VectorXd> per_task_theta;
  OrthoBasis center;
  std::vector<Eigen::VectorXd> step1_beta;
  std::vector<Eigen::VectorXd> beta;
  std::vector<double> objective_trace;
  bool converged = false;
};

/// (1/T) sum_t [ f_t(A_t theta_t) + lambda / sqrt(n_t) * ||A_t A_t' - C C'||_2 ].
double step1_objective(std::span<const TaskData> data, const ModelFamily& family,
                       std::span<const OrthoBasis> bases, std::span<const Eigen::VectorXd> thetas,
                       const OrthoBasis& center, double lambda);

/// Penalized joint estimation by monotone block-coordinate descent.
///
/// Start: center from the top-r left singular vectors of the stacked
/// single-task estimates, every A_t equal to the center, theta_t refit.
/// Each round then
///   (a) updates every task independently, choosing the best of three
///       candidates (snap to the center; a few Riemannian subgradient steps
///       with QR retraction; the subspace closest to the center that contains
///       a descent point of the exact per-task objective) and keeping the
///       current state unless the task's penalized term drops;
///   (b) proposes a new center (the extrinsic mean of the A_t, and a
///       Riemannian gradient step that drags the snapped tasks along) and
///       keeps whichever lowers the full objective, if any.
/// The recorded objective is therefore non-increasing.
Step1Result fit_step1(std::span<const TaskData> data, const ModelFamily& family,
                      const MtlConfig& config);

/// (1 - tau/||v||)_+ v.
Eigen::VectorXd prox_l2(const Eigen::VectorXd& v, double tau);

/// argmin_beta f(beta) + gamma / sqrt(n) * ||beta - anchor||_2 by accelerated
/// proximal gradient in w = beta - anchor.
Eigen::VectorXd fit_step2(const TaskData& data, const ModelFamily& family, double gamma,
                          const Eigen::VectorXd& anchor);

/// Step 1 followed by Step 2 for every task with anchor A_t theta_t.
MtlFit rl_mtl(std::span<const TaskData> data, const ModelFamily& family, const MtlConfig& config);

}  // namespace repmtl
