#pragma once

#include <optional>
#include <span>

#include <Eigen/Dense>

#include "repmtl/losses.hpp"

namespace repmtl {

enum class RankMode { Mtl, Tl };

struct RankConfig {
  double threshold_t1 = 1.0;
  double threshold_t2 = 0.05;
  double radius = 5.0;
  /// Upper guess for r. Unset means sqrt(T) (Mtl) or sqrt(T n / n0) (Tl).
  std::optional<double> r_bar;
  RankMode mode = RankMode::Mtl;
  std::optional<double> n0;  ///< target sample size, required in Tl mode

  void validate() const;
  double resolved_r_bar(std::size_t num_tasks, double n) const;
};

/// Euclidean projection onto the l2 ball of the given radius.
Eigen::VectorXd project_ball(const Eigen::VectorXd& beta, double radius);

struct RankProfile {
  Eigen::VectorXd singular_values;  ///< of B / sqrt(T), descending
  double threshold = 0.0;
  std::optional<Eigen::Index> r_hat;  ///< empty when nothing clears the threshold
};

/// Threshold for sigma_{r'}(B / sqrt(T)). "log" is the natural logarithm.
///   Mtl: T1 sqrt((p + ln T)/n) + T2 R rbar^{-3/4}
///   Tl:  T1 max(sqrt((p + ln T)/n), sqrt(p/n0)) + T2 R rbar^{-3/4}
double rank_threshold(const RankConfig& config, Eigen::Index p, std::size_t num_tasks, double n);

/// Thresholds the singular values of an already assembled p x T matrix B.
RankProfile rank_profile(const Eigen::MatrixXd& b, const RankConfig& config, double n);

/// Builds B from ball-projected single-task fits and profiles it.
RankProfile rank_profile(std::span<const TaskData> data, const ModelFamily& family,
                         const RankConfig& config, double n);

/// Largest r' whose singular value clears the threshold. Throws NoRankDetected.
Eigen::Index estimate_r(std::span<const TaskData> data, const ModelFamily& family,
                        const RankConfig& config, double n);

}  // namespace repmtl
