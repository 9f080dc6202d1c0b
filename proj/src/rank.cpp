#include "repmtl/rank.hpp"

#include <cmath>

namespace repmtl {

void RankConfig::validate() const {
  if (!(threshold_t1 > 0.0) || !(threshold_t2 > 0.0) || !(radius > 0.0)) {
    throw InvalidArgument("rank thresholds and radius must be positive");
  }
  if (r_bar && !(*r_bar > 0.0)) throw InvalidArgument("r_bar must be positive");
  if (mode == RankMode::Tl && !(n0 && *n0 > 0.0)) {
    throw InvalidArgument("Tl mode requires a positive n0");
  }
}

double RankConfig::resolved_r_bar(std::size_t num_tasks, double n) const {
  if (r_bar) return *r_bar;
  const double t = static_cast<double>(num_tasks);
  if (mode == RankMode::Tl) return std::sqrt(t * n / *n0);
  return std::sqrt(t);
}

Eigen::VectorXd project_ball(const Eigen::VectorXd& beta, double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("project_ball: radius must be positive");
  const double nb = beta.norm();
  if (nb <= radius) return beta;
  return beta * (radius / nb);
}

double rank_threshold(const RankConfig& config, Eigen::Index p, std::size_t num_tasks, double n) {
  config.validate();
  if (!(n > 0.0)) throw InvalidArgument("rank_threshold: n must be positive");
  const double pd = static_cast<double>(p);
  double rate = std::sqrt((pd + std::log(static_cast<double>(num_tasks))) / n);
  if (config.mode == RankMode::Tl) rate = std::max(rate, std::sqrt(pd / *config.n0));
  const double r_bar = config.resolved_r_bar(num_tasks, n);
  return config.threshold_t1 * rate + config.threshold_t2 * config.radius * std::pow(r_bar, -0.75);
}

RankProfile rank_profile(const Eigen::MatrixXd& b, const RankConfig& config, double n) {
  const auto num_tasks = static_cast<std::size_t>(b.cols());
  if (num_tasks == 0) throw InvalidArgument("rank_profile: no tasks");
  RankProfile out;
  out.threshold = rank_threshold(config, b.rows(), num_tasks, n);
  out.singular_values =
      Eigen::JacobiSVD<Eigen::MatrixXd>(b / std::sqrt(static_cast<double>(num_tasks)))
          .singularValues();
  // r' ranges over [T]; sigma_{r'} is zero beyond min(p, T) and never clears a
  // positive threshold, so scanning the computed values suffices.
  for (Eigen::Index k = out.singular_values.size(); k >= 1; --k) {
    if (out.singular_values(k - 1) >= out.threshold) {
      out.r_hat = k;
      break;
    }
  }
  return out;
}

RankProfile rank_profile(std::span<const TaskData> data, const ModelFamily& family,
                         const RankConfig& config, double n) {
  if (data.empty()) throw InvalidArgument("rank_profile: no tasks");
  const Eigen::Index p = data.front().p();
  Eigen::MatrixXd b(p, static_cast<Eigen::Index>(data.size()));
  for (std::size_t t = 0; t < data.size(); ++t) {
    if (data[t].p() != p) throw ShapeError("rank_profile: tasks disagree on p");
    b.col(static_cast<Eigen::Index>(t)) =
        project_ball(single_task_fit(family, data[t]), config.radius);
  }
  return rank_profile(b, config, n);
}

Eigen::Index estimate_r(std::span<const TaskData> data, const ModelFamily& family,
                        const RankConfig& config, double n) {
  const RankProfile profile = rank_profile(data, family, config, n);
  if (!profile.r_hat) throw NoRankDetected();
  return *profile.r_hat;
}

}  // namespace repmtl
