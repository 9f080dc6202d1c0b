#pragma once

#include <Eigen/Dense>

#include "repmtl/losses.hpp"
#include "repmtl/stiefel.hpp"

namespace repmtl {

struct TlFit {
  Eigen::VectorXd theta0;
  Eigen::VectorXd step1_beta0;  ///< center * theta0
  Eigen::VectorXd beta0;
};

/// Transfer a learned center to a new target task: fit theta on the reduced
/// design X0 C, then correct with the Step-2 proximal problem whose penalty
/// weight is gamma / sqrt(n0).
TlFit rl_tl(const TaskData& target, const ModelFamily& family, const OrthoBasis& center,
            double gamma);

}  // namespace repmtl
