#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "repmtl/losses.hpp"
#include "repmtl/stiefel.hpp"

namespace fixture {

// Random task for the given family with coefficient `beta`. Logistic
// responses are Bernoulli draws; the others get Gaussian noise of sd `noise`.
inline repmtl::TaskData make_task(oracle::Rng& rng, const repmtl::ModelFamily& family,
                                  const Eigen::VectorXd& beta, Eigen::Index n, double noise = 0.5) {
  const Eigen::MatrixXd x = oracle::gaussian(rng, n, beta.size());
  const Eigen::VectorXd u = x * beta;
  Eigen::VectorXd y(n);
  std::normal_distribution<double> nd(0.0, noise);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    switch (family.kind()) {
      case repmtl::FamilyKind::Linear:
        y(i) = u(i) + nd(rng);
        break;
      case repmtl::FamilyKind::Glm:
        y(i) = unif(rng) < 1.0 / (1.0 + std::exp(-u(i))) ? 1.0 : 0.0;
        break;
      case repmtl::FamilyKind::Nonlinear:
        y(i) = family.link(u(i)) + nd(rng);
        break;
    }
  }
  return repmtl::TaskData(x, y);
}

inline repmtl::OrthoBasis basis(oracle::Rng& rng, Eigen::Index p, Eigen::Index r) {
  return repmtl::random_orthobasis(rng, p, r);
}

inline repmtl::ModelFamily family_by_index(int i) {
  switch (i) {
    case 0:
      return repmtl::ModelFamily::linear();
    case 1:
      return repmtl::ModelFamily::logistic();
    default:
      return repmtl::ModelFamily::soft_linear();
  }
}

}  // namespace fixture
