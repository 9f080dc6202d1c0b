#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "repmtl/mtl.hpp"
#include "repmtl/tl.hpp"

using namespace repmtl;

namespace {

struct Target {
  OrthoBasis center;
  Eigen::VectorXd beta;
  TaskData data;
};

Target contained_target(oracle::Rng& rng, Eigen::Index p, Eigen::Index r, Eigen::Index n0,
                        double noise) {
  OrthoBasis c = fixture::basis(rng, p, r);
  Eigen::VectorXd beta = c.matrix() * oracle::gaussian_vec(rng, r);
  TaskData d = fixture::make_task(rng, ModelFamily::linear(), beta, n0, noise);
  return {std::move(c), std::move(beta), std::move(d)};
}

}  // namespace

TEST_CASE("contained noiseless target is recovered") {
  oracle::Rng rng(1);
  const Target tg = contained_target(rng, 10, 3, 40, 0.0);
  const TlFit fit = rl_tl(tg.data, ModelFamily::linear(), tg.center, 1.0);
  CHECK((fit.beta0 - tg.beta).norm() < 1e-6);
  CHECK((fit.step1_beta0 - tg.center.matrix() * fit.theta0).norm() <= 1e-12);
}

TEST_CASE("few-shot target with n0 = 2r below p") {
  oracle::Rng rng(2);
  const Eigen::Index r = 2;
  const Target tg = contained_target(rng, 12, r, 2 * r, 0.0);
  const auto lin = ModelFamily::linear();
  CHECK_THROWS_AS(single_task_fit(lin, tg.data), RankDeficient);
  const TlFit fit = rl_tl(tg.data, lin, tg.center, default_gamma(12, 5));
  CHECK((fit.step1_beta0 - tg.beta).norm() < 1e-6);
  CHECK((fit.beta0 - tg.beta).norm() < 1e-6);
}

TEST_CASE("gamma endpoints") {
  oracle::Rng rng(3);
  const auto lin = ModelFamily::linear();
  const Target tg = contained_target(rng, 6, 2, 50, 1.0);
  const TlFit off = rl_tl(tg.data, lin, tg.center, 0.0);
  CHECK((off.beta0 - single_task_fit(lin, tg.data)).norm() < 1e-8);
  const TlFit huge = rl_tl(tg.data, lin, tg.center, 1e8);
  CHECK((huge.beta0 - huge.step1_beta0).norm() < 1e-6);
}

TEST_CASE("rotating the center changes nothing") {
  oracle::Rng rng(4);
  for (int fam = 0; fam < 3; ++fam) {
    const ModelFamily f = fixture::family_by_index(fam);
    const OrthoBasis c = fixture::basis(rng, 7, 3);
    const TaskData d = fixture::make_task(rng, f, 0.5 * oracle::gaussian_vec(rng, 7), 80);
    const OrthoBasis rotated(c.matrix() * fixture::basis(rng, 3, 3).matrix());
    const TlFit a = rl_tl(d, f, c, 1.5);
    const TlFit b = rl_tl(d, f, rotated, 1.5);
    CHECK((a.step1_beta0 - b.step1_beta0).norm() <= 1e-8);
    CHECK((a.beta0 - b.beta0).norm() <= 1e-8);
  }
}

TEST_CASE("rl_tl input checks") {
  oracle::Rng rng(5);
  const Target tg = contained_target(rng, 6, 2, 20, 0.5);
  CHECK_THROWS_AS(rl_tl(tg.data, ModelFamily::linear(), OrthoBasis::identity(5, 2), 1.0), ShapeError);
  CHECK_THROWS_AS(rl_tl(tg.data, ModelFamily::linear(), tg.center, -1.0), InvalidArgument);
}
