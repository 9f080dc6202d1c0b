#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "repmtl/rank.hpp"
#include "repmtl/simbench.hpp"

using namespace repmtl;

TEST_CASE("project_ball examples") {
  const Eigen::VectorXd small = Eigen::Vector2d(0.3, 0.4);
  CHECK((project_ball(small, 1.0) - small).norm() == 0.0);
  CHECK((project_ball(Eigen::Vector2d(3, 4), 1.0) - Eigen::Vector2d(0.6, 0.8)).norm() < 1e-15);
  CHECK(project_ball(Eigen::VectorXd::Zero(3), 1.0).norm() == 0.0);
  CHECK_THROWS_AS(project_ball(small, 0.0), InvalidArgument);
}

TEST_CASE("RankConfig validation") {
  RankConfig rc;
  CHECK_NOTHROW(rc.validate());
  rc.threshold_t1 = 0.0;
  CHECK_THROWS_AS(rc.validate(), InvalidArgument);
  RankConfig tl;
  tl.mode = RankMode::Tl;
  CHECK_THROWS_AS(tl.validate(), InvalidArgument);
  tl.n0 = 30.0;
  CHECK_NOTHROW(tl.validate());
}

TEST_CASE("threshold arithmetic for the reference tuning") {
  RankConfig rc;  // T1 = 1, T2 = 0.05, R = 5, rbar = sqrt(T)
  const double thr = rank_threshold(rc, 20, 6, 100.0);
  // 0.4668 + 0.1277, worked out by hand with ln 6 = 1.791759.
  CHECK(std::abs(thr - 0.5945) < 1e-4);
  const double by_hand = std::sqrt((20.0 + 1.791759469228055) / 100.0) + 0.25 * std::pow(6.0, -0.375);
  CHECK(thr == doctest::Approx(by_hand).epsilon(1e-14));
}

TEST_CASE("injected single-direction matrix gives rank one") {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(20, 6);
  b(0, 0) = std::sqrt(6.0);
  const RankProfile prof = rank_profile(b, RankConfig{}, 100.0);
  CHECK(prof.singular_values(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(prof.singular_values(1) == 0.0);
  REQUIRE(prof.r_hat);
  CHECK(*prof.r_hat == 1);
}

TEST_CASE("transfer mode uses the larger of the two rates") {
  RankConfig rc;
  rc.mode = RankMode::Tl;
  rc.n0 = 10.0;
  rc.r_bar = 2.0;
  const double expected =
      std::max(std::sqrt((20 + std::log(6.0)) / 100.0), std::sqrt(20.0 / 10.0)) +
      0.25 * std::pow(2.0, -0.75);
  CHECK(rank_threshold(rc, 20, 6, 100.0) == doctest::Approx(expected).epsilon(1e-14));
  RankConfig def;
  def.mode = RankMode::Tl;
  def.n0 = 25.0;
  CHECK(def.resolved_r_bar(6, 100.0) == doctest::Approx(std::sqrt(6.0 * 100.0 / 25.0)));
}

TEST_CASE("r_hat is monotone in both thresholds and in column scaling") {
  oracle::Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    Eigen::MatrixXd b = oracle::gaussian(rng, 10, 3) * oracle::gaussian(rng, 3, 8) * 0.3 +
                        0.05 * oracle::gaussian(rng, 10, 8);
    const auto rank_at = [&](double t1, double t2, const Eigen::MatrixXd& m) {
      RankConfig rc;
      rc.threshold_t1 = t1;
      rc.threshold_t2 = t2;
      const auto prof = rank_profile(m, rc, 100.0);
      return prof.r_hat ? *prof.r_hat : Eigen::Index{0};
    };
    Eigen::Index prev = 1000;
    for (double t1 : {0.01, 0.05, 0.1, 0.3, 0.6, 1.0, 2.0, 5.0}) {
      const Eigen::Index r = rank_at(t1, 0.05, b);
      CHECK(r <= prev);
      prev = r;
    }
    prev = 1000;
    for (double t2 : {0.001, 0.01, 0.05, 0.2, 1.0, 3.0}) {
      const Eigen::Index r = rank_at(0.2, t2, b);
      CHECK(r <= prev);
      prev = r;
    }
    const Eigen::Index base = rank_at(0.2, 0.05, b);
    for (double c : {1.0, 0.9, 0.5, 0.1}) {
      Eigen::MatrixXd scaled = b;
      scaled.col(k % 8) *= c;
      CHECK(rank_at(0.2, 0.05, scaled) <= base);
      CHECK(rank_at(0.2, 0.05, b * c) <= base);
    }
  }
}

TEST_CASE("pure noise with tight thresholds detects nothing") {
  oracle::Rng rng(2);
  std::vector<TaskData> tasks;
  for (int t = 0; t < 6; ++t) {
    tasks.push_back(fixture::make_task(rng, ModelFamily::linear(), Eigen::VectorXd::Zero(20), 100, 1.0));
  }
  RankConfig rc;
  rc.threshold_t1 = 2.0;
  CHECK_THROWS_AS(estimate_r(tasks, ModelFamily::linear(), rc, 100.0), NoRankDetected);
  const RankProfile prof = rank_profile(tasks, ModelFamily::linear(), rc, 100.0);
  CHECK_FALSE(prof.r_hat);
  CHECK(prof.singular_values.size() == 6);
}

TEST_CASE("noiseless reference data: r_hat counts the true singular values above threshold") {
  SimSpec spec = reference_spec(0.0, 5);
  spec.noise_sd = 0.0;
  const SimDataset ds = generate(spec);
  Eigen::MatrixXd bstar(20, 6);
  for (int t = 0; t < 6; ++t) bstar.col(t) = ds.truth.beta_stars[t];
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(bstar / std::sqrt(6.0)).singularValues();
  CHECK(sv(3) < 1e-12);

  for (double t1 : {0.1, 0.5, 1.0}) {
    RankConfig rc;
    rc.threshold_t1 = t1;
    const double thr = rank_threshold(rc, 20, 6, 100.0);
    Eigen::Index expected = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k)
      if (sv(k) >= thr) expected = k + 1;
    const RankProfile prof = rank_profile(ds.tasks, ModelFamily::linear(), rc, 100.0);
    REQUIRE(prof.r_hat);
    CHECK(*prof.r_hat == expected);
  }
  RankConfig loose;
  loose.threshold_t1 = 0.1;
  CHECK(estimate_r(ds.tasks, ModelFamily::linear(), loose, 100.0) == 3);
}
