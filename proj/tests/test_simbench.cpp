#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "repmtl/simbench.hpp"

using namespace repmtl;

TEST_CASE("h = 0 makes every task representation the center") {
  const SimDataset ds = generate(reference_spec(0.0, 3));
  for (const auto& rep : ds.truth.task_reps) {
    CHECK((rep - ds.truth.center_star.matrix()).cwiseAbs().maxCoeff() == 0.0);
  }
  for (double d : ds.truth.effective_distance) CHECK(d < 1e-12);
  CHECK(ds.truth.inlier_set.size() == 6);
}

TEST_CASE("task representation follows the shift construction") {
  const SimDataset ds = generate(reference_spec(0.3, 3));
  for (std::size_t t = 0; t < 6; ++t) {
    const Eigen::MatrixXd shift = ds.truth.task_reps[t] - ds.truth.center_star.matrix();
    CHECK(shift.bottomRows(17).cwiseAbs().maxCoeff() == 0.0);
    const double s = shift(0, 0);
    CHECK(std::abs(std::abs(s) - 0.3) < 1e-15);
    CHECK((shift.topRows(3) - s * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((ds.truth.beta_stars[t] - ds.truth.task_reps[t] * reference_theta_stars()[t]).norm() == 0.0);
  }
}

TEST_CASE("noiseless responses are exact") {
  SimSpec spec = reference_spec(0.2, 4);
  spec.noise_sd = 0.0;
  const SimDataset ds = generate(spec);
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK((ds.tasks[t].Y() - ds.tasks[t].X() * ds.truth.beta_stars[t]).norm() == 0.0);
  }
}

TEST_CASE("generation is deterministic and follows the seed scheme") {
  const SimDataset a = generate(reference_spec(0.4, 99));
  const SimDataset b = generate(reference_spec(0.4, 99));
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK((a.tasks[t].X() - b.tasks[t].X()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.tasks[t].Y() - b.tasks[t].Y()).cwiseAbs().maxCoeff() == 0.0);
  }
  // Shared structure from the master seed; task t from master + t + 1.
  Rng shared(99);
  CHECK((random_orthobasis(shared, 20, 3).matrix() - a.truth.center_star.matrix()).cwiseAbs().maxCoeff() == 0.0);
  Rng task2(99 + 2 + 1);
  std::normal_distribution<double> nd(0.0, 1.0);
  CHECK(nd(task2) == a.tasks[2].X()(0, 0));
}

TEST_CASE("outlier task draws uniform coefficients") {
  const SimDataset ds = generate(reference_outlier_spec(0.0, 8));
  REQUIRE(ds.tasks.size() == 7);
  CHECK(ds.truth.inlier_set.size() == 6);
  const Eigen::VectorXd& b = ds.truth.beta_stars[6];
  CHECK(b.maxCoeff() < 1.0);
  CHECK(b.minCoeff() >= -1.0);
  CHECK(std::isnan(ds.truth.effective_distance[6]));
}

TEST_CASE("SimSpec validation") {
  SimSpec s = reference_spec(0.0, 1);
  s.theta_stars.pop_back();
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  SimSpec o = reference_spec(0.0, 1);
  o.outlier_tasks.push_back(OutlierTask{6, -1, 1});
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  SimSpec h = reference_spec(-0.1, 1);
  CHECK_THROWS_AS(h.validate(), InvalidArgument);
}

TEST_CASE("max_error examples and an independent recomputation") {
  const SimDataset ds = generate(reference_outlier_spec(0.1, 2));
  std::vector<Eigen::VectorXd> fits = ds.truth.beta_stars;
  CHECK(max_error(fits, ds.truth, Subset::All) == 0.0);
  fits[1](4) += 0.25;
  CHECK(max_error(fits, ds.truth, Subset::Inliers) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(max_error(fits, ds.truth, Subset::Outliers) == 0.0);

  oracle::Rng rng(3);
  for (auto& f : fits) f += 0.1 * oracle::gaussian_vec(rng, 20);
  double inl = 0.0, out = 0.0;
  for (std::size_t t = 0; t < 7; ++t) {
    const double e = oracle::l2(fits[t] - ds.truth.beta_stars[t]);
    (t == 6 ? out : inl) = std::max(t == 6 ? out : inl, e);
  }
  CHECK(max_error(fits, ds.truth, Subset::Inliers) == doctest::Approx(inl).epsilon(1e-13));
  CHECK(max_error(fits, ds.truth, Subset::Outliers) == doctest::Approx(out).epsilon(1e-13));
  CHECK(max_error(fits, ds.truth, Subset::All) == doctest::Approx(std::max(inl, out)).epsilon(1e-13));

  // Outlier fits never touch the inlier metric.
  fits[6] *= 100.0;
  CHECK(max_error(fits, ds.truth, Subset::Inliers) == doctest::Approx(inl).epsilon(1e-13));

  const SimDataset clean = generate(reference_spec(0.0, 2));
  CHECK_THROWS_AS(max_error(clean.truth.beta_stars, clean.truth, Subset::Outliers), InvalidArgument);
}

TEST_CASE("naive shared baseline recovers a noiseless shared model") {
  SimSpec spec = reference_spec(0.0, 6);
  spec.noise_sd = 0.0;
  const SimDataset ds = generate(spec);
  const auto fits = baseline_naive_shared(ds.tasks, ModelFamily::linear(), 3);
  for (std::size_t t = 0; t < 6; ++t) CHECK((fits[t] - ds.truth.beta_stars[t]).norm() <= 1e-4);
}

TEST_CASE("naive shared baseline with one task and r = p is the single-task fit") {
  oracle::Rng rng(7);
  const auto lin = ModelFamily::linear();
  const TaskData d = fixture::make_task(rng, lin, oracle::gaussian_vec(rng, 4), 30);
  const auto fits = baseline_naive_shared(std::vector<TaskData>{d}, lin, 4);
  CHECK((fits[0] - single_task_fit(lin, d)).norm() < 1e-8);
}

TEST_CASE("naive shared objective is no worse than its starting point") {
  const SimDataset ds = generate(reference_spec(0.5, 12));
  const auto lin = ModelFamily::linear();
  const auto fits = baseline_naive_shared(ds.tasks, lin, 3);
  // Starting point: top-3 left singular vectors of the stacked single-task fits.
  Eigen::MatrixXd b(20, 6);
  for (int t = 0; t < 6; ++t) b.col(t) = single_task_fit(lin, ds.tasks[t]);
  const OrthoBasis a0(Eigen::JacobiSVD<Eigen::MatrixXd>(b, Eigen::ComputeThinU).matrixU().leftCols(3));
  double start = 0.0, end = 0.0;
  for (int t = 0; t < 6; ++t) {
    start += loss_value(lin, ds.tasks[t], a0.matrix() * restricted_fit(lin, ds.tasks[t], a0));
    end += loss_value(lin, ds.tasks[t], fits[t]);
  }
  CHECK(end <= start + 1e-12);
}

TEST_CASE("method names round-trip") {
  for (Method m : all_methods()) CHECK(method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(method_from_string("oracle"), InvalidArgument);
  CHECK(to_string(Subset::Inliers) == "inliers");
  CHECK(to_string(Subset::Outliers) == "outliers");
}

TEST_CASE("single noiseless replication with an outlier task: sd is zero") {
  SimSpec spec = reference_outlier_spec(0.0, 31);
  spec.noise_sd = 0.0;
  BenchOptions opt;
  opt.rank.threshold_t1 = 0.1;
  const auto methods = all_methods();
  const auto recs = run_replications(spec, methods, 1, opt);
  REQUIRE(recs.size() == 4);
  for (const auto& r : recs) {
    CHECK_FALSE(r.failure);
    CHECK(r.outlier_error.has_value());
  }
  const auto rows = summarize(recs);
  REQUIRE(rows.size() == 8);
  for (const auto& row : rows) {
    CHECK(row.sd == 0.0);
    CHECK(row.count == 1);
  }
}

TEST_CASE("noiseless shared model without outliers: every method within 1e-3") {
  SimSpec spec = reference_spec(0.0, 41);
  spec.noise_sd = 0.0;
  BenchOptions opt;
  opt.rank.threshold_t1 = 0.1;
  const auto recs = run_replications(spec, all_methods(), 1, opt);
  for (const auto& r : recs) {
    CHECK_FALSE(r.failure);
    CHECK(r.inlier_error <= 1e-3);
  }
  const auto rows = summarize(recs);
  for (const auto& row : rows) {
    if (row.subset == Subset::Outliers) {
      CHECK(std::isnan(row.mean));
      CHECK(row.count == 0);
    }
  }
}

TEST_CASE("replications are identical for any thread count") {
  SimSpec spec = reference_spec(0.2, 5);
  spec.n = 60;
  spec.p = 8;
  const std::vector<Method> methods{Method::RlMtlOracle, Method::SingleTask};
  BenchOptions one;
  BenchOptions three;
  three.threads = 3;
  const auto a = run_replications(spec, methods, 4, one);
  const auto b = run_replications(spec, methods, 4, three);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].method == b[i].method);
    CHECK(a[i].rep == b[i].rep);
    CHECK(a[i].inlier_error == b[i].inlier_error);
  }
}

TEST_CASE("failures are recorded per record") {
  SimSpec spec = reference_spec(0.0, 5);
  spec.n = 10;  // fewer samples than features: single-task least squares is singular
  const std::vector<Method> methods{Method::SingleTask};
  const auto recs = run_replications(spec, methods, 2, BenchOptions{});
  REQUIRE(recs.size() == 2);
  for (const auto& r : recs) CHECK(r.failure.has_value());
  const auto rows = summarize(recs);
  CHECK(rows[0].failures == 2);
  CHECK(std::isnan(rows[0].mean));
}
