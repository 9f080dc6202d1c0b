#include "repmtl/simbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <utility>

namespace repmtl {

void SimSpec::validate() const {
  if (T < 1 || n < 1 || p < 1 || r < 1) throw InvalidArgument("T, n, p, r must be positive");
  if (r > p) throw InvalidArgument("r must not exceed p");
  if (!(h >= 0.0)) throw InvalidArgument("h must be >= 0");
  if (!(noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be >= 0");
  if (theta_stars.size() != T) throw InvalidArgument("theta_stars must have one entry per task");
  for (std::size_t t = 0; t < T; ++t) {
    if (!is_outlier(t) && theta_stars[t].size() != r) {
      throw InvalidArgument("theta_stars[" + std::to_string(t) + "] must have length r");
    }
  }
  for (const auto& o : outlier_tasks) {
    if (o.index >= T) throw InvalidArgument("outlier task index out of range");
    if (!(o.low < o.high)) throw InvalidArgument("outlier range needs low < high");
  }
}

bool SimSpec::is_outlier(std::size_t t) const {
  return std::any_of(outlier_tasks.begin(), outlier_tasks.end(),
                     [t](const OutlierTask& o) { return o.index == t; });
}

std::vector<Eigen::VectorXd> reference_theta_stars() {
  auto v = [](double a, double b, double c) { return Eigen::Vector3d(a, b, c).eval(); };
  return {v(1, 0.5, 0), v(1, -1, 1), v(1.5, 1.5, 0), v(1, 1, 0), v(1, 0, 1), v(-1, -1, -1)};
}

SimSpec reference_spec(double h, std::uint64_t seed) {
  SimSpec s;
  s.h = h;
  s.theta_stars = reference_theta_stars();
  s.master_seed = seed;
  return s;
}

SimSpec reference_outlier_spec(double h, std::uint64_t seed) {
  SimSpec s = reference_spec(h, seed);
  s.T = 7;
  s.theta_stars.push_back(Eigen::VectorXd::Zero(s.r));
  s.outlier_tasks.push_back(OutlierTask{6, -1.0, 1.0});
  return s;
}

SimDataset generate(const SimSpec& spec) {
  spec.validate();
  Rng shared(spec.master_seed);
  OrthoBasis center = random_orthobasis(shared, spec.p, spec.r);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> signs(spec.T);
  for (auto& s : signs) s = coin(shared) ? 1.0 : -1.0;

  Eigen::MatrixXd shift = Eigen::MatrixXd::Zero(spec.p, spec.r);
  shift.topRows(spec.r) = Eigen::MatrixXd::Identity(spec.r, spec.r);

  SimDataset out{{}, SimTruth{center, {}, {}, {}, {}}};
  SimTruth& truth = out.truth;
  out.tasks.reserve(spec.T);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t t = 0; t < spec.T; ++t) {
    Rng rng(spec.master_seed + t + 1);
    Eigen::MatrixXd rep = center.matrix() + spec.h * signs[t] * shift;
    Eigen::VectorXd beta;
    if (spec.is_outlier(t)) {
      const auto& o = *std::find_if(spec.outlier_tasks.begin(), spec.outlier_tasks.end(),
                                    [t](const OutlierTask& x) { return x.index == t; });
      std::uniform_real_distribution<double> unif(o.low, o.high);
      beta.resize(spec.p);
      for (Eigen::Index j = 0; j < spec.p; ++j) beta(j) = unif(rng);
      truth.effective_distance.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      beta = rep * spec.theta_stars[t];
      truth.inlier_set.push_back(t);
      double dist = std::numeric_limits<double>::quiet_NaN();
      try {
        dist = projector_distance_spectral(orthonormalize(rep), center);
      } catch (const RankDeficient&) {
      }
      truth.effective_distance.push_back(dist);
    }
    Eigen::MatrixXd x(spec.n, spec.p);
    for (Eigen::Index i = 0; i < spec.n; ++i)
      for (Eigen::Index j = 0; j < spec.p; ++j) x(i, j) = normal(rng);
    Eigen::VectorXd y = x * beta;
    if (spec.noise_sd > 0.0) {
      for (Eigen::Index i = 0; i < spec.n; ++i) y(i) += spec.noise_sd * normal(rng);
    }
    truth.task_reps.push_back(std::move(rep));
    truth.beta_stars.push_back(std::move(beta));
    out.tasks.emplace_back(std::move(x), std::move(y));
  }
  return out;
}

std::vector<Eigen::VectorXd> baseline_naive_shared(std::span<const TaskData> data,
                                                   const ModelFamily& family, Eigen::Index r) {
  constexpr int kMaxRounds = 200;
  constexpr double kTol = 1e-7;
  if (data.empty()) throw InvalidArgument("baseline_naive_shared: no tasks");
  const Eigen::Index p = data.front().p();
  for (const auto& d : data) {
    if (d.p() != p) throw ShapeError("baseline_naive_shared: tasks disagree on p");
  }
  if (r < 1 || r > p) throw InvalidArgument("baseline_naive_shared: need 1 <= r <= p");
  const auto num_tasks = static_cast<Eigen::Index>(data.size());

  Eigen::MatrixXd stacked(p, num_tasks);
  for (Eigen::Index t = 0; t < num_tasks; ++t) {
    const TaskData& d = data[static_cast<std::size_t>(t)];
    try {
      stacked.col(t) = single_task_fit(family, d);
    } catch (const NonConvergence& e) {
      stacked.col(t) = e.last_iterate();
    } catch (const Error&) {
      stacked.col(t) = -loss_grad(family, d, Eigen::VectorXd::Zero(p));
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullU);
  Eigen::MatrixXd init = svd.matrixU().leftCols(r);
  canonicalize_column_signs(init);
  OrthoBasis basis = orthonormalize(init);

  auto solve = [&](const OrthoBasis& a, std::vector<Eigen::VectorXd>& thetas) {
    double total = 0.0;
    thetas.resize(data.size());
    for (std::size_t t = 0; t < data.size(); ++t) {
      thetas[t] = restricted_fit(family, data[t], a);
      total += loss_value(family, data[t], a.matrix() * thetas[t]);
    }
    return total / static_cast<double>(data.size());
  };

  std::vector<Eigen::VectorXd> thetas;
  double obj = solve(basis, thetas);
  if (!std::isfinite(obj)) throw LossOverflow();
  double eta = 0.1;
  for (int round = 0; round < kMaxRounds; ++round) {
    const Eigen::MatrixXd& a = basis.matrix();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, r);
    for (std::size_t t = 0; t < data.size(); ++t)
      g += loss_grad(family, data[t], a * thetas[t]) * thetas[t].transpose();
    const Eigen::MatrixXd atg = a.transpose() * g;
    const Eigen::MatrixXd xi = g - a * (0.5 * (atg + atg.transpose()));
    if (xi.norm() < 1e-14) break;

    bool moved = false;
    double step = eta;
    for (int h = 0; h < 30; ++h, step *= 0.5) {
      std::vector<Eigen::VectorXd> cand_thetas;
      try {
        OrthoBasis cand = orthonormalize(a - step * xi);
        const double cand_obj = solve(cand, cand_thetas);
        if (cand_obj < obj) {
          const double rel = (obj - cand_obj) / std::max(std::abs(obj), 1e-300);
          basis = std::move(cand);
          thetas = std::move(cand_thetas);
          obj = cand_obj;
          eta = (h == 0) ? step * 2.0 : step;
          moved = true;
          if (rel < kTol) round = kMaxRounds;
          break;
        }
      } catch (const Error&) {
      }
    }
    if (!moved) break;
  }
  if (!std::isfinite(obj)) throw LossOverflow();

  std::vector<Eigen::VectorXd> fits;
  fits.reserve(data.size());
  for (const auto& th : thetas) fits.push_back(basis.matrix() * th);
  return fits;
}

std::string to_string(Subset s) {
  switch (s) {
    case Subset::Inliers:
      return "inliers";
    case Subset::Outliers:
      return "outliers";
    case Subset::All:
      return "all";
  }
  return "?";
}

double max_error(std::span<const Eigen::VectorXd> fits, const SimTruth& truth, Subset subset) {
  if (fits.size() != truth.beta_stars.size()) throw ShapeError("max_error: length mismatch");
  std::vector<bool> inlier(fits.size(), false);
  for (auto t : truth.inlier_set) inlier.at(t) = true;
  double worst = -1.0;
  for (std::size_t t = 0; t < fits.size(); ++t) {
    const bool take = subset == Subset::All || (subset == Subset::Inliers) == inlier[t];
    if (!take) continue;
    worst = std::max(worst, (fits[t] - truth.beta_stars[t]).norm());
  }
  if (worst < 0.0) throw InvalidArgument("max_error: empty subset");
  return worst;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::RlMtlOracle:
      return "rl_mtl_oracle";
    case Method::RlMtlAdaptive:
      return "rl_mtl_adaptive";
    case Method::RlMtlNaive:
      return "rl_mtl_naive";
    case Method::SingleTask:
      return "single_task";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods()) {
    if (to_string(m) == s) return m;
  }
  throw InvalidArgument("unknown method '" + s + "'");
}

std::vector<Method> all_methods() {
  return {Method::RlMtlOracle, Method::RlMtlAdaptive, Method::RlMtlNaive, Method::SingleTask};
}

namespace {

MtlConfig mtl_config_for(const BenchOptions& opt, Eigen::Index r, Eigen::Index p,
                         std::size_t num_tasks) {
  MtlConfig cfg = opt.mtl;
  cfg.r = r;
  cfg.lambda = opt.lambda.value_or(default_lambda(r, p, num_tasks));
  cfg.gamma = opt.gamma.value_or(default_gamma(p, num_tasks));
  return cfg;
}

ReplicationRecord run_method(Method method, const SimSpec& spec, const SimDataset& ds,
                             const BenchOptions& opt, const ModelFamily& family,
                             std::size_t rep) {
  ReplicationRecord rec{method, spec.h, rep, 0.0, std::nullopt, std::nullopt, std::nullopt};
  try {
    std::vector<Eigen::VectorXd> fits;
    switch (method) {
      case Method::RlMtlOracle:
        fits = rl_mtl(ds.tasks, family, mtl_config_for(opt, spec.r, spec.p, spec.T)).beta;
        break;
      case Method::RlMtlAdaptive: {
        const Eigen::Index r_hat =
            estimate_r(ds.tasks, family, opt.rank, static_cast<double>(spec.n));
        rec.r_hat = r_hat;
        fits = rl_mtl(ds.tasks, family, mtl_config_for(opt, r_hat, spec.p, spec.T)).beta;
        break;
      }
      case Method::RlMtlNaive:
        fits = baseline_naive_shared(ds.tasks, family, spec.r);
        break;
      case Method::SingleTask:
        for (const auto& d : ds.tasks) fits.push_back(single_task_fit(family, d));
        break;
    }
    rec.inlier_error = max_error(fits, ds.truth, Subset::Inliers);
    if (!spec.outlier_tasks.empty()) rec.outlier_error = max_error(fits, ds.truth, Subset::Outliers);
  } catch (const std::exception& e) {
    rec.inlier_error = std::numeric_limits<double>::quiet_NaN();
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace

std::vector<ReplicationRecord> run_replications(const SimSpec& spec, std::span<const Method> methods,
                                                std::size_t reps, const BenchOptions& options) {
  if (reps < 1) throw InvalidArgument("run_replications: reps must be >= 1");
  spec.validate();
  const ModelFamily family = ModelFamily::from_name(options.family);

  std::vector<std::vector<ReplicationRecord>> slots(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < reps; k = next++) {
      SimSpec rs = spec;
      rs.master_seed = spec.master_seed + 10000ULL * k;
      std::vector<ReplicationRecord> recs;
      recs.reserve(methods.size());
      try {
        const SimDataset ds = generate(rs);
        for (Method m : methods) recs.push_back(run_method(m, spec, ds, options, family, k));
      } catch (const std::exception& e) {
        recs.clear();
        for (Method m : methods) {
          recs.push_back(ReplicationRecord{m, spec.h, k, std::numeric_limits<double>::quiet_NaN(),
                                           std::nullopt, std::nullopt, std::string(e.what())});
        }
      }
      slots[k] = std::move(recs);
    }
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  std::vector<ReplicationRecord> out;
  out.reserve(reps * methods.size());
  for (auto& s : slots)
    for (auto& rec : s) out.push_back(std::move(rec));
  return out;
}

std::vector<SummaryRow> summarize(std::span<const ReplicationRecord> records) {
  struct Acc {
    std::vector<double> inlier, outlier;
    std::size_t failures = 0;
  };
  std::vector<std::pair<Method, double>> order;
  std::map<std::pair<int, double>, Acc> acc;
  for (const auto& rec : records) {
    const auto key = std::make_pair(static_cast<int>(rec.method), rec.h);
    if (!acc.contains(key)) order.emplace_back(rec.method, rec.h);
    Acc& a = acc[key];
    if (rec.failure) {
      ++a.failures;
      continue;
    }
    a.inlier.push_back(rec.inlier_error);
    if (rec.outlier_error) a.outlier.push_back(*rec.outlier_error);
  }

  auto stats = [](const std::vector<double>& v) {
    if (v.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return std::make_pair(nan, nan);
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return std::make_pair(mean, sd);
  };

  std::vector<SummaryRow> rows;
  for (const auto& [method, h] : order) {
    const Acc& a = acc.at(std::make_pair(static_cast<int>(method), h));
    for (Subset s : {Subset::Inliers, Subset::Outliers}) {
      const auto& v = s == Subset::Inliers ? a.inlier : a.outlier;
      const auto [mean, sd] = stats(v);
      rows.push_back(SummaryRow{method, h, s, mean, sd, v.size(), a.failures});
    }
  }
  return rows;
}

}  // namespace repmtl
