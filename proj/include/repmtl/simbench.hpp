#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repmtl/losses.hpp"
#include "repmtl/mtl.hpp"
#include "repmtl/rank.hpp"
#include "repmtl/stiefel.hpp"

namespace repmtl {

/// An outlier task whose coefficients are drawn i.i.d. Unif(low, high).
struct OutlierTask {
  std::size_t index = 0;  ///< 0-based task index
  double low = -1.0;
  double high = 1.0;
};

/// Generative description of one simulated multi-task problem.
struct SimSpec {
  std::size_t T = 6;
  Eigen::Index n = 100;
  Eigen::Index p = 20;
  Eigen::Index r = 3;
  double h = 0.0;
  std::vector<Eigen::VectorXd> theta_stars;  ///< one r-vector per task; ignored for outliers
  std::vector<OutlierTask> outlier_tasks;
  double noise_sd = 1.0;
  std::uint64_t master_seed = 0;

  void validate() const;
  bool is_outlier(std::size_t t) const;
};

/// The six low-dimensional parameters of the reference experiment.
std::vector<Eigen::VectorXd> reference_theta_stars();

/// T = 6, n = 100, p = 20, r = 3, no outliers.
SimSpec reference_spec(double h, std::uint64_t seed);

/// reference_spec plus a seventh task with Unif(-1, 1) coefficients.
SimSpec reference_outlier_spec(double h, std::uint64_t seed);

struct SimTruth {
  OrthoBasis center_star;
  std::vector<Eigen::MatrixXd> task_reps;  ///< center + h a_t (I_r; 0); not orthonormal for h > 0
  std::vector<Eigen::VectorXd> beta_stars;
  std::vector<std::size_t> inlier_set;
  /// Spectral projector distance between the orthonormalized task
  /// representation and the center; NaN for outlier tasks.
  std::vector<double> effective_distance;
};

struct SimDataset {
  std::vector<TaskData> tasks;
  SimTruth truth;
};

/// Deterministic in master_seed. The shared structure (center, Rademacher
/// signs) comes from a generator seeded with master_seed; task t (0-based)
/// draws its outlier coefficients, design and noise from master_seed + t + 1.
SimDataset generate(const SimSpec& spec);

/// Shared-representation ERM: min over one A and per-task theta of
/// sum_t f_t(A theta_t), by alternating exact theta refits with objective-
/// guarded Riemannian gradient steps on A. Returns A theta_t per task.
std::vector<Eigen::VectorXd> baseline_naive_shared(std::span<const TaskData> data,
                                                   const ModelFamily& family, Eigen::Index r);

enum class Subset { Inliers, Outliers, All };

std::string to_string(Subset s);

/// max over the chosen tasks of ||fit_t - beta*_t||_2. Throws on an empty subset.
double max_error(std::span<const Eigen::VectorXd> fits, const SimTruth& truth, Subset subset);

enum class Method { RlMtlOracle, RlMtlAdaptive, RlMtlNaive, SingleTask };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::vector<Method> all_methods();

/// Estimation settings shared by every replication. Unset lambda/gamma mean
/// the defaults for the r in use and the task count.
struct BenchOptions {
  std::optional<double> lambda;
  std::optional<double> gamma;
  MtlConfig mtl;  ///< iteration controls; lambda/gamma/r fields are overwritten
  RankConfig rank;
  std::string family = "linear";
  unsigned threads = 1;
};

struct ReplicationRecord {
  Method method;
  double h = 0.0;
  std::size_t rep = 0;
  double inlier_error = 0.0;
  std::optional<double> outlier_error;  ///< set when the SimSpec has outlier tasks
  std::optional<Eigen::Index> r_hat;  ///< RlMtlAdaptive only
  std::optional<std::string> failure;  ///< set when the method threw
};

/// Runs `reps` replications of `spec` (replication k uses master_seed +
/// 10000 k) for every method. Failures are recorded per record. Output is
/// ordered by (rep, method order) independent of the thread count.
std::vector<ReplicationRecord> run_replications(const SimSpec& spec, std::span<const Method> methods,
                                                std::size_t reps, const BenchOptions& options);

struct SummaryRow {
  Method method;
  double h = 0.0;
  Subset subset = Subset::Inliers;
  double mean = 0.0;  ///< NaN when no successful replication has this subset
  double sd = 0.0;    ///< sample standard deviation; 0 for a single replication
  std::size_t count = 0;
  std::size_t failures = 0;
};

/// One Inliers and one Outliers row per (method, h), in order of first appearance.
std::vector<SummaryRow> summarize(std::span<const ReplicationRecord> records);

}  // namespace repmtl
