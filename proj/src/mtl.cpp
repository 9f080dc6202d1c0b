#include "repmtl/mtl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace repmtl {

namespace {

constexpr double kSnapTol = 1e-12;
constexpr int kMaxHalvings = 30;
constexpr int kAlignedDescentIters = 20;
constexpr double kStep2ChangeTol = 1e-9;
constexpr int kStep2MaxIter = 5000;

double penalty_scale(double lambda, const TaskData& d) {
  return lambda / std::sqrt(static_cast<double>(d.n()));
}

// Tangent projection of a Euclidean gradient onto the Stiefel manifold at `a`.
Eigen::MatrixXd stiefel_tangent(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g) {
  const Eigen::MatrixXd atg = a.transpose() * g;
  return g - a * (0.5 * (atg + atg.transpose()));
}

std::optional<OrthoBasis> retract(const Eigen::MatrixXd& a, const Eigen::MatrixXd& step) {
  try {
    return orthonormalize(a + step);
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct TaskState {
  OrthoBasis basis;
  Eigen::VectorXd theta;
  double loss;      // f_t(A theta)
  double distance;  // ||A A' - C C'||_2
};

// Works on one task against a fixed center. All methods return nullopt when a
// candidate cannot be evaluated (singular reduced design, overflow).
class TaskProblem {
 public:
  TaskProblem(const TaskData& data, const ModelFamily& family, double scale)
      : data_(data), family_(family), scale_(scale) {}

  double term(const TaskState& s) const { return s.loss + scale_ * s.distance; }

  std::optional<TaskState> evaluate(const OrthoBasis& basis, const OrthoBasis& center) const {
    try {
      Eigen::VectorXd theta = restricted_fit(family_, data_, basis);
      const double loss = loss_value(family_, data_, basis.matrix() * theta);
      const double dist = projector_distance_spectral(basis, center);
      return TaskState{basis, std::move(theta), loss, dist};
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::optional<TaskState> snap(const OrthoBasis& center) const {
    auto s = evaluate(center, center);
    if (s) s->distance = 0.0;
    return s;
  }

  // Riemannian subgradient steps from the current state; returns the best
  // iterate that strictly improves on `start`, if any.
  std::optional<TaskState> riemannian(const TaskState& start, const OrthoBasis& center,
                                      double& eta, int substeps) const {
    std::optional<TaskState> best;
    TaskState cur = start;
    const Eigen::MatrixXd cc = center.projector();
    for (int k = 0; k < substeps; ++k) {
      const Eigen::MatrixXd& a = cur.basis.matrix();
      Eigen::VectorXd grad_beta;
      try {
        grad_beta = loss_grad(family_, data_, a * cur.theta);
      } catch (const Error&) {
        break;
      }
      Eigen::MatrixXd g = grad_beta * cur.theta.transpose();
      const Eigen::MatrixXd sub = spectral_subgradient(a * a.transpose() - cc);
      g += scale_ * 2.0 * sub * a;
      const Eigen::MatrixXd xi = stiefel_tangent(a, g);
      if (xi.norm() < 1e-14) break;

      bool moved = false;
      double step = eta;
      for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
        auto next_basis = retract(a, -step * xi);
        if (!next_basis) continue;
        auto next = evaluate(*next_basis, center);
        if (next && term(*next) < term(cur)) {
          cur = std::move(*next);
          moved = true;
          eta = (h == 0) ? step * 1.5 : step;
          break;
        }
      }
      if (!moved) {
        eta = std::max(step, 1e-12);
        break;
      }
      best = cur;
    }
    return best;
  }

  // Exact per-task objective over beta for the aligned family of subspaces:
  // phi(beta) = f(beta) + scale * sin angle(beta, col C). The subspace closest
  // to C that contains beta attains this penalty, so descending phi and then
  // re-fitting theta on aligned_basis(beta) gives a valid candidate.
  std::optional<TaskState> aligned(std::span<const Eigen::VectorXd> starts,
                                   const OrthoBasis& center) const {
    const Eigen::MatrixXd& c = center.matrix();
    auto sine = [&](const Eigen::VectorXd& b) {
      const double nb = b.norm();
      if (nb == 0.0) return 0.0;
      return (b - c * (c.transpose() * b)).norm() / nb;
    };
    auto phi = [&](const Eigen::VectorXd& b) -> double {
      try {
        return loss_value(family_, data_, b) + scale_ * sine(b);
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };

    Eigen::VectorXd beta;
    double value = std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
      const double v = phi(s);
      if (v < value) {
        value = v;
        beta = s;
      }
    }
    if (!std::isfinite(value)) return std::nullopt;

    double step = 1.0;
    for (int it = 0; it < kAlignedDescentIters; ++it) {
      const double nb = beta.norm();
      if (nb == 0.0) break;
      const Eigen::VectorXd q = beta - c * (c.transpose() * beta);
      const double nq = q.norm();
      if (nq <= 1e-14 * nb) break;  // on the kink: the snap candidate covers it
      Eigen::VectorXd g = loss_grad(family_, data_, beta);
      g += scale_ * (q / (nq * nb) - (nq / (nb * nb * nb)) * beta);
      const double gg = g.squaredNorm();
      if (gg < 1e-28) break;
      bool moved = false;
      for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
        const Eigen::VectorXd trial = beta - step * g;
        const double v = phi(trial);
        if (v <= value - 1e-4 * step * gg) {
          beta = trial;
          value = v;
          moved = true;
          break;
        }
      }
      if (!moved) break;
      step *= 2.0;
    }
    return evaluate(aligned_basis(beta, center), center);
  }

  const TaskData& data() const { return data_; }

 private:
  const TaskData& data_;
  const ModelFamily& family_;
  double scale_;
};

double full_objective(std::span<const TaskState> states, std::span<const TaskProblem> problems) {
  double total = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) total += problems[t].term(states[t]);
  return total / static_cast<double>(states.size());
}

OrthoBasis initial_center(std::span<const Eigen::VectorXd> starts, Eigen::Index p,
                          Eigen::Index r) {
  Eigen::MatrixXd stacked(p, static_cast<Eigen::Index>(starts.size()));
  for (std::size_t t = 0; t < starts.size(); ++t) stacked.col(static_cast<Eigen::Index>(t)) = starts[t];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeFullU);
  Eigen::MatrixXd u = svd.matrixU().leftCols(r);
  canonicalize_column_signs(u);
  return orthonormalize(u);
}

}  // namespace

void MtlConfig::validate(Eigen::Index p) const {
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw InvalidArgument("lambda and gamma must be >= 0");
  if (r < 1 || r > p) throw InvalidArgument("r must satisfy 1 <= r <= p");
  if (max_outer_iters < 1) throw InvalidArgument("max_outer_iters must be positive");
  if (!(tol >= 0.0)) throw InvalidArgument("tol must be >= 0");
  if (!(riemannian_step > 0.0)) throw InvalidArgument("riemannian_step must be positive");
  if (riemannian_substeps < 0) throw InvalidArgument("riemannian_substeps must be >= 0");
}

double default_lambda(Eigen::Index r, Eigen::Index p, std::size_t num_tasks) {
  return std::sqrt(static_cast<double>(r) *
                   (static_cast<double>(p) + std::log(static_cast<double>(num_tasks))));
}

double default_gamma(Eigen::Index p, std::size_t num_tasks) {
  return 0.5 * std::sqrt(static_cast<double>(p) + std::log(static_cast<double>(num_tasks)));
}

double step1_objective(std::span<const TaskData> data, const ModelFamily& family,
                       std::span<const OrthoBasis> bases, std::span<const Eigen::VectorXd> thetas,
                       const OrthoBasis& center, double lambda) {
  if (data.empty()) throw InvalidArgument("step1_objective: no tasks");
  if (bases.size() != data.size() || thetas.size() != data.size()) {
    throw ShapeError("step1_objective: task, basis and theta counts differ");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    if (bases[t].r() != thetas[t].size()) throw ShapeError("step1_objective: theta length != r");
    total += loss_value(family, data[t], bases[t].matrix() * thetas[t]) +
             penalty_scale(lambda, data[t]) * projector_distance_spectral(bases[t], center);
  }
  return total / static_cast<double>(data.size());
}

namespace {

// Strict weak order on task contents: sample count, then responses, then the
// design, compared entry by entry.
bool content_less(const TaskData& a, const TaskData& b) {
  if (a.n() != b.n()) return a.n() < b.n();
  const auto& ya = a.Y();
  const auto& yb = b.Y();
  for (Eigen::Index i = 0; i < ya.size(); ++i)
    if (ya(i) != yb(i)) return ya(i) < yb(i);
  const double* xa = a.X().data();
  const double* xb = b.X().data();
  for (Eigen::Index i = 0; i < a.X().size(); ++i)
    if (xa[i] != xb[i]) return xa[i] < xb[i];
  return false;
}

Step1Result fit_step1_ordered(std::span<const TaskData> data, const ModelFamily& family,
                              const MtlConfig& config);

}  // namespace

Step1Result fit_step1(std::span<const TaskData> data, const ModelFamily& family,
                      const MtlConfig& config) {
  if (data.empty()) throw InvalidArgument("fit_step1: no tasks");
  for (const auto& d : data) {
    if (d.p() != data.front().p()) throw ShapeError("fit_step1: tasks disagree on p");
  }
  // Cross-task sums are evaluated in a content-defined order so that the
  // result does not depend on how the caller listed the tasks.
  std::vector<std::size_t> order(data.size());
  for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return content_less(data[a], data[b]); });
  if (std::is_sorted(order.begin(), order.end())) return fit_step1_ordered(data, family, config);

  std::vector<TaskData> sorted;
  sorted.reserve(data.size());
  for (std::size_t t : order) sorted.push_back(data[t]);
  Step1Result res = fit_step1_ordered(sorted, family, config);
  std::vector<std::optional<OrthoBasis>> bases(data.size());
  std::vector<Eigen::VectorXd> thetas(data.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    bases[order[k]] = std::move(res.bases[k]);
    thetas[order[k]] = std::move(res.thetas[k]);
  }
  res.bases.clear();
  for (auto& b : bases) res.bases.push_back(std::move(*b));
  res.thetas = std::move(thetas);
  return res;
}

namespace {

Step1Result fit_step1_ordered(std::span<const TaskData> data, const ModelFamily& family,
                              const MtlConfig& config) {
  const Eigen::Index p = data.front().p();
  for (const auto& d : data) {
    if (d.p() != p) throw ShapeError("fit_step1: tasks disagree on p");
  }
  config.validate(p);
  const std::size_t num_tasks = data.size();
  const Eigen::Index r = config.r;

  std::vector<TaskProblem> problems;
  problems.reserve(num_tasks);
  for (const auto& d : data) problems.emplace_back(d, family, penalty_scale(config.lambda, d));

  // Single-task estimates seed the center and the aligned candidates.
  std::vector<Eigen::VectorXd> single(num_tasks);
  std::vector<bool> has_single(num_tasks, false);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    try {
      single[t] = single_task_fit(family, data[t]);
      has_single[t] = true;
    } catch (const NonConvergence& e) {
      single[t] = e.last_iterate();
    } catch (const Error&) {
      single[t] = -loss_grad(family, data[t], Eigen::VectorXd::Zero(p));
    }
  }

  OrthoBasis center = initial_center(single, p, r);
  std::vector<TaskState> states;
  states.reserve(num_tasks);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    auto s = problems[t].snap(center);
    if (!s) throw RankDeficient("reduced design X C is singular for task " + std::to_string(t));
    states.push_back(std::move(*s));
  }

  std::vector<double> trace{full_objective(states, problems)};
  if (!std::isfinite(trace.back())) throw LossOverflow();

  std::vector<double> task_eta(num_tasks, config.riemannian_step);
  double center_eta = config.riemannian_step;
  bool converged = false;

  for (int round = 0; round < config.max_outer_iters; ++round) {
    // (a) per-task updates against the fixed center.
    for (std::size_t t = 0; t < num_tasks; ++t) {
      const TaskProblem& prob = problems[t];
      TaskState& cur = states[t];
      double best_term = prob.term(cur);
      std::optional<TaskState> best;
      auto consider = [&](std::optional<TaskState> cand) {
        if (cand && prob.term(*cand) < best_term) {
          best_term = prob.term(*cand);
          best = std::move(cand);
        }
      };
      consider(prob.snap(center));
      consider(prob.riemannian(cur, center, task_eta[t], config.riemannian_substeps));
      std::vector<Eigen::VectorXd> starts{cur.basis.matrix() * cur.theta};
      if (has_single[t]) starts.push_back(single[t]);
      consider(prob.aligned(starts, center));
      if (best) cur = std::move(*best);
    }
    const double after_tasks = full_objective(states, problems);

    // (b) center update, guarded by the full objective.
    double best_obj = after_tasks;
    std::optional<OrthoBasis> best_center;
    std::vector<TaskState> best_states;

    auto with_center = [&](const OrthoBasis& cand, bool drag_snapped)
        -> std::optional<std::vector<TaskState>> {
      std::vector<TaskState> next;
      next.reserve(num_tasks);
      for (std::size_t t = 0; t < num_tasks; ++t) {
        if (drag_snapped && states[t].distance <= kSnapTol) {
          auto s = problems[t].snap(cand);
          if (!s) return std::nullopt;
          next.push_back(std::move(*s));
        } else {
          TaskState s = states[t];
          s.distance = projector_distance_spectral(s.basis, cand);
          next.push_back(std::move(s));
        }
      }
      return next;
    };

    {
      std::vector<OrthoBasis> bases;
      bases.reserve(num_tasks);
      for (const auto& s : states) bases.push_back(s.basis);
      OrthoBasis mean = extrinsic_mean(bases).basis;
      if (auto next = with_center(mean, false)) {
        const double obj = full_objective(*next, problems);
        if (obj < best_obj) {
          best_obj = obj;
          best_center = std::move(mean);
          best_states = std::move(*next);
        }
      }
    }

    {
      // Snapped tasks move with the center; the others contribute the
      // penalty subgradient only.
      const Eigen::MatrixXd& c = center.matrix();
      const Eigen::MatrixXd cc = center.projector();
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, r);
      for (std::size_t t = 0; t < num_tasks; ++t) {
        const TaskState& s = states[t];
        if (s.distance <= kSnapTol) {
          g += loss_grad(family, data[t], c * s.theta) * s.theta.transpose();
        } else {
          const Eigen::MatrixXd& a = s.basis.matrix();
          g -= penalty_scale(config.lambda, data[t]) * 2.0 *
               spectral_subgradient(a * a.transpose() - cc) * c;
        }
      }
      const Eigen::MatrixXd xi = stiefel_tangent(c, g);
      if (xi.norm() > 1e-14) {
        double step = center_eta;
        for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
          auto cand = retract(c, -step * xi);
          if (!cand) continue;
          auto next = with_center(*cand, true);
          if (!next) continue;
          const double obj = full_objective(*next, problems);
          if (obj < after_tasks) {
            center_eta = (h == 0) ? step * 2.0 : step;
            if (obj < best_obj) {
              best_obj = obj;
              best_center = std::move(*cand);
              best_states = std::move(*next);
            }
            break;
          }
        }
      }
    }

    if (best_center) {
      center = std::move(*best_center);
      states = std::move(best_states);
    }

    const double obj = full_objective(states, problems);
    if (!std::isfinite(obj)) throw LossOverflow();
    const double prev = trace.back();
    trace.push_back(obj);
    const double rel = (prev - obj) / std::max(std::abs(prev), 1e-300);
    if (rel < config.tol) {
      converged = true;
      break;
    }
  }

  Step1Result out{{}, {}, center, std::move(trace), converged};
  out.bases.reserve(num_tasks);
  out.thetas.reserve(num_tasks);
  for (auto& s : states) {
    out.bases.push_back(std::move(s.basis));
    out.thetas.push_back(std::move(s.theta));
  }
  return out;
}

}  // namespace

Eigen::VectorXd prox_l2(const Eigen::VectorXd& v, double tau) {
  if (!(tau >= 0.0)) throw InvalidArgument("prox_l2: tau must be >= 0");
  const double nv = v.norm();
  if (nv <= tau) return Eigen::VectorXd::Zero(v.size());
  return (1.0 - tau / nv) * v;
}

namespace {

double power_iteration_lambda_max(const Eigen::MatrixXd& s) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(s.rows()) / std::sqrt(static_cast<double>(s.rows()));
  double est = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd w = s * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    if (std::abs(nw - est) <= 1e-12 * nw) return nw;
    est = nw;
  }
  return est;
}

}  // namespace

Eigen::VectorXd fit_step2(const TaskData& data, const ModelFamily& family, double gamma,
                          const Eigen::VectorXd& anchor) {
  if (!(gamma >= 0.0)) throw InvalidArgument("fit_step2: gamma must be >= 0");
  if (anchor.size() != data.p()) throw ShapeError("fit_step2: anchor length != p");

  const double weight = gamma / std::sqrt(static_cast<double>(data.n()));
  auto smooth = [&](const Eigen::VectorXd& w) { return loss_value(family, data, w + anchor); };
  auto grad = [&](const Eigen::VectorXd& w) { return loss_grad(family, data, w + anchor); };
  auto objective = [&](const Eigen::VectorXd& w) { return smooth(w) + weight * w.norm(); };

  double lipschitz =
      power_iteration_lambda_max(empirical_covariance(data)) * family.curvature_bound();
  if (!(lipschitz > 0.0)) lipschitz = 1.0;

  const Eigen::Index p = data.p();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd y = w;
  double momentum = 1.0;
  double f_w = objective(w);

  for (int it = 0; it < kStep2MaxIter; ++it) {
    const double f_y = smooth(y);
    const Eigen::VectorXd g_y = grad(y);
    Eigen::VectorXd next;
    // Backtracking guards against an underestimated curvature bound.
    for (int h = 0; h < 60; ++h) {
      const double step = 1.0 / lipschitz;
      next = prox_l2(y - step * g_y, step * weight);
      const Eigen::VectorXd diff = next - y;
      if (smooth(next) <= f_y + g_y.dot(diff) + 0.5 * lipschitz * diff.squaredNorm() + 1e-15) break;
      lipschitz *= 2.0;
    }
    const double f_next = objective(next);
    if (f_next > f_w && momentum > 1.0) {
      // Monotone restart: drop momentum and take a plain proximal step from w.
      // Plain steps are always accepted; below sqrt(eps) the objective cannot
      // resolve their decrease.
      momentum = 1.0;
      y = w;
      continue;
    }
    const double change = (next - w).norm();
    const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    y = next + ((momentum - 1.0) / m_next) * (next - w);
    momentum = m_next;
    w = std::move(next);
    f_w = f_next;
    if (change <= kStep2ChangeTol) return w + anchor;
  }
  throw NonConvergence("Step-2 proximal gradient did not converge", w + anchor,
                       std::numeric_limits<double>::quiet_NaN());
}

MtlFit rl_mtl(std::span<const TaskData> data, const ModelFamily& family, const MtlConfig& config) {
  Step1Result s1 = fit_step1(data, family, config);
  MtlFit fit{std::move(s1.bases), std::move(s1.thetas), std::move(s1.center), {}, {},
             std::move(s1.objective_trace), s1.converged};
  fit.step1_beta.reserve(data.size());
  fit.beta.reserve(data.size());
  for (std::size_t t = 0; t < data.size(); ++t) {
    fit.step1_beta.push_back(fit.per_task_basis[t].matrix() * fit.per_task_theta[t]);
    fit.beta.push_back(fit_step2(data[t], family, config.gamma, fit.step1_beta[t]));
  }
  return fit;
}

}  // namespace repmtl
