#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "repmtl/errors.hpp"
#include "repmtl/losses.hpp"
#include "repmtl/mtl.hpp"
#include "repmtl/rank.hpp"
#include "repmtl/simbench.hpp"
#include "repmtl/stiefel.hpp"
#include "repmtl/tl.hpp"

namespace py = pybind11;
using namespace repmtl;

namespace {

using Task = std::pair<Eigen::MatrixXd, Eigen::VectorXd>;

std::vector<TaskData> to_tasks(const std::vector<Task>& tasks) {
  std::vector<TaskData> out;
  out.reserve(tasks.size());
  for (const auto& [x, y] : tasks) out.emplace_back(x, y);
  return out;
}

std::vector<OrthoBasis> to_bases(const std::vector<Eigen::MatrixXd>& ms) {
  std::vector<OrthoBasis> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.emplace_back(m);
  return out;
}

std::vector<Eigen::MatrixXd> matrices(const std::vector<OrthoBasis>& bs) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(bs.size());
  for (const auto& b : bs) out.push_back(b.matrix());
  return out;
}

RankConfig rank_config(double t1, double t2, double radius, std::optional<double> r_bar,
                       std::optional<double> n0) {
  RankConfig rc;
  rc.threshold_t1 = t1;
  rc.threshold_t2 = t2;
  rc.radius = radius;
  rc.r_bar = r_bar;
  if (n0) {
    rc.mode = RankMode::Tl;
    rc.n0 = n0;
  }
  return rc;
}

double smallest_n(const std::vector<TaskData>& tasks) {
  if (tasks.empty()) throw InvalidArgument("no tasks");
  Eigen::Index n = tasks.front().n();
  for (const auto& t : tasks) n = std::min(n, t.n());
  return double(n);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Penalized shared-representation multi-task and transfer learning";

  auto base = py::register_exception<Error>(m, "Error", PyExc_ValueError);
  py::register_exception<NoRankDetected>(m, "NoRankDetected", base.ptr());
  py::register_exception<RankDeficient>(m, "RankDeficient", base.ptr());
  py::register_exception<NonConvergence>(m, "NonConvergence", base.ptr());

  m.def("orthonormalize", [](const Eigen::MatrixXd& a) { return orthonormalize(a).matrix(); },
        py::arg("a"), "QR factor with a non-negative triangular diagonal.");
  m.def(
      "projector_distance_spectral",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return projector_distance_spectral(OrthoBasis(a), OrthoBasis(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "projector_distance_frobenius",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        return projector_distance_frobenius(OrthoBasis(a), OrthoBasis(b));
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "procrustes_align",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        const auto res = procrustes_align(OrthoBasis(a), OrthoBasis(b));
        return py::make_tuple(res.rotation, res.residual);
      },
      py::arg("a"), py::arg("b"), "Returns (R, ||A - B R||_F).");
  m.def(
      "extrinsic_mean",
      [](const std::vector<Eigen::MatrixXd>& bases) {
        const auto res = extrinsic_mean(to_bases(bases));
        return py::make_tuple(res.basis.matrix(), res.degenerate);
      },
      py::arg("bases"), "Returns (mean basis, degenerate flag).");

  m.def(
      "single_task_fit",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::string& family) {
        return single_task_fit(ModelFamily::from_name(family), TaskData(x, y));
      },
      py::arg("X"), py::arg("y"), py::arg("family") = "linear");
  m.def(
      "restricted_fit",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& basis,
         const std::string& family) {
        return restricted_fit(ModelFamily::from_name(family), TaskData(x, y), OrthoBasis(basis));
      },
      py::arg("X"), py::arg("y"), py::arg("basis"), py::arg("family") = "linear");
  m.def(
      "loss",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
         const std::string& family) {
        return loss_value(ModelFamily::from_name(family), TaskData(x, y), beta);
      },
      py::arg("X"), py::arg("y"), py::arg("beta"), py::arg("family") = "linear");
  m.def("prox_l2", &prox_l2, py::arg("v"), py::arg("tau"));
  m.def("default_lambda", &default_lambda, py::arg("r"), py::arg("p"), py::arg("num_tasks"));
  m.def("default_gamma", &default_gamma, py::arg("p"), py::arg("num_tasks"));

  m.def(
      "rl_mtl",
      [](const std::vector<Task>& tasks, Eigen::Index r, std::optional<double> lambda_,
         std::optional<double> gamma, const std::string& family, int max_outer_iters, double tol) {
        const auto data = to_tasks(tasks);
        if (data.empty()) throw InvalidArgument("no tasks");
        const Eigen::Index p = data.front().p();
        MtlConfig cfg;
        cfg.r = r;
        cfg.lambda = lambda_.value_or(default_lambda(r, p, data.size()));
        cfg.gamma = gamma.value_or(default_gamma(p, data.size()));
        cfg.max_outer_iters = max_outer_iters;
        cfg.tol = tol;
        const MtlFit fit = [&] {
          py::gil_scoped_release release;
          return rl_mtl(data, ModelFamily::from_name(family), cfg);
        }();
        py::dict out;
        out["center"] = fit.center.matrix();
        out["bases"] = matrices(fit.per_task_basis);
        out["thetas"] = fit.per_task_theta;
        out["step1_beta"] = fit.step1_beta;
        out["beta"] = fit.beta;
        out["objective_trace"] = fit.objective_trace;
        out["converged"] = fit.converged;
        out["lambda"] = cfg.lambda;
        out["gamma"] = cfg.gamma;
        return out;
      },
      py::arg("tasks"), py::arg("r"), py::arg("lambda_") = py::none(), py::arg("gamma") = py::none(),
      py::arg("family") = "linear", py::arg("max_outer_iters") = 200, py::arg("tol") = 1e-7,
      "Fit every task given as an (X, y) pair. Unset penalties use the defaults.");

  m.def(
      "rl_tl",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::MatrixXd& center,
         double gamma, const std::string& family) {
        const TlFit fit = rl_tl(TaskData(x, y), ModelFamily::from_name(family), OrthoBasis(center), gamma);
        py::dict out;
        out["theta0"] = fit.theta0;
        out["step1_beta0"] = fit.step1_beta0;
        out["beta0"] = fit.beta0;
        return out;
      },
      py::arg("X"), py::arg("y"), py::arg("center"), py::arg("gamma"), py::arg("family") = "linear");

  m.def(
      "rank_profile",
      [](const std::vector<Task>& tasks, const std::string& family, double t1, double t2,
         double radius, std::optional<double> r_bar, std::optional<double> n0) {
        const auto data = to_tasks(tasks);
        const RankProfile prof = rank_profile(data, ModelFamily::from_name(family),
                                              rank_config(t1, t2, radius, r_bar, n0), smallest_n(data));
        py::dict out;
        out["singular_values"] = prof.singular_values;
        out["threshold"] = prof.threshold;
        out["r_hat"] = prof.r_hat ? py::object(py::int_(*prof.r_hat)) : py::object(py::none());
        return out;
      },
      py::arg("tasks"), py::arg("family") = "linear", py::arg("t1") = 1.0, py::arg("t2") = 0.05,
      py::arg("radius") = 5.0, py::arg("r_bar") = py::none(), py::arg("n0") = py::none());
  m.def(
      "estimate_r",
      [](const std::vector<Task>& tasks, const std::string& family, double t1, double t2,
         double radius, std::optional<double> r_bar, std::optional<double> n0) {
        const auto data = to_tasks(tasks);
        return estimate_r(data, ModelFamily::from_name(family), rank_config(t1, t2, radius, r_bar, n0),
                          smallest_n(data));
      },
      py::arg("tasks"), py::arg("family") = "linear", py::arg("t1") = 1.0, py::arg("t2") = 0.05,
      py::arg("radius") = 5.0, py::arg("r_bar") = py::none(), py::arg("n0") = py::none());

  m.def(
      "simulate",
      [](double h, std::uint64_t seed, bool outlier, std::optional<double> noise_sd) {
        SimSpec spec = outlier ? reference_outlier_spec(h, seed) : reference_spec(h, seed);
        if (noise_sd) spec.noise_sd = *noise_sd;
        const SimDataset ds = generate(spec);
        py::list tasks;
        for (const auto& t : ds.tasks) tasks.append(py::make_tuple(t.X(), t.Y()));
        py::dict out;
        out["tasks"] = tasks;
        out["center"] = ds.truth.center_star.matrix();
        out["beta_stars"] = ds.truth.beta_stars;
        out["inliers"] = ds.truth.inlier_set;
        return out;
      },
      py::arg("h"), py::arg("seed"), py::arg("outlier") = false, py::arg("noise_sd") = py::none(),
      "Reference design: T = 6, n = 100, p = 20, r = 3, plus a seventh outlier task if requested.");
}
