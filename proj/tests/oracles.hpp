// Independent reference implementations used only by the tests. None of
// these call into the library's solvers.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

inline Eigen::VectorXd gaussian_vec(Rng& rng, Eigen::Index n) { return gaussian(rng, n, 1).col(0); }

// Modified Gram-Schmidt, column by column.
inline Eigen::MatrixXd gram_schmidt(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd q = m;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      double dot = 0.0;
      for (Eigen::Index i = 0; i < q.rows(); ++i) dot += q(i, k) * q(i, j);
      for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, j) -= dot * q(i, k);
    }
    double nrm = 0.0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) nrm += q(i, j) * q(i, j);
    nrm = std::sqrt(nrm);
    for (Eigen::Index i = 0; i < q.rows(); ++i) q(i, j) /= nrm;
  }
  return q;
}

// Plain loop norm, deliberately not Eigen's.
inline double l2(const Eigen::VectorXd& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v(i) * v(i);
  return std::sqrt(s);
}

// Largest |eigenvalue| of a symmetric matrix by power iteration on M^2.
inline double spectral_norm_sym(const Eigen::MatrixXd& m, int iters = 2000) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()) / std::sqrt(double(m.rows()));
  v(0) += 0.3;  // avoid starting orthogonal to the top direction by symmetry
  const Eigen::MatrixXd m2 = m * m;
  double est = 0.0;
  for (int k = 0; k < iters; ++k) {
    Eigen::VectorXd w = m2 * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    est = std::sqrt(nw);
  }
  return est;
}

// Grid scan to bracket, then golden-section refinement.
inline double golden_section(const std::function<double(double)>& f, double lo, double hi,
                             int grid = 2001, double tol = 1e-12) {
  double best_x = lo;
  double best_f = std::numeric_limits<double>::infinity();
  const double step = (hi - lo) / (grid - 1);
  for (int i = 0; i < grid; ++i) {
    const double x = lo + step * i;
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  double a = best_x - step;
  double b = best_x + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Nelder-Mead simplex with standard coefficients.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x0, double scale, int max_evals = 20000,
                                   double ftol = 1e-15) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) pts[i + 1](i) += scale;
  for (Eigen::Index i = 0; i <= n; ++i) vals[i] = f(pts[i]);
  int evals = static_cast<int>(n + 1);
  std::vector<Eigen::Index> idx(n + 1);
  while (evals < max_evals) {
    for (Eigen::Index i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const auto best = idx.front(), worst = idx.back(), second = idx[n - 1];
    if (std::abs(vals[worst] - vals[best]) <= ftol * (1.0 + std::abs(vals[best]))) {
      double spread = 0.0;
      for (Eigen::Index i = 0; i <= n; ++i) spread = std::max(spread, (pts[i] - pts[best]).norm());
      if (spread < 1e-12) break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= double(n);
    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    ++evals;
    if (fr < vals[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = f(xc);
      ++evals;
      if (fc < (outside ? fr : vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (Eigen::Index i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          vals[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i <= n; ++i)
    if (vals[i] < vals[arg]) arg = i;
  return pts[arg];
}

// Nelder-Mead from several starts, each followed by restarts at the incumbent
// with a shrinking simplex.
inline Eigen::VectorXd nelder_mead_restarts(const std::function<double(const Eigen::VectorXd&)>& f,
                                            const std::vector<Eigen::VectorXd>& starts,
                                            double scale, int restarts = 10) {
  Eigen::VectorXd best = starts.front();
  double fbest = f(best);
  for (const auto& s : starts) {
    Eigen::VectorXd x = s;
    double sc = scale;
    for (int k = 0; k < restarts; ++k) {
      x = nelder_mead(f, x, sc);
      sc = std::max(sc * 0.3, 1e-6);
    }
    if (f(x) < fbest) {
      fbest = f(x);
      best = x;
    }
  }
  return best;
}

// Central differences with step 1e-6 (1 + |x_j|).
inline Eigen::VectorXd fd_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x(j)));
    Eigen::VectorXd a = x, b = x;
    a(j) += h;
    b(j) -= h;
    g(j) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace oracle
