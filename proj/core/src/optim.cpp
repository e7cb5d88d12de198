#include "switchdiff/optim.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace switchdiff {

Eigen::VectorXd fd_gradient(const ObjectiveFn& f, const Eigen::VectorXd& x,
                            double rel_step) {
  const int n = int(x.size());
  Eigen::VectorXd g(n);
  Eigen::VectorXd xp = x;
  for (int i = 0; i < n; ++i) {
    double hstep = rel_step * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + hstep;
    double fp = f(xp);
    xp[i] = x[i] - hstep;
    double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * hstep);
  }
  return g;
}

MinimizeResult minimize_bfgs(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                             const MinimizeOptions& opts) {
  const int n = int(x0.size());
  MinimizeResult res;
  res.x = x0;
  res.value = f(x0);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian
  Eigen::VectorXd g = fd_gradient(f, res.x, opts.fd_step);
  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it + 1;
    res.grad_norm = g.norm();
    if (res.grad_norm < opts.grad_tol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd p = -(H * g);
    double gp = g.dot(p);
    if (!(gp < 0)) {  // not a descent direction; reset
      H.setIdentity();
      p = -g;
      gp = g.dot(p);
    }
    // Backtracking Armijo line search.
    double step = 1.0;
    double fx = res.value;
    Eigen::VectorXd xn;
    double fn = fx;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = res.x + step * p;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * gp) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok || (res.x - xn).norm() < opts.step_tol) {
      res.converged = res.grad_norm < 1e-5;
      break;
    }
    Eigen::VectorXd gn = fd_gradient(f, xn, opts.fd_step);
    Eigen::VectorXd s = xn - res.x;
    Eigen::VectorXd yv = gn - g;
    double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Eigen::MatrixXd V = I - (s * yv.transpose()) / sy;
      H = V * H * V.transpose() + (s * s.transpose()) / sy;
    }
    res.x = xn;
    res.value = fn;
    g = gn;
  }
  return res;
}

MinimizeResult nelder_mead(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                           const NelderMeadOptions& opts) {
  const int n = int(x0.size());
  MinimizeResult res;
  res.x = x0;
  res.value = f(x0);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  std::vector<Eigen::VectorXd> v(n + 1, x0);
  std::vector<double> fv(n + 1);
  fv[0] = res.value;
  int evals = 1;
  for (int i = 0; i < n; ++i) {
    v[i + 1][i] += opts.init_step * (1.0 + std::abs(x0[i]));
    fv[i + 1] = f(v[i + 1]);
    ++evals;
  }
  auto order = [&] {
    for (int i = 0; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j)
        if (fv[j] < fv[i]) {
          std::swap(fv[i], fv[j]);
          std::swap(v[i], v[j]);
        }
  };
  while (evals < opts.max_evals) {
    order();
    if (std::isfinite(fv[n]) && fv[n] - fv[0] < opts.f_tol &&
        (v[n] - v[0]).norm() < opts.x_tol)
      break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) centroid += v[i];
    centroid /= n;
    Eigen::VectorXd xr = centroid + (centroid - v[n]);
    double fr = f(xr);
    ++evals;
    if (fr < fv[0]) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - v[n]);
      double fe = f(xe);
      ++evals;
      if (fe < fr) {
        v[n] = xe;
        fv[n] = fe;
      } else {
        v[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      v[n] = xr;
      fv[n] = fr;
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (v[n] - centroid);
      double fc = f(xc);
      ++evals;
      if (fc < fv[n] || !std::isfinite(fv[n])) {
        v[n] = xc;
        fv[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          v[i] = v[0] + 0.5 * (v[i] - v[0]);
          fv[i] = f(v[i]);
          ++evals;
        }
      }
    }
    res.iterations++;
  }
  order();
  res.x = v[0];
  res.value = fv[0];
  res.converged = std::isfinite(fv[0]);
  return res;
}

double golden_section(const std::function<double(double)>& f, double a, double b,
                      double tol) {
  const double gr = 0.6180339887498949;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace switchdiff
