#pragma once

#include <algorithm>
#include <cmath>

#include "emfim/types.hpp"

namespace emfim::numdiff {

/// Per-coordinate step: base * max(1, |x_i|).
inline Vector scaled_steps(const Vector& x, double base) {
  return x.cwiseAbs().cwiseMax(1.0) * base;
}

template <class F>
Vector gradient(F&& f, const Vector& x, double base_step) {
  const Vector h = scaled_steps(x, base_step);
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    g(i) = (f(xp) - f(xm)) / (2.0 * h(i));
  }
  return g;
}

/// Standard Jacobian J(j, i) = dF_j/dx_i by central differences.
template <class F>
Matrix jacobian(F&& fn, const Vector& x, double base_step) {
  const Vector h = scaled_steps(x, base_step);
  Matrix jac;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    const Vector col = (fn(xp) - fn(xm)) / (2.0 * h(i));
    if (i == 0) jac.resize(col.size(), x.size());
    jac.col(i) = col;
  }
  return jac;
}

/// Hessian of a scalar function by second differences, symmetrized.
template <class F>
Matrix hessian(F&& f, const Vector& x, double base_step) {
  const Eigen::Index d = x.size();
  const Vector h = scaled_steps(x, base_step);
  const double f0 = f(x);
  Matrix hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    Vector xp = x, xm = x;
    xp(i) += h(i);
    xm(i) -= h(i);
    hess(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h(i) * h(i));
    for (Eigen::Index j = i + 1; j < d; ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp(i) += h(i), pp(j) += h(j);
      pm(i) += h(i), pm(j) -= h(j);
      mp(i) -= h(i), mp(j) += h(j);
      mm(i) -= h(i), mm(j) -= h(j);
      hess(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h(i) * h(j));
      hess(j, i) = hess(i, j);
    }
  }
  return hess;
}

}  // namespace emfim::numdiff
