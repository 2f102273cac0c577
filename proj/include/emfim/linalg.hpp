#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "emfim/error.hpp"
#include "emfim/types.hpp"

namespace emfim {

/// Largest singular value.
inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

/// ||a - b|| / ||b|| in the spectral norm.
inline double spectral_rel_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidParameter("spectral_rel_error: dimension mismatch");
  const double denom = spectral_norm(b);
  if (!(denom > 0.0)) throw InvalidParameter("spectral_rel_error: reference matrix is zero");
  return spectral_norm(a - b) / denom;
}

/// Eigenvalues of the symmetric part, ascending.
inline Vector symmetric_eigenvalues(const Matrix& a) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

/// Real parts of the eigenvalues of a general square matrix, ascending.
inline Vector real_eigenvalues(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a, false);
  Vector v = es.eigenvalues().real();
  std::sort(v.data(), v.data() + v.size());
  return v;
}

inline bool is_exactly_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      if (a(i, j) != a(j, i)) return false;
  return true;
}

inline void symmetrize_in_place(Matrix& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

/// Fixed-order pairwise summation; the result depends only on the order of `terms`.
inline Matrix pairwise_sum(std::span<const Matrix> terms) {
  if (terms.empty()) return Matrix();
  if (terms.size() == 1) return terms.front();
  if (terms.size() <= 8) {
    Matrix acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc += terms[i];
    return acc;
  }
  const std::size_t half = terms.size() / 2;
  return pairwise_sum(terms.first(half)) + pairwise_sum(terms.subspan(half));
}

/// Elementwise unbiased sample variance; zero when fewer than two terms.
inline Matrix elementwise_variance(std::span<const Matrix> terms, const Matrix& mean) {
  Matrix var = Matrix::Zero(mean.rows(), mean.cols());
  if (terms.size() < 2) return var;
  std::vector<Matrix> sq;
  sq.reserve(terms.size());
  for (const auto& t : terms) sq.push_back((t - mean).cwiseAbs2());
  return pairwise_sum(sq) / static_cast<double>(terms.size() - 1);
}

/// Inverse of a symmetric matrix, symmetrized; throws if singular.
inline Matrix symmetric_inverse(const Matrix& a) {
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw InvalidParameter("matrix is singular");
  Matrix inv = lu.inverse();
  symmetrize_in_place(inv);
  return inv;
}

}  // namespace emfim
