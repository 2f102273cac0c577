#pragma once

#include <cstddef>
#include <utility>

#include "emfim/error.hpp"
#include "emfim/model.hpp"
#include "emfim/random.hpp"

namespace emfim::synthetic {

/// Data-independent placeholder; only the nominal sample size matters.
struct Data {
  std::size_t n = 1;
  std::size_t size() const { return n; }
};

/**
 * Exactly quadratic EM problem.
 *
 *   L_O(θ)   = −½ (θ − θ₀)ᵀ C (θ − θ₀)
 *   Q(θ|θ')  = L_O(θ) − ½ (θ − θ')ᵀ B (θ − θ')
 *
 * C is the observed information and B the missing information, so
 * S(θ') = −C(θ' − θ₀) is linear and M(θ') = (C + B)⁻¹(C θ₀ + B θ') is affine.
 */
class QuadraticModel {
 public:
  using Data = synthetic::Data;

  QuadraticModel(Vector center, Matrix curvature, Matrix missing)
      : center_(std::move(center)), curvature_(std::move(curvature)), missing_(std::move(missing)) {
    const auto d = center_.size();
    if (d < 1 || curvature_.rows() != d || curvature_.cols() != d || missing_.rows() != d || missing_.cols() != d)
      throw ConfigError("quadratic model: center, curvature and missing information dimensions disagree");
    if (!curvature_.isApprox(curvature_.transpose()) || !missing_.isApprox(missing_.transpose()))
      throw ConfigError("quadratic model: curvature and missing information must be symmetric");
    solver_ = Eigen::FullPivLU<Matrix>(curvature_ + missing_);
    if (!solver_.isInvertible()) throw ConfigError("quadratic model: C + B must be invertible");
  }

  QuadraticModel(Vector center, Matrix curvature)
      : QuadraticModel(center, curvature, Matrix::Zero(curvature.rows(), curvature.cols())) {}

  const Vector& center() const { return center_; }
  const Matrix& curvature() const { return curvature_; }
  const Matrix& missing() const { return missing_; }

  std::size_t dim() const { return static_cast<std::size_t>(center_.size()); }
  bool in_domain(const Vector& theta) const { return theta.size() == center_.size() && theta.allFinite(); }

  double q_value(const Vector& theta, const Vector& theta_cond, const Data&) const {
    const Vector a = theta - center_;
    const Vector b = theta - theta_cond;
    return -0.5 * a.dot(curvature_ * a) - 0.5 * b.dot(missing_ * b);
  }

  Vector q_gradient(const Vector& theta, const Vector& theta_cond, const Data&) const {
    return -curvature_ * (theta - center_) - missing_ * (theta - theta_cond);
  }

  Vector score(const Vector& theta_cond, const Data& data) const { return q_gradient(theta_cond, theta_cond, data); }

  Vector m_step(const Vector& theta, const Data&) const {
    return solver_.solve(curvature_ * center_ + missing_ * theta);
  }

  Data sample(const Vector&, std::size_t n, RandomStream&) const { return Data{n}; }

  double loglik(const Vector& theta, const Data&) const {
    const Vector a = theta - center_;
    return -0.5 * a.dot(curvature_ * a);
  }

  CompleteInfoParts complete_info(const Vector& theta, const Data& data) const {
    const Vector s = score(theta, data);
    return {curvature_ + missing_, missing_ + s * s.transpose(), s};
  }

 private:
  Vector center_;
  Matrix curvature_;
  Matrix missing_;
  Eigen::FullPivLU<Matrix> solver_;
};

}  // namespace emfim::synthetic
