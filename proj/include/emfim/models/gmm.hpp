#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "emfim/error.hpp"
#include "emfim/model.hpp"
#include "emfim/random.hpp"

namespace emfim::gmm {

/// θ = (π, μ1, μ2); π is the weight of the N(μ2, 1) component.
struct Params {
  double pi = 0.5;
  double mu1 = 0.0;
  double mu2 = 0.0;

  static Params from_vector(const Vector& v) {
    if (v.size() != 3) throw InvalidParameter("mixture parameter must have 3 entries");
    return {v(0), v(1), v(2)};
  }
  Vector to_vector() const { return Vector{{pi, mu1, mu2}}; }

  bool valid() const { return std::isfinite(pi) && std::isfinite(mu1) && std::isfinite(mu2) && pi >= 0.0 && pi <= 1.0; }
  bool interior() const { return valid() && pi > 0.0 && pi < 1.0; }
};

class Data {
 public:
  explicit Data(std::vector<double> y) : y_(std::move(y)) {
    if (y_.empty()) throw InvalidParameter("mixture dataset must contain at least one observation");
    for (double v : y_)
      if (!std::isfinite(v)) throw InvalidParameter("mixture dataset contains a non-finite observation");
  }

  std::size_t size() const { return y_.size(); }
  std::span<const double> values() const { return y_; }

 private:
  std::vector<double> y_;
};

inline double log_phi(double z) { return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi); }

/// w * log(p) with the convention 0 * log 0 = 0.
inline double xlogy(double w, double p) { return w == 0.0 ? 0.0 : w * std::log(p); }

namespace detail {

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline void require_valid(const Params& p) {
  if (!p.valid()) throw InvalidParameter("mixture parameter outside 0 <= pi <= 1 or non-finite mean");
}

inline void require_interior(const Params& p, const char* what) {
  require_valid(p);
  if (!(p.pi > 0.0 && p.pi < 1.0))
    throw BoundaryParameter(std::string(what) + " is singular at pi = " + std::to_string(p.pi));
}

// log weighted component densities: (component 1, component 2)
inline std::pair<double, double> log_terms(double y, const Params& p) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const double l1 = p.pi < 1.0 ? std::log1p(-p.pi) + log_phi(y - p.mu1) : ninf;
  const double l2 = p.pi > 0.0 ? std::log(p.pi) + log_phi(y - p.mu2) : ninf;
  return {l1, l2};
}

}  // namespace detail

inline double log_density(double y, const Params& p) {
  detail::require_valid(p);
  const auto [l1, l2] = detail::log_terms(y, p);
  return detail::log_add_exp(l1, l2);
}

/// (1 − π) φ(y − μ1) + π φ(y − μ2)
inline double density(double y, const Params& p) { return std::exp(log_density(y, p)); }

/// Posterior probability that y came from the N(μ2, 1) component.
inline double alpha(double y, const Params& p) {
  detail::require_valid(p);
  if (p.pi == 0.0) return 0.0;
  if (p.pi == 1.0) return 1.0;
  const auto [l1, l2] = detail::log_terms(y, p);
  const double lse = detail::log_add_exp(l1, l2);
  if (!std::isfinite(lse)) throw ResponsibilityUnderflow("both mixture components underflow at y = " + std::to_string(y));
  return std::exp(l2 - lse);
}

/// Score of log p(y|θ) for a single observation.
inline Vector observation_score(double y, const Params& p) {
  const double lp = log_density(y, p);
  const double r1 = std::exp(log_phi(y - p.mu1) - lp);
  const double r2 = std::exp(log_phi(y - p.mu2) - lp);
  return Vector{{r2 - r1, (1.0 - p.pi) * r1 * (y - p.mu1), p.pi * r2 * (y - p.mu2)}};
}

/**
 * Two-component unit-variance Gaussian mixture with every optional
 * capability: closed-form S, observed log-likelihood and the conditional
 * complete-data information blocks used by Louis's identity.
 */
class Model {
 public:
  using Data = gmm::Data;

  std::size_t dim() const { return 3; }
  bool in_domain(const Vector& theta) const { return theta.size() == 3 && Params::from_vector(theta).valid(); }

  double q_value(const Vector& theta, const Vector& theta_cond, const Data& data) const {
    const Params p = Params::from_vector(theta);
    const Params c = Params::from_vector(theta_cond);
    detail::require_valid(p);
    detail::require_valid(c);
    double total = 0.0;
    for (double y : data.values()) {
      const double a = alpha(y, c);
      total += xlogy(1.0 - a, 1.0 - p.pi) + (1.0 - a) * log_phi(y - p.mu1);
      total += xlogy(a, p.pi) + a * log_phi(y - p.mu2);
    }
    return total;
  }

  /// ∂Q(θ|θ')/∂θ at arbitrary θ.
  Vector q_gradient(const Vector& theta, const Vector& theta_cond, const Data& data) const {
    const Params p = Params::from_vector(theta);
    const Params c = Params::from_vector(theta_cond);
    detail::require_interior(p, "dQ/dpi");
    detail::require_valid(c);
    double sa = 0.0, g2 = 0.0, g3 = 0.0;
    for (double y : data.values()) {
      const double a = alpha(y, c);
      sa += a;
      g2 += (1.0 - a) * (y - p.mu1);
      g3 += a * (y - p.mu2);
    }
    const double n = static_cast<double>(data.size());
    return Vector{{sa / p.pi - (n - sa) / (1.0 - p.pi), g2, g3}};
  }

  Vector score(const Vector& theta_cond, const Data& data) const {
    detail::require_interior(Params::from_vector(theta_cond), "S(θ'|Y)");
    return q_gradient(theta_cond, theta_cond, data);
  }

  Vector m_step(const Vector& theta, const Data& data) const {
    const Params p = Params::from_vector(theta);
    detail::require_valid(p);
    double sa = 0.0, say = 0.0, sy = 0.0;
    for (double y : data.values()) {
      const double a = alpha(y, p);
      sa += a;
      say += a * y;
      sy += y;
    }
    const double n = static_cast<double>(data.size());
    const double sb = n - sa;
    if (!(sa > 0.0) || !(sb > 0.0))
      throw DegenerateUpdate("mixture M-step: a component received zero total responsibility");
    return Vector{{sa / n, (sy - say) / sb, say / sa}};
  }

  Data sample(const Vector& theta, std::size_t n, RandomStream& rng) const {
    const Params p = Params::from_vector(theta);
    detail::require_valid(p);
    std::vector<double> y(n);
    for (auto& v : y) {
      const bool second = rng.uniform() < p.pi;
      v = (second ? p.mu2 : p.mu1) + rng.normal();
    }
    return Data(std::move(y));
  }

  double loglik(const Vector& theta, const Data& data) const {
    const Params p = Params::from_vector(theta);
    double total = 0.0;
    for (double y : data.values()) total += log_density(y, p);
    return total;
  }

  CompleteInfoParts complete_info(const Vector& theta, const Data& data) const {
    const Params p = Params::from_vector(theta);
    detail::require_interior(p, "complete-data information");
    const double q = 1.0 - p.pi;
    CompleteInfoParts parts{Matrix::Zero(3, 3), Matrix::Zero(3, 3), Vector::Zero(3)};
    Matrix own_mean_outer = Matrix::Zero(3, 3);
    for (double y : data.values()) {
      const double a = alpha(y, p);
      // complete-data score for x = 1 and x = 0
      const Vector s1{{1.0 / p.pi, 0.0, y - p.mu2}};
      const Vector s0{{-1.0 / q, y - p.mu1, 0.0}};
      const Vector mean = a * s1 + (1.0 - a) * s0;
      parts.cond_exp_neg_hessian(0, 0) += a / (p.pi * p.pi) + (1.0 - a) / (q * q);
      parts.cond_exp_neg_hessian(1, 1) += 1.0 - a;
      parts.cond_exp_neg_hessian(2, 2) += a;
      parts.cond_exp_score_outer += a * s1 * s1.transpose() + (1.0 - a) * s0 * s0.transpose();
      own_mean_outer += mean * mean.transpose();
      parts.cond_score += mean;
    }
    // observations are conditionally independent: cross terms factor into products of means
    parts.cond_exp_score_outer += parts.cond_score * parts.cond_score.transpose() - own_mean_outer;
    return parts;
  }
};

/**
 * Expected Fisher information n ∫ s(y) s(y)ᵀ p(y) dy by adaptive
 * Gauss–Kronrod quadrature over [min μ − 10, max μ + 10].
 */
inline Matrix expected_fim_oracle(const Params& p, std::size_t n, double tolerance = 1e-12) {
  detail::require_valid(p);
  if (!(p.pi > 0.0 && p.pi < 1.0)) throw InvalidParameter("quadrature oracle needs 0 < pi < 1");
  const double lo = std::min(p.mu1, p.mu2) - 10.0;
  const double hi = std::max(p.mu1, p.mu2) + 10.0;
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;

  Matrix fim(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      auto integrand = [&](double y) {
        const Vector s = observation_score(y, p);
        return s(i) * s(j) * density(y, p);
      };
      double error = 0.0, l1 = 0.0;
      const double value = Quad::integrate(integrand, lo, hi, 20, tolerance, &error, &l1);
      if (!std::isfinite(value) || error > 1e3 * tolerance * std::max(1.0, l1))
        throw OracleFailure("quadrature did not converge for entry (" + std::to_string(i) + "," +
                            std::to_string(j) + "), error estimate " + std::to_string(error));
      fim(i, j) = fim(j, i) = static_cast<double>(n) * value;
    }
  return fim;
}

}  // namespace emfim::gmm
