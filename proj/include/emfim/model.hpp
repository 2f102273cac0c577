#pragma once

#include <concepts>
#include <cstddef>
#include <string>
#include <utility>

#include "emfim/error.hpp"
#include "emfim/random.hpp"
#include "emfim/types.hpp"

namespace emfim {

/// The three conditional-expectation blocks of Louis's identity, full-data totals at one point.
struct CompleteInfoParts {
  Matrix cond_exp_neg_hessian;  ///< E[-d2L/dθdθᵀ | Y, θ]
  Matrix cond_exp_score_outer;  ///< E[(dL/dθ)(dL/dθ)ᵀ | Y, θ]
  Vector cond_score;            ///< E[dL/dθ | Y, θ]
};

/**
 * Minimal EM problem: Q(θ|θ'), the closed-form M-step and a sampler for the
 * observed-data law. Datasets are immutable values exposing size().
 *
 * Optional capabilities are detected structurally:
 *   score(θ', Y)            S(θ'|Y) = ∂Q(θ|θ')/∂θ at θ = θ'
 *   q_gradient(θ, θ', Y)    ∂Q(θ|θ')/∂θ at arbitrary θ
 *   loglik(θ, Y)            observed-data log-likelihood
 *   complete_info(θ, Y)     CompleteInfoParts at θ
 */
template <class M>
concept EMModel = requires(const M& m, const Vector& v, const typename M::Data& y, RandomStream& rs,
                           std::size_t n) {
  typename M::Data;
  { m.dim() } -> std::convertible_to<std::size_t>;
  { m.in_domain(v) } -> std::convertible_to<bool>;
  { m.q_value(v, v, y) } -> std::convertible_to<double>;
  { m.m_step(v, y) } -> std::convertible_to<Vector>;
  { m.sample(v, n, rs) } -> std::same_as<typename M::Data>;
  { y.size() } -> std::convertible_to<std::size_t>;
};

template <class M>
concept HasScore = EMModel<M> && requires(const M& m, const Vector& v, const typename M::Data& y) {
  { m.score(v, y) } -> std::convertible_to<Vector>;
};

template <class M>
concept HasQGradient = EMModel<M> && requires(const M& m, const Vector& v, const typename M::Data& y) {
  { m.q_gradient(v, v, y) } -> std::convertible_to<Vector>;
};

template <class M>
concept HasObservedLoglik = EMModel<M> && requires(const M& m, const Vector& v, const typename M::Data& y) {
  { m.loglik(v, y) } -> std::convertible_to<double>;
};

template <class M>
concept HasCompleteInfo = EMModel<M> && requires(const M& m, const Vector& v, const typename M::Data& y) {
  { m.complete_info(v, y) } -> std::convertible_to<CompleteInfoParts>;
};

struct Capabilities {
  bool has_S = false;
  bool has_observed_loglik = false;
  bool has_complete_info = false;
};

template <EMModel M>
constexpr Capabilities capabilities_of() {
  return {HasScore<M>, HasObservedLoglik<M>, HasCompleteInfo<M>};
}

/// Throws InvalidParameter unless theta has the model's dimension, is finite and lies in its domain.
template <EMModel M>
void validate_param(const M& model, const Vector& theta, const char* what = "parameter") {
  if (static_cast<std::size_t>(theta.size()) != model.dim())
    throw InvalidParameter(std::string(what) + ": expected dimension " + std::to_string(model.dim()) +
                           ", got " + std::to_string(theta.size()));
  if (!theta.allFinite()) throw InvalidParameter(std::string(what) + ": non-finite entry");
  if (!model.in_domain(theta)) throw InvalidParameter(std::string(what) + ": outside the model domain");
}

template <EMModel M>
double q_value(const M& model, const Vector& theta, const Vector& theta_cond, const typename M::Data& data) {
  validate_param(model, theta, "theta");
  validate_param(model, theta_cond, "theta_cond");
  return model.q_value(theta, theta_cond, data);
}

template <EMModel M>
Vector s_value(const M& model, const Vector& theta_cond, const typename M::Data& data) {
  validate_param(model, theta_cond, "theta_cond");
  if constexpr (HasScore<M>) {
    return model.score(theta_cond, data);
  } else {
    throw UnsupportedCapability("model does not provide S(θ'|Y); use the Q-difference path");
  }
}

/// One E+M step, M(θ).
template <EMModel M>
Vector em_map(const M& model, const Vector& theta, const typename M::Data& data) {
  validate_param(model, theta, "theta");
  return model.m_step(theta, data);
}

template <EMModel M>
typename M::Data sample_data(const M& model, const Vector& theta, std::size_t n, RandomStream& rng) {
  validate_param(model, theta, "theta");
  if (n < 1) throw InvalidParameter("sample size must be at least 1");
  return model.sample(theta, n, rng);
}

template <EMModel M>
double observed_loglik(const M& model, const Vector& theta, const typename M::Data& data) {
  validate_param(model, theta, "theta");
  if constexpr (HasObservedLoglik<M>) {
    return model.loglik(theta, data);
  } else {
    throw UnsupportedCapability("model does not provide the observed-data log-likelihood");
  }
}

template <EMModel M>
CompleteInfoParts complete_info(const M& model, const Vector& theta, const typename M::Data& data) {
  validate_param(model, theta, "theta");
  if constexpr (HasCompleteInfo<M>) {
    return model.complete_info(theta, data);
  } else {
    throw UnsupportedCapability("model does not provide complete-data information");
  }
}

/// Hides score() and q_gradient() of a model, forcing the Q-difference path.
template <EMModel M>
class WithoutScore {
 public:
  using Data = typename M::Data;

  explicit WithoutScore(M inner) : inner_(std::move(inner)) {}

  std::size_t dim() const { return inner_.dim(); }
  bool in_domain(const Vector& t) const { return inner_.in_domain(t); }
  double q_value(const Vector& t, const Vector& c, const Data& y) const { return inner_.q_value(t, c, y); }
  Vector m_step(const Vector& t, const Data& y) const { return inner_.m_step(t, y); }
  Data sample(const Vector& t, std::size_t n, RandomStream& rs) const { return inner_.sample(t, n, rs); }

  const M& inner() const { return inner_; }

 private:
  M inner_;
};

}  // namespace emfim
