#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "emfim/em.hpp"
#include "emfim/error.hpp"
#include "emfim/linalg.hpp"
#include "emfim/model.hpp"
#include "emfim/numdiff.hpp"
#include "emfim/random.hpp"
#include "emfim/spsa.hpp"

namespace emfim {

enum class DMMethod { sem, spsa, oracle_fd };

inline const char* to_string(DMMethod m) {
  switch (m) {
    case DMMethod::sem: return "sem";
    case DMMethod::spsa: return "spsa";
    case DMMethod::oracle_fd: return "oracle_fd";
  }
  return "?";
}

/// Jacobian of the EM map in the (input, output) orientation: matrix(i, j) = ∂M_j/∂θ_i.
struct DMEstimate {
  Matrix matrix;
  DMMethod method = DMMethod::sem;
  std::size_t iterations_used = 0;
};

/// Louis: E[−∂²L|Y,θ*] − E[(∂L)(∂L)ᵀ|Y,θ*] + E[∂L|Y,θ*] E[∂L|Y,θ*]ᵀ.
template <EMModel M>
Matrix louis_fim(const M& model, const Vector& theta_star, const typename M::Data& data) {
  const CompleteInfoParts parts = complete_info(model, theta_star, data);
  Matrix out = parts.cond_exp_neg_hessian - parts.cond_exp_score_outer +
               parts.cond_score * parts.cond_score.transpose();
  symmetrize_in_place(out);
  return out;
}

/**
 * Oakes: −[∂²Q/∂θ² + ∂²Q/∂θ∂θ'] at θ = θ' = θ*, sign flipped so the result
 * is an information matrix. Both blocks come from central differences of
 * ∂Q(θ|θ')/∂θ in each argument slot when the model exposes q_gradient,
 * otherwise from second differences of q_value. Steps are fd_step scaled
 * by max(1, |θ_i|).
 */
template <EMModel M>
Matrix oakes_fim(const M& model, const Vector& theta_star, const typename M::Data& data, double fd_step = 1e-4) {
  if (!(fd_step > 0.0) || !std::isfinite(fd_step)) throw InvalidParameter("oakes_fim: fd_step must be positive");
  validate_param(model, theta_star, "theta_star");
  const Eigen::Index d = theta_star.size();
  const Vector h = numdiff::scaled_steps(theta_star, fd_step);
  auto shifted = [&](Eigen::Index i, double s) {
    Vector v = theta_star;
    v(i) += s * h(i);
    return v;
  };

  Matrix curvature(d, d), mixed(d, d);
  if constexpr (HasQGradient<M>) {
    for (Eigen::Index j = 0; j < d; ++j) {
      curvature.col(j) = (model.q_gradient(shifted(j, 1), theta_star, data) -
                          model.q_gradient(shifted(j, -1), theta_star, data)) / (2.0 * h(j));
      mixed.col(j) = (model.q_gradient(theta_star, shifted(j, 1), data) -
                      model.q_gradient(theta_star, shifted(j, -1), data)) / (2.0 * h(j));
    }
  } else {
    auto q_theta = [&](const Vector& t) { return model.q_value(t, theta_star, data); };
    curvature = numdiff::hessian(q_theta, theta_star, fd_step);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        mixed(i, j) = (model.q_value(shifted(i, 1), shifted(j, 1), data) -
                       model.q_value(shifted(i, 1), shifted(j, -1), data) -
                       model.q_value(shifted(i, -1), shifted(j, 1), data) +
                       model.q_value(shifted(i, -1), shifted(j, -1), data)) / (4.0 * h(i) * h(j));
  }
  Matrix out = -(curvature + mixed);
  symmetrize_in_place(out);
  return out;
}

/// Central-difference Jacobian of the EM map at θ*, in DMEstimate orientation.
template <EMModel M>
DMEstimate fd_dm(const M& model, const typename M::Data& data, const Vector& theta_star, double step = 1e-6) {
  validate_param(model, theta_star, "theta_star");
  auto map = [&](const Vector& t) { return em_map(model, t, data); };
  return {numdiff::jacobian(map, theta_star, step).transpose(), DMMethod::oracle_fd,
          2 * static_cast<std::size_t>(theta_star.size())};
}

/**
 * SEM difference quotients
 *
 *   r_ij^(t) = [M_j(θ*_1, …, θ_i^(t), …, θ*_d) − M_j(θ*)] / (θ_i^(t) − θ*_i)
 *
 * evaluated along the stored EM iterates from t = 2 upward. Each r_ij is
 * accepted once two successive values differ by less than stability_tol.
 */
template <EMModel M>
DMEstimate sem_dm(const M& model, const typename M::Data& data, const EMTrace& trace, const Vector& theta_star,
                  double stability_tol) {
  validate_param(model, theta_star, "theta_star");
  if (!(stability_tol > 0.0)) throw InvalidParameter("sem_dm: stability_tol must be positive");
  if (trace.iterates.size() < 3) throw InvalidParameter("sem_dm: trace needs at least 3 iterates");
  const Eigen::Index d = theta_star.size();
  const Vector m_star = em_map(model, theta_star, data);

  DMEstimate out{Matrix::Zero(d, d), DMMethod::sem, 0};
  for (Eigen::Index i = 0; i < d; ++i) {
    std::vector<bool> stable(static_cast<std::size_t>(d), false);
    Vector previous = Vector::Constant(d, std::numeric_limits<double>::quiet_NaN());
    std::size_t t = 2;
    for (; t < trace.iterates.size(); ++t) {
      const double step = trace.iterates[t](i) - theta_star(i);
      if (std::abs(step) <= 1e-10 * std::max(1.0, std::abs(theta_star(i))))
        throw CoordinateDegenerate("sem_dm: coordinate " + std::to_string(i) + " of iterate " + std::to_string(t) +
                                   " already equals θ* before r stabilized");
      Vector probe = theta_star;
      probe(i) = trace.iterates[t](i);
      const Vector r = (em_map(model, probe, data) - m_star) / step;
      bool all_stable = true;
      for (Eigen::Index j = 0; j < d; ++j) {
        if (stable[static_cast<std::size_t>(j)]) continue;
        if (std::abs(r(j) - previous(j)) < stability_tol) {
          stable[static_cast<std::size_t>(j)] = true;
          out.matrix(i, j) = r(j);
        } else {
          all_stable = false;
        }
      }
      previous = r;
      if (all_stable) break;
    }
    if (t == trace.iterates.size())
      throw CoordinateDegenerate("sem_dm: row " + std::to_string(i) + " did not stabilize within the trace");
    out.iterations_used = std::max(out.iterations_used, t);
  }
  return out;
}

/// (I − DM) times the conditional complete-data information E[−∂²L|Y,θ*].
template <EMModel M>
Matrix sem_fim(const M& model, const DMEstimate& dm, const Vector& theta_star, const typename M::Data& data) {
  const CompleteInfoParts parts = complete_info(model, theta_star, data);
  const auto d = parts.cond_exp_neg_hessian.rows();
  if (dm.matrix.rows() != d || dm.matrix.cols() != d) throw InvalidParameter("sem_fim: DM dimension mismatch");
  return (Matrix::Identity(d, d) - dm.matrix) * parts.cond_exp_neg_hessian;
}

/// Average of [M_j(θ* + Δ_k) − M_j(θ* − Δ_k)] / (2Δ_ki) over n_samples Bernoulli ±c directions.
template <EMModel M>
DMEstimate spsa_dm(const M& model, const typename M::Data& data, const Vector& theta_star, double c,
                   std::size_t n_samples, std::uint64_t seed, std::size_t threads = 1) {
  validate_param(model, theta_star, "theta_star");
  if (!(c > 0.0)) throw InvalidParameter("spsa_dm: c must be positive");
  if (n_samples < 1) throw InvalidParameter("spsa_dm: n_samples must be at least 1");
  const auto d = static_cast<std::size_t>(theta_star.size());

  const auto terms = map_replicates<Matrix>(n_samples, threads, [&](std::size_t k) {
    RandomStream rng(seed, k, StreamPurpose::perturbation);
    const Perturbation delta = gen_perturbation(c, d, rng);
    const Vector plus = theta_star + delta.entries();
    const Vector minus = theta_star - delta.entries();
    detail::require_probe_in_domain(model, theta_star, plus, k, "θ*+Δ");
    detail::require_probe_in_domain(model, theta_star, minus, k, "θ*-Δ");
    const Vector diff = model.m_step(plus, data) - model.m_step(minus, data);
    Matrix term = (0.5 * delta.entries().cwiseInverse()) * diff.transpose();
    return term;
  });
  return {pairwise_sum(terms) / static_cast<double>(n_samples), DMMethod::spsa, 2 * n_samples};
}

/// −Hessian of the observed log-likelihood by second differences.
template <EMModel M>
Matrix fd_observed_fim(const M& model, const Vector& theta_star, const typename M::Data& data, double step = 1e-4) {
  validate_param(model, theta_star, "theta_star");
  auto f = [&](const Vector& t) { return observed_loglik(model, t, data); };
  return -numdiff::hessian(f, theta_star, step);
}

}  // namespace emfim
