#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "emfim/error.hpp"
#include "emfim/linalg.hpp"
#include "emfim/model.hpp"
#include "emfim/parallel.hpp"
#include "emfim/random.hpp"

namespace emfim {

struct SPSAConfig {
  double c = 0.01;
  std::size_t N = 1000;
  std::uint64_t seed = 1;
  FimMode mode = FimMode::expected;
  GradientSource gradient_source = GradientSource::direct_score;
  std::size_t threads = 0;  ///< 0 = EMFIM_THREADS or hardware concurrency

  void validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("SPSA c must be positive and finite");
    if (N < 1) throw ConfigError("SPSA N must be at least 1");
  }
};

/// Simultaneous perturbation direction with every entry equal to +c or -c.
class Perturbation {
 public:
  Perturbation(Vector entries, double c) : entries_(std::move(entries)), c_(c) {}

  const Vector& entries() const { return entries_; }
  double c() const { return c_; }
  Eigen::Index size() const { return entries_.size(); }
  double operator()(Eigen::Index i) const { return entries_(i); }

 private:
  Vector entries_;
  double c_;
};

/// d independent Bernoulli ±c entries.
inline Perturbation gen_perturbation(double c, std::size_t d, RandomStream& rng) {
  if (!(c > 0.0)) throw InvalidPerturbation("perturbation magnitude must be positive");
  if (d < 1) throw InvalidPerturbation("perturbation dimension must be at least 1");
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.coin() ? c : -c;
  return {std::move(v), c};
}

struct HessianSample {
  Matrix matrix;
  std::size_t replicate = 0;
};

struct FIMEstimate {
  Matrix matrix;  ///< -(1/N) Σ_k Ĥ^(k)
  FimMode mode = FimMode::expected;
  GradientSource gradient_source = GradientSource::direct_score;
  std::size_t N = 0;
  double c = 0.0;
  std::uint64_t seed = 0;
  Matrix per_sample_variance;  ///< elementwise sample variance of the Ĥ^(k)

  Matrix standard_error() const {
    return (per_sample_variance / static_cast<double>(N)).cwiseSqrt();
  }
};

/**
 * One symmetrized simultaneous-perturbation Hessian sample from a gradient
 * pair taken at center ± delta:
 *
 *   Ĥ = ½ { (δG/2) [1/Δ_1 … 1/Δ_d] + transpose },  δG = G(+) − G(−).
 *
 * The result is exactly symmetric.
 */
inline HessianSample hessian_sample_from_gradients(const Vector& s_plus, const Vector& s_minus, const Vector& delta,
                                                   std::size_t replicate = 0) {
  const Eigen::Index d = delta.size();
  if (s_plus.size() != d || s_minus.size() != d)
    throw InvalidParameter("hessian_sample_from_gradients: dimension mismatch");
  for (Eigen::Index i = 0; i < d; ++i)
    if (delta(i) == 0.0) throw InvalidPerturbation("perturbation entry " + std::to_string(i) + " is zero");

  const Vector half_diff = 0.5 * (s_plus - s_minus);
  const Vector inv = delta.cwiseInverse();
  HessianSample out{Matrix(d, d), replicate};
  for (Eigen::Index i = 0; i < d; ++i) {
    out.matrix(i, i) = half_diff(i) * inv(i);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      const double v = 0.5 * (half_diff(i) * inv(j) + half_diff(j) * inv(i));
      out.matrix(i, j) = v;
      out.matrix(j, i) = v;
    }
  }
  return out;
}

inline HessianSample hessian_sample_from_gradients(const Vector& s_plus, const Vector& s_minus,
                                                   const Perturbation& delta, std::size_t replicate = 0) {
  return hessian_sample_from_gradients(s_plus, s_minus, delta.entries(), replicate);
}

namespace detail {

template <EMModel M>
void require_probe_in_domain(const M& model, const Vector& center, const Vector& probe, std::size_t replicate,
                             const char* label) {
  if (probe.allFinite() && model.in_domain(probe)) return;
  std::string where = "jointly";
  for (Eigen::Index m = 0; m < probe.size(); ++m) {
    Vector single = center;
    single(m) = probe(m);
    if (!model.in_domain(single)) {
      where = "at coordinate " + std::to_string(m) + " (value " + std::to_string(probe(m)) + ")";
      break;
    }
  }
  throw PerturbationOutOfDomain(replicate, std::string(label) + " probe leaves the parameter domain " + where);
}

}  // namespace detail

/**
 * Simultaneous-perturbation estimate of S(θc|Y) from two Q values:
 *
 *   Ŝ = [Q(θc + Δ̂ | θc) − Q(θc − Δ̂ | θc)] / 2 · [1/Δ̂_1 … 1/Δ̂_d]ᵀ
 */
template <EMModel M>
Vector s_hat_from_q(const M& model, const Vector& theta_center, const Vector& delta_hat,
                    const typename M::Data& data, std::size_t replicate = 0) {
  validate_param(model, theta_center, "theta_center");
  if (delta_hat.size() != theta_center.size()) throw InvalidParameter("s_hat_from_q: dimension mismatch");
  for (Eigen::Index i = 0; i < delta_hat.size(); ++i)
    if (delta_hat(i) == 0.0) throw InvalidPerturbation("perturbation entry " + std::to_string(i) + " is zero");

  const Vector up = theta_center + delta_hat;
  const Vector down = theta_center - delta_hat;
  detail::require_probe_in_domain(model, theta_center, up, replicate, "Q-difference (+)");
  detail::require_probe_in_domain(model, theta_center, down, replicate, "Q-difference (-)");
  const double dq = model.q_value(up, theta_center, data) - model.q_value(down, theta_center, data);
  return (0.5 * dq) * delta_hat.cwiseInverse();
}

/**
 * Ĥ^(k) for replicate k of the Monte Carlo procedure on dataset `data`.
 * Δ_k (and Δ̂_k for the Q-difference path, shared by the two branches) come
 * from the perturbation stream addressed by (seed, k).
 */
template <EMModel M>
HessianSample replicate_hessian(const M& model, const Vector& theta_star, const typename M::Data& data,
                                const SPSAConfig& config, std::size_t k) {
  RandomStream pert(config.seed, k, StreamPurpose::perturbation);
  const std::size_t d = model.dim();
  const Perturbation delta = gen_perturbation(config.c, d, pert);

  const Vector plus = theta_star + delta.entries();
  const Vector minus = theta_star - delta.entries();
  detail::require_probe_in_domain(model, theta_star, plus, k, "θ*+Δ");
  detail::require_probe_in_domain(model, theta_star, minus, k, "θ*-Δ");

  if (config.gradient_source == GradientSource::direct_score) {
    if constexpr (HasScore<M>) {
      return hessian_sample_from_gradients(model.score(plus, data), model.score(minus, data), delta, k);
    } else {
      throw UnsupportedCapability("direct_S gradient source requested but the model has no S");
    }
  }
  const Perturbation delta_hat = gen_perturbation(config.c, d, pert);
  return hessian_sample_from_gradients(s_hat_from_q(model, plus, delta_hat.entries(), data, k),
                                       s_hat_from_q(model, minus, delta_hat.entries(), data, k), delta, k);
}

/// All N Hessian samples, indexed by replicate.
template <EMModel M>
std::vector<HessianSample> hessian_samples(const M& model, const Vector& theta_star,
                                           const typename M::Data& template_data, const SPSAConfig& config) {
  config.validate();
  validate_param(model, theta_star, "theta_star");
  if (config.gradient_source == GradientSource::direct_score && !HasScore<M>)
    throw UnsupportedCapability("direct_S gradient source requested but the model has no S");

  const std::size_t n = template_data.size();
  return map_replicates<HessianSample>(config.N, config.threads, [&](std::size_t k) {
    if (config.mode == FimMode::observed) return replicate_hessian(model, theta_star, template_data, config, k);
    RandomStream data_rng(config.seed, k, StreamPurpose::data);
    const auto pseudo = model.sample(theta_star, n, data_rng);
    return replicate_hessian(model, theta_star, pseudo, config, k);
  });
}

/// Negative average of the samples with elementwise sample variance.
inline FIMEstimate reduce_samples(const std::vector<HessianSample>& samples, const SPSAConfig& config) {
  if (samples.empty()) throw InvalidParameter("no Hessian samples to reduce");
  std::vector<Matrix> mats;
  mats.reserve(samples.size());
  for (const auto& s : samples) mats.push_back(s.matrix);
  const Matrix mean = pairwise_sum(mats) / static_cast<double>(mats.size());

  FIMEstimate est;
  est.matrix = -mean;
  est.mode = config.mode;
  est.gradient_source = config.gradient_source;
  est.N = samples.size();
  est.c = config.c;
  est.seed = config.seed;
  est.per_sample_variance = elementwise_variance(mats, mean);
  return est;
}

/**
 * Monte Carlo SPSA estimate of the Fisher information at θ*.
 *
 * Expected mode draws a fresh pseudodata set of the template's size at θ*
 * for every replicate; observed mode reuses template_data and only
 * refreshes the perturbations.
 */
template <EMModel M>
FIMEstimate estimate_fim(const M& model, const Vector& theta_star, const typename M::Data& template_data,
                         const SPSAConfig& config) {
  return reduce_samples(hessian_samples(model, theta_star, template_data, config), config);
}

/// SPSA Hessian samples of an arbitrary gradient field g(θ) around `center`; replicate k uses stream (seed, k).
template <class Gradient>
std::vector<HessianSample> spsa_gradient_hessian_samples(Gradient&& grad, const Vector& center, double c,
                                                         std::size_t N, std::uint64_t seed, std::size_t threads = 0) {
  return map_replicates<HessianSample>(N, threads, [&](std::size_t k) {
    RandomStream pert(seed, k, StreamPurpose::perturbation);
    const Perturbation delta = gen_perturbation(c, static_cast<std::size_t>(center.size()), pert);
    return hessian_sample_from_gradients(grad(Vector(center + delta.entries())),
                                         grad(Vector(center - delta.entries())), delta, k);
  });
}

}  // namespace emfim
