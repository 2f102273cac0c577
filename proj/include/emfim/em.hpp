#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "emfim/error.hpp"
#include "emfim/model.hpp"

namespace emfim {

struct EMConfig {
  double delta = 1e-8;
  std::size_t max_iterations = 10000;

  void validate() const {
    if (!(delta > 0.0)) throw ConfigError("EM delta must be positive");
    if (max_iterations < 1) throw ConfigError("EM max_iterations must be at least 1");
  }
};

struct EMTrace {
  std::vector<Vector> iterates;   ///< θ^(0), θ^(1), ..., every iterate is kept
  std::vector<double> objective;  ///< L_O(θ^(t)) or Q(θ^(t)|θ^(t-1)), one per iterate
  bool objective_is_loglik = false;
  std::size_t iterations = 0;
  bool converged = false;

  const Vector& theta_star() const { return iterates.back(); }
};

/**
 * Iterates θ ← M(θ) until successive objective values differ by less than
 * config.delta. The objective is the observed log-likelihood when the model
 * has one, otherwise Q(θ^(t+1)|θ^(t)). Running out of iterations is reported
 * through converged = false.
 */
template <EMModel M>
EMTrace run_em(const M& model, const typename M::Data& data, const Vector& theta0, const EMConfig& config = {}) {
  config.validate();
  validate_param(model, theta0, "theta0");

  EMTrace trace;
  trace.objective_is_loglik = HasObservedLoglik<M>;
  auto objective = [&](const Vector& next, const Vector& prev) {
    if constexpr (HasObservedLoglik<M>) {
      (void)prev;
      return model.loglik(next, data);
    } else {
      return model.q_value(next, prev, data);
    }
  };

  trace.iterates.push_back(theta0);
  trace.objective.push_back(objective(theta0, theta0));

  for (std::size_t t = 0; t < config.max_iterations; ++t) {
    Vector next = em_map(model, trace.iterates.back(), data);
    const double value = objective(next, trace.iterates.back());
    trace.iterates.push_back(std::move(next));
    trace.objective.push_back(value);
    trace.iterations = t + 1;
    const std::size_t last = trace.objective.size() - 1;
    if (std::abs(trace.objective[last] - trace.objective[last - 1]) < config.delta) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

}  // namespace emfim
