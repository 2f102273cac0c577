#pragma once

#include <Eigen/Dense>

namespace emfim {

/// Point in a model's parameter space.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class FimMode { expected, observed };
enum class GradientSource { direct_score, q_differences };

inline const char* to_string(FimMode m) {
  return m == FimMode::expected ? "expected" : "observed";
}

inline const char* to_string(GradientSource g) {
  return g == GradientSource::direct_score ? "direct_S" : "q_differences";
}

}  // namespace emfim
