#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "emfim/error.hpp"
#include "emfim/linalg.hpp"
#include "emfim/model.hpp"
#include "emfim/random.hpp"

namespace emfim::ssm {

/**
 * x_t = A x_{t-1} + w_t,  w_t ~ N(0, Q),  Q = diag(θ)
 * y_t = D x_t + v_t,      v_t ~ N(0, R)
 * x_0 ~ N(μ, Σ) and x_0 is part of the observed record.
 */
struct Spec {
  Matrix A;
  Matrix D;
  Matrix R;
  Vector mu;
  Matrix Sigma;
  std::size_t n = 0;

  Eigen::Index p() const { return A.rows(); }
  Eigen::Index q() const { return D.rows(); }

  void validate() const {
    const auto pp = A.rows();
    if (A.cols() != pp || pp < 1) throw ConfigError("state-space A must be square");
    if (D.cols() != pp || D.rows() < 1) throw ConfigError("state-space D must be q x p");
    if (R.rows() != D.rows() || R.cols() != D.rows()) throw ConfigError("state-space R must be q x q");
    if (mu.size() != pp) throw ConfigError("state-space mu must have p entries");
    if (Sigma.rows() != pp || Sigma.cols() != pp) throw ConfigError("state-space Sigma must be p x p");
    if (n < 1) throw ConfigError("state-space horizon n must be at least 1");
    auto psd = [](const Matrix& m, const char* name) {
      if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw ConfigError(std::string("state-space ") + name + " must be symmetric");
      if (symmetric_eigenvalues(m).minCoeff() < -1e-12)
        throw ConfigError(std::string("state-space ") + name + " must be positive semi-definite");
    };
    psd(R, "R");
    psd(Sigma, "Sigma");
  }
};

/// p = 3, q = 1 benchmark instance with known A, D, R, μ = 0 and Σ = 0.
inline Spec three_state_spec(std::size_t n = 100) {
  Spec s;
  s.A = Matrix{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {0.8, 0.8, -0.8}};
  s.D = Matrix{{1.0, 0.0, 0.0}};
  s.R = Matrix{{1.0}};
  s.mu = Vector::Zero(3);
  s.Sigma = Matrix::Zero(3, 3);
  s.n = n;
  return s;
}

/// Observed record (x_0, y_1..y_n); row t-1 of y() holds y_t.
class Data {
 public:
  Data(Vector x0, Matrix y) : x0_(std::move(x0)), y_(std::move(y)) {
    if (y_.rows() < 1) throw InvalidParameter("state-space dataset must contain at least one time step");
    if (!x0_.allFinite() || !y_.allFinite()) throw InvalidParameter("state-space dataset contains non-finite values");
  }

  std::size_t size() const { return static_cast<std::size_t>(y_.rows()); }
  const Vector& x0() const { return x0_; }
  const Matrix& y() const { return y_; }
  Vector y_at(std::size_t t) const { return y_.row(static_cast<Eigen::Index>(t) - 1).transpose(); }

 private:
  Vector x0_;
  Matrix y_;
};

/// Filtered and one-step predicted moments; index 0 holds the initial state.
struct FilterOutput {
  std::vector<Vector> x_pred, x_filt;
  std::vector<Matrix> P_pred, P_filt, gain;
  double loglik = 0.0;
};

struct SmootherOutput {
  std::vector<Vector> mean;     ///< x_t^n, t = 0..n
  std::vector<Matrix> cov;      ///< P_t^n, t = 0..n
  std::vector<Matrix> lag_one;  ///< P_{t,t-1}^n, t = 1..n (index 0 unused)
};

namespace detail {

inline void require_shapes(const Spec& spec, const Vector& q_diag, const Data& data) {
  if (q_diag.size() != spec.p()) throw InvalidParameter("state-space parameter must have p entries");
  if (data.x0().size() != spec.p() || data.y().cols() != spec.q())
    throw InvalidParameter("state-space dataset does not match the model dimensions");
}

inline void require_positive(const Vector& q_diag, const char* what) {
  for (Eigen::Index i = 0; i < q_diag.size(); ++i)
    if (!(q_diag(i) > 0.0) || !std::isfinite(q_diag(i)))
      throw InvalidParameter(std::string(what) + ": Q entry " + std::to_string(i) + " must be positive");
}

/// Symmetric square root of a PSD matrix.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace detail

/// Forward simulation; entries of q_diag may be zero here.
inline Data simulate(const Spec& spec, const Vector& q_diag, RandomStream& rng) {
  const auto p = spec.p(), q = spec.q();
  if (q_diag.size() != p) throw InvalidParameter("state-space parameter must have p entries");
  for (Eigen::Index i = 0; i < p; ++i)
    if (!(q_diag(i) >= 0.0)) throw InvalidParameter("state-space Q entries must be non-negative");

  auto draw = [&](Eigen::Index k) {
    Vector z(k);
    for (Eigen::Index i = 0; i < k; ++i) z(i) = rng.normal();
    return z;
  };
  const bool sigma_zero = spec.Sigma.isZero(0.0);
  const Vector x0 = sigma_zero ? spec.mu : Vector(spec.mu + detail::psd_sqrt(spec.Sigma) * draw(p));
  const Vector q_sd = q_diag.cwiseSqrt();
  const Matrix r_sqrt = detail::psd_sqrt(spec.R);

  Matrix y(static_cast<Eigen::Index>(spec.n), q);
  Vector x = x0;
  for (Eigen::Index t = 0; t < y.rows(); ++t) {
    x = spec.A * x + q_sd.cwiseProduct(draw(p));
    y.row(t) = (spec.D * x + r_sqrt * draw(q)).transpose();
  }
  return Data(x0, std::move(y));
}

/// Predict/update recursions with Joseph-form covariance update and the prediction-error log-likelihood.
inline FilterOutput kalman_filter(const Spec& spec, const Vector& q_diag, const Data& data) {
  detail::require_shapes(spec, q_diag, data);
  const auto p = spec.p();
  const std::size_t n = data.size();
  const Matrix Q = q_diag.asDiagonal();
  const Matrix I = Matrix::Identity(p, p);
  const double log_2pi = std::log(2.0 * std::numbers::pi);

  FilterOutput out;
  out.x_pred.resize(n + 1);
  out.x_filt.resize(n + 1);
  out.P_pred.resize(n + 1);
  out.P_filt.resize(n + 1);
  out.gain.resize(n + 1);
  out.x_pred[0] = out.x_filt[0] = data.x0();
  out.P_pred[0] = out.P_filt[0] = Matrix::Zero(p, p);
  out.gain[0] = Matrix::Zero(p, spec.q());

  for (std::size_t t = 1; t <= n; ++t) {
    out.x_pred[t] = spec.A * out.x_filt[t - 1];
    out.P_pred[t] = spec.A * out.P_filt[t - 1] * spec.A.transpose() + Q;
    symmetrize_in_place(out.P_pred[t]);

    const Matrix S = spec.D * out.P_pred[t] * spec.D.transpose() + spec.R;
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success)
      throw FilterSingularity("innovation covariance is not positive definite at t = " + std::to_string(t));
    const Vector e = data.y_at(t) - spec.D * out.x_pred[t];
    const Matrix K = llt.solve(spec.D * out.P_pred[t]).transpose();
    out.gain[t] = K;
    out.x_filt[t] = out.x_pred[t] + K * e;
    const Matrix IKD = I - K * spec.D;
    out.P_filt[t] = IKD * out.P_pred[t] * IKD.transpose() + K * spec.R * K.transpose();
    symmetrize_in_place(out.P_filt[t]);

    const double log_det = 2.0 * Vector(llt.matrixLLT().diagonal()).array().log().sum();
    out.loglik -= 0.5 * (static_cast<double>(spec.q()) * log_2pi + log_det + e.dot(llt.solve(e)));
  }
  return out;
}

/**
 * Rauch–Tung–Striebel backward pass plus the lag-one covariance recursion
 * started from P_{n,n-1}^n = (I − K_n D) A P_{n-1}^{n-1}.
 */
inline SmootherOutput kalman_smoother(const Spec& spec, const Data& data, const FilterOutput& f) {
  const auto p = spec.p();
  const std::size_t n = data.size();
  SmootherOutput s;
  s.mean.resize(n + 1);
  s.cov.resize(n + 1);
  s.lag_one.assign(n + 1, Matrix::Zero(p, p));
  s.mean[n] = f.x_filt[n];
  s.cov[n] = f.P_filt[n];

  // J[t] = P_t^t Aᵀ (P_{t+1}^t)^{-1}
  std::vector<Matrix> J(n);
  for (std::size_t t = n; t >= 1; --t) {
    Eigen::LDLT<Matrix> ldlt(f.P_pred[t]);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
      throw FilterSingularity("predicted covariance is singular at t = " + std::to_string(t));
    J[t - 1] = ldlt.solve(spec.A * f.P_filt[t - 1]).transpose();
    s.mean[t - 1] = f.x_filt[t - 1] + J[t - 1] * (s.mean[t] - f.x_pred[t]);
    s.cov[t - 1] = f.P_filt[t - 1] + J[t - 1] * (s.cov[t] - f.P_pred[t]) * J[t - 1].transpose();
    symmetrize_in_place(s.cov[t - 1]);
  }

  const Matrix I = Matrix::Identity(p, p);
  s.lag_one[n] = (I - f.gain[n] * spec.D) * spec.A * f.P_filt[n - 1];
  for (std::size_t t = n; t >= 2; --t) {
    s.lag_one[t - 1] = f.P_filt[t - 1] * J[t - 2].transpose() +
                       J[t - 1] * (s.lag_one[t] - spec.A * f.P_filt[t - 1]) * J[t - 2].transpose();
  }
  return s;
}

inline SmootherOutput kalman_smoother(const Spec& spec, const Vector& q_diag, const Data& data) {
  return kalman_smoother(spec, data, kalman_filter(spec, q_diag, data));
}

/// Smoothed second-moment statistics entering Q(θ|θ').
struct EStepStats {
  Matrix psi;             ///< S11 − S10 Aᵀ − A S10ᵀ + A S00 Aᵀ
  double r_term = 0.0;    ///< θ-independent measurement part (0 when R is singular)
  std::size_t n = 0;
};

inline EStepStats e_step_stats(const Spec& spec, const SmootherOutput& s, const Data& data) {
  const auto p = spec.p();
  const std::size_t n = data.size();
  Matrix S11 = Matrix::Zero(p, p), S10 = Matrix::Zero(p, p), S00 = Matrix::Zero(p, p);
  Matrix meas = Matrix::Zero(spec.q(), spec.q());
  for (std::size_t t = 1; t <= n; ++t) {
    S11 += s.mean[t] * s.mean[t].transpose() + s.cov[t];
    S10 += s.mean[t] * s.mean[t - 1].transpose() + s.lag_one[t];
    S00 += s.mean[t - 1] * s.mean[t - 1].transpose() + s.cov[t - 1];
    const Vector r = data.y_at(t) - spec.D * s.mean[t];
    meas += r * r.transpose() + spec.D * s.cov[t] * spec.D.transpose();
  }
  EStepStats st;
  st.psi = S11 - S10 * spec.A.transpose() - spec.A * S10.transpose() + spec.A * S00 * spec.A.transpose();
  symmetrize_in_place(st.psi);
  st.n = n;
  Eigen::LLT<Matrix> r_llt(spec.R);
  if (r_llt.info() == Eigen::Success) {
    const double log_det_r = 2.0 * Vector(r_llt.matrixLLT().diagonal()).array().log().sum();
    st.r_term = -0.5 * static_cast<double>(n) * log_det_r - 0.5 * r_llt.solve(meas).trace();
  }
  return st;
}

/// Q(θ|θ') from precomputed statistics; constants dropped, and the initial-state term is absent since x_0 is observed.
inline double q_from_stats(const Vector& q_diag, const EStepStats& st) {
  double v = st.r_term;
  const double n = static_cast<double>(st.n);
  for (Eigen::Index i = 0; i < q_diag.size(); ++i) v -= 0.5 * n * std::log(q_diag(i)) + 0.5 * st.psi(i, i) / q_diag(i);
  return v;
}

/// Linear-Gaussian state-space model with unknown diagonal state-noise covariance.
class Model {
 public:
  using Data = ssm::Data;

  explicit Model(Spec spec) : spec_(std::move(spec)) { spec_.validate(); }

  const Spec& spec() const { return spec_; }
  std::size_t dim() const { return static_cast<std::size_t>(spec_.p()); }

  bool in_domain(const Vector& theta) const {
    if (theta.size() != spec_.p() || !theta.allFinite()) return false;
    return (theta.array() > 0.0).all();
  }

  EStepStats e_step(const Vector& theta_cond, const Data& data) const {
    detail::require_positive(theta_cond, "E step");
    detail::require_shapes(spec_, theta_cond, data);
    return e_step_stats(spec_, kalman_smoother(spec_, theta_cond, data), data);
  }

  double q_value(const Vector& theta, const Vector& theta_cond, const Data& data) const {
    detail::require_positive(theta, "Q(θ|θ')");
    return q_from_stats(theta, e_step(theta_cond, data));
  }

  Vector q_gradient(const Vector& theta, const Vector& theta_cond, const Data& data) const {
    detail::require_positive(theta, "dQ/dθ");
    const EStepStats st = e_step(theta_cond, data);
    const double n = static_cast<double>(st.n);
    Vector g(theta.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g(i) = -0.5 * n / theta(i) + 0.5 * st.psi(i, i) / (theta(i) * theta(i));
    return g;
  }

  Vector score(const Vector& theta_cond, const Data& data) const { return q_gradient(theta_cond, theta_cond, data); }

  /// Diagonal-constrained maximizer Q_i = Ψ_ii / n.
  Vector m_step(const Vector& theta, const Data& data) const {
    const EStepStats st = e_step(theta, data);
    Vector next = st.psi.diagonal() / static_cast<double>(st.n);
    for (Eigen::Index i = 0; i < next.size(); ++i)
      if (!(next(i) > 0.0)) throw DegenerateUpdate("state-space M-step produced Q_" + std::to_string(i) + " <= 0");
    return next;
  }

  Data sample(const Vector& theta, std::size_t n, RandomStream& rng) const {
    detail::require_positive(theta, "simulation");
    Spec s = spec_;
    s.n = n;
    return simulate(s, theta, rng);
  }

  double loglik(const Vector& theta, const Data& data) const {
    detail::require_positive(theta, "log-likelihood");
    return kalman_filter(spec_, theta, data).loglik;
  }

 private:
  Spec spec_;
};

/**
 * Exact expected information of y_1..y_n given x_0, from the dense Gaussian
 * covariance Σ_y(θ) = Σ_i θ_i C_i + I⊗R:  I_ij = ½ tr(Σ_y⁻¹ C_i Σ_y⁻¹ C_j).
 * The conditional mean D A^t x_0 does not depend on θ. Cost is O((nq)³).
 */
inline Matrix dense_expected_fim(const Spec& spec, const Vector& q_diag) {
  spec.validate();
  detail::require_positive(q_diag, "dense expected FIM");
  const auto p = spec.p(), q = spec.q();
  const auto n = static_cast<Eigen::Index>(spec.n);
  const Eigen::Index big = n * q;

  std::vector<Matrix> powers(static_cast<std::size_t>(n) + 1);
  powers[0] = Matrix::Identity(p, p);
  for (std::size_t k = 1; k < powers.size(); ++k) powers[k] = spec.A * powers[k - 1];

  // C_i: covariance of y due to unit variance in state-noise coordinate i
  std::vector<Matrix> C(static_cast<std::size_t>(p), Matrix::Zero(big, big));
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index t = 1; t <= n; ++t)
      for (Eigen::Index u = 1; u <= t; ++u) {
        Matrix acc = Matrix::Zero(q, q);
        for (Eigen::Index s = 1; s <= u; ++s) {
          const Vector a = spec.D * powers[static_cast<std::size_t>(t - s)].col(i);
          const Vector b = spec.D * powers[static_cast<std::size_t>(u - s)].col(i);
          acc += a * b.transpose();
        }
        C[static_cast<std::size_t>(i)].block((t - 1) * q, (u - 1) * q, q, q) = acc;
        C[static_cast<std::size_t>(i)].block((u - 1) * q, (t - 1) * q, q, q) = acc.transpose();
      }
  }
  Matrix cov = Matrix::Zero(big, big);
  for (Eigen::Index t = 0; t < n; ++t) cov.block(t * q, t * q, q, q) = spec.R;
  for (Eigen::Index i = 0; i < p; ++i) cov += q_diag(i) * C[static_cast<std::size_t>(i)];

  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw FilterSingularity("observation covariance is singular");
  std::vector<Matrix> w(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) w[static_cast<std::size_t>(i)] = llt.solve(C[static_cast<std::size_t>(i)]);
  Matrix fim(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j)
      fim(i, j) = fim(j, i) =
          0.5 * (w[static_cast<std::size_t>(i)].array() * w[static_cast<std::size_t>(j)].transpose().array()).sum();
  return fim;
}

}  // namespace emfim::ssm
