#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace emfim;
using namespace emfim::testing;

namespace {

const Matrix kH{{2.0, 1.0}, {1.0, 3.0}};

synthetic::QuadraticModel quadratic(const Matrix& curvature) {
  return synthetic::QuadraticModel(Vector::Zero(curvature.rows()), curvature);
}

/// Q(θ|θc) = g·(θ − θc): the Q-difference gradient is (g·Δ̂) Δ̂⁻¹.
struct LinearQModel {
  using Data = synthetic::Data;
  Vector g;
  std::size_t dim() const { return static_cast<std::size_t>(g.size()); }
  bool in_domain(const Vector& t) const { return t.size() == g.size(); }
  double q_value(const Vector& t, const Vector& c, const Data&) const { return g.dot(t - c); }
  Vector m_step(const Vector& t, const Data&) const { return t; }
  Data sample(const Vector&, std::size_t n, RandomStream&) const { return Data{n}; }
};

SPSAConfig config(std::size_t N, std::uint64_t seed, FimMode mode = FimMode::observed, double c = 0.01) {
  SPSAConfig cfg;
  cfg.N = N;
  cfg.seed = seed;
  cfg.mode = mode;
  cfg.c = c;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST(Perturbation, EntriesAreSignedMagnitudes) {
  RandomStream rng(1, 0, StreamPurpose::perturbation);
  for (int k = 0; k < 100; ++k) {
    const Perturbation p = gen_perturbation(0.25, 5, rng);
    ASSERT_EQ(p.size(), 5);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_EQ(std::abs(p(i)), 0.25);
  }
}

TEST(Perturbation, SignsAreFairCoins) {
  RandomStream rng(2, 0, StreamPurpose::perturbation);
  const int draws = 100000;
  double sum = 0.0;
  for (int k = 0; k < draws; ++k) sum += gen_perturbation(1.0, 1, rng)(0);
  EXPECT_LT(std::abs(sum / draws), 3.0 / std::sqrt(static_cast<double>(draws)));
}

TEST(Perturbation, StreamsAreReproducible) {
  RandomStream a(9, 4, StreamPurpose::perturbation), b(9, 4, StreamPurpose::perturbation);
  EXPECT_EQ(gen_perturbation(0.1, 8, a).entries(), gen_perturbation(0.1, 8, b).entries());
}

TEST(Perturbation, RejectsNonPositiveMagnitude) {
  RandomStream rng(1);
  EXPECT_THROW(gen_perturbation(0.0, 3, rng), InvalidPerturbation);
  EXPECT_THROW(gen_perturbation(-0.1, 3, rng), InvalidPerturbation);
  EXPECT_THROW(gen_perturbation(0.1, 0, rng), InvalidPerturbation);
}

TEST(HessianSample, LinearGradientWithEqualSigns) {
  const double c = 0.01;
  const Vector delta{{c, c}};
  // a gradient with Jacobian I; equal signs give all-ones
  const auto h = hessian_sample_from_gradients(Vector(delta), Vector(-delta), delta);
  EXPECT_TRUE(h.matrix.isApprox(Matrix::Ones(2, 2), 1e-15));
  const Vector mixed{{c, -c}};
  const auto h2 = hessian_sample_from_gradients(Vector(mixed), Vector(-mixed), mixed);
  EXPECT_TRUE(h2.matrix.isApprox(Matrix{{1.0, -1.0}, {-1.0, 1.0}}, 1e-15));
}

TEST(HessianSample, RejectsZeroEntriesAndShapeMismatch) {
  EXPECT_THROW(hessian_sample_from_gradients(Vector::Ones(2), Vector::Ones(2), Vector{{0.01, 0.0}}),
               InvalidPerturbation);
  EXPECT_THROW(hessian_sample_from_gradients(Vector::Ones(3), Vector::Ones(2), Vector{{0.01, 0.01}}),
               InvalidParameter);
}

TEST(HessianSample, ExactlySymmetricForArbitraryGradients) {
  RandomStream rng(5);
  for (int k = 0; k < 200; ++k) {
    Vector a(4), b(4);
    for (int i = 0; i < 4; ++i) a(i) = rng.normal() * 1e3, b(i) = rng.normal() * 1e-3;
    const Perturbation d = gen_perturbation(0.013, 4, rng);
    EXPECT_TRUE(is_exactly_symmetric(hessian_sample_from_gradients(a, b, d).matrix));
  }
}

TEST(EstimateFIM, OneDimensionalQuadraticIsExact) {
  const auto model = quadratic(Matrix::Constant(1, 1, 2.5));
  for (std::size_t N : {1u, 7u, 100u}) {
    const FIMEstimate est = estimate_fim(model, Vector::Constant(1, 0.4), synthetic::Data{10}, config(N, 3));
    EXPECT_NEAR(est.matrix(0, 0), 2.5, 1e-12) << "N = " << N;
  }
}

TEST(EstimateFIM, QuadraticMeanWithinThreeStandardErrors) {
  const auto model = quadratic(kH);
  const FIMEstimate est = estimate_fim(model, Vector{{0.5, -0.5}}, synthetic::Data{10}, config(10000, 17));
  const Matrix se = est.standard_error();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(est.matrix(i, j) - kH(i, j)), 3.0 * se(i, j) + 1e-12);
  EXPECT_TRUE(is_exactly_symmetric(est.matrix));
}

TEST(EstimateFIM, SignPatternAverageIsExactOnQuadratics) {
  // Every Bernoulli pattern equally weighted: the cross terms cancel exactly
  const auto model = quadratic(kH);
  const Vector theta{{0.5, -0.5}};
  Matrix sum = Matrix::Zero(2, 2);
  const auto patterns = sign_patterns(2);
  for (const Vector& s : patterns) {
    const Vector d = 0.01 * s;
    sum += hessian_sample_from_gradients(model.score(theta + d, {}), model.score(theta - d, {}), d).matrix;
  }
  EXPECT_TRUE((-sum / static_cast<double>(patterns.size())).isApprox(kH, 1e-12));
}

TEST(EstimateFIM, ModesCoincideWhenDataDoNotMatter) {
  const auto model = quadratic(kH);
  const Vector theta{{0.1, 0.2}};
  const FIMEstimate obs = estimate_fim(model, theta, synthetic::Data{20}, config(500, 8, FimMode::observed));
  const FIMEstimate exp = estimate_fim(model, theta, synthetic::Data{20}, config(500, 8, FimMode::expected));
  EXPECT_EQ(obs.matrix, exp.matrix);
}

TEST(EstimateFIM, ThreadCountDoesNotChangeTheResult) {
  const GmmFit fit = gmm_fit(200);
  SPSAConfig one = config(300, 21, FimMode::expected);
  SPSAConfig many = one;
  many.threads = 4;
  const FIMEstimate a = estimate_fim(gmm::Model{}, fit.theta_star, fit.data, one);
  const FIMEstimate b = estimate_fim(gmm::Model{}, fit.theta_star, fit.data, many);
  EXPECT_EQ(a.matrix, b.matrix);
  EXPECT_EQ(a.per_sample_variance, b.per_sample_variance);
}

TEST(EstimateFIM, EverySampleIsSymmetric) {
  const GmmFit fit = gmm_fit(200);
  for (auto source : {GradientSource::direct_score, GradientSource::q_differences}) {
    SPSAConfig cfg = config(100, 4, FimMode::expected);
    cfg.gradient_source = source;
    for (const auto& s : hessian_samples(gmm::Model{}, fit.theta_star, fit.data, cfg))
      ASSERT_TRUE(is_exactly_symmetric(s.matrix)) << "replicate " << s.replicate;
  }
}

TEST(EstimateFIM, ReplicatesAreIndexed) {
  const auto samples = hessian_samples(quadratic(kH), Vector::Zero(2), synthetic::Data{1}, config(10, 1));
  for (std::size_t k = 0; k < samples.size(); ++k) EXPECT_EQ(samples[k].replicate, k);
}

TEST(EstimateFIM, DirectScoreRequiresTheCapability) {
  const WithoutScore<gmm::Model> hidden{gmm::Model{}};
  EXPECT_THROW(estimate_fim(hidden, kGmmTruth, gmm_sample(20), config(5, 1)), UnsupportedCapability);
}

TEST(EstimateFIM, ProbesOutsideTheDomainNameTheReplicate) {
  const gmm::Data data = gmm_sample(50);
  try {
    estimate_fim(gmm::Model{}, Vector{{0.995, 3.0, 0.0}}, data, config(50, 1));
    FAIL() << "expected PerturbationOutOfDomain";
  } catch (const PerturbationOutOfDomain& e) {
    EXPECT_LT(e.replicate(), 50u);
    EXPECT_NE(std::string(e.what()).find("coordinate 0"), std::string::npos);
  }
}

TEST(EstimateFIM, RejectsBadConfiguration) {
  EXPECT_THROW(config(0, 1).validate(), ConfigError);
  EXPECT_THROW(config(10, 1, FimMode::observed, 0.0).validate(), ConfigError);
}

TEST(EstimateFIM, StandardErrorShrinksWithN) {
  const GmmFit fit = gmm_fit(200);
  const FIMEstimate small = estimate_fim(gmm::Model{}, fit.theta_star, fit.data, config(400, 2));
  const FIMEstimate large = estimate_fim(gmm::Model{}, fit.theta_star, fit.data, config(6400, 2));
  // SE ∝ 1/√N, so 16x N roughly quarters it
  const double ratio = large.standard_error().norm() / small.standard_error().norm();
  EXPECT_GT(ratio, 0.15);
  EXPECT_LT(ratio, 0.35);
}

TEST(QDifferenceGradient, VanishesForSymmetricQuadraticQ) {
  const synthetic::QuadraticModel model(Vector::Zero(3), Matrix::Zero(3, 3), Matrix::Identity(3, 3));
  RandomStream rng(3);
  const Vector center{{0.25, -1.5, 2.0}};
  for (int k = 0; k < 20; ++k) {
    const Perturbation d = gen_perturbation(0.01, 3, rng);
    EXPECT_LT(s_hat_from_q(model, center, d.entries(), synthetic::Data{1}).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(QDifferenceGradient, LinearQGivesProjectedDirection) {
  const LinearQModel model{Vector{{1.0, -2.0, 0.5}}};
  const Vector d{{0.01, -0.01, 0.01}};
  const Vector s = s_hat_from_q(model, Vector{{1.0, 1.0, 1.0}}, d, synthetic::Data{1});
  const double proj = model.g.dot(d);
  for (int m = 0; m < 3; ++m) EXPECT_NEAR(s(m), proj / d(m), 1e-12);
}

TEST(QDifferenceGradient, MixtureAverageAgreesWithScore) {
  const gmm::Data data = gmm_sample(300);
  const gmm::Model model;
  const Vector center{{0.4, 2.0, 0.5}};
  const Vector s = s_value(model, center, data);

  // over every sign pattern the cross terms cancel, leaving O(c²) error
  Vector exact_avg = Vector::Zero(3);
  const auto patterns = sign_patterns(3);
  for (const Vector& p : patterns) exact_avg += s_hat_from_q(model, center, Vector(0.01 * p), data);
  exact_avg /= static_cast<double>(patterns.size());
  EXPECT_LE((exact_avg - s).norm() / s.norm(), 1e-3);

  // 10^3 random directions: the mean sits within the Monte Carlo band
  const int draws = 1000;
  std::vector<Vector> est;
  RandomStream rng(77, 0, StreamPurpose::perturbation);
  for (int k = 0; k < draws; ++k)
    est.push_back(s_hat_from_q(model, center, gen_perturbation(0.01, 3, rng).entries(), data));
  Vector mean = Vector::Zero(3);
  for (const auto& e : est) mean += e;
  mean /= draws;
  Vector var = Vector::Zero(3);
  for (const auto& e : est) var += (e - mean).cwiseAbs2();
  const Vector se = (var / (draws - 1.0) / draws).cwiseSqrt();
  for (int m = 0; m < 3; ++m) EXPECT_LE(std::abs(mean(m) - s(m)), 3.0 * se(m)) << "coordinate " << m;
}

TEST(QDifferencePath, QuadraticMatchesWithinStandardErrors) {
  const synthetic::QuadraticModel model(Vector::Zero(2), kH, Matrix{{0.5, 0.0}, {0.0, 0.25}});
  SPSAConfig cfg = config(10000, 31);
  cfg.gradient_source = GradientSource::q_differences;
  const FIMEstimate est = estimate_fim(model, Vector{{0.3, 0.1}}, synthetic::Data{1}, cfg);
  const Matrix se = est.standard_error();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(est.matrix(i, j) - kH(i, j)), 3.0 * se(i, j) + 1e-12);
}

TEST(BiasOrder, ExactExpectationApproachesLouisAsCShrinks) {
  // The estimator's expectation over the Bernoulli directions is an average over all sign patterns
  const GmmFit fit = gmm_fit();
  const gmm::Model model;
  const Matrix louis = louis_fim(model, fit.theta_star, fit.data);
  double previous = std::numeric_limits<double>::infinity();
  for (double c : {0.02, 0.01, 0.005}) {
    Matrix sum = Matrix::Zero(3, 3);
    const auto patterns = sign_patterns(3);
    for (const Vector& p : patterns) {
      const Vector d = c * p;
      sum += hessian_sample_from_gradients(model.score(fit.theta_star + d, fit.data),
                                           model.score(fit.theta_star - d, fit.data), d)
                 .matrix;
    }
    const double bias = (-sum / static_cast<double>(patterns.size()) - louis).norm();
    EXPECT_LT(bias, previous) << "c = " << c;
    previous = bias;
  }
}

TEST(Convergence, ErrorAgainstLouisShrinksWithN) {
  const GmmFit fit = gmm_fit();
  const Matrix louis = louis_fim(gmm::Model{}, fit.theta_star, fit.data);
  double small = 0.0, large = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    small += spectral_rel_error(estimate_fim(gmm::Model{}, fit.theta_star, fit.data, config(1000, seed)).matrix, louis);
    large += spectral_rel_error(estimate_fim(gmm::Model{}, fit.theta_star, fit.data, config(20000, seed)).matrix, louis);
  }
  EXPECT_LE(large, small);
}
