#include "oracles.hpp"
#include "uupl/calibration.hpp"
#include "uupl/errors.hpp"
#include "uupl/preference_gp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace uupl;

namespace {

FeaturePoint pt(double x) { return FeaturePoint::Constant(1, x); }

UncertaintyFactors unit_factors() { return UncertaintyFactors{{1.0, 2.0, 4.0, 8.0}}; }

PreferenceDataset random_dataset(std::mt19937_64& rng, int n_points, int n_pairs) {
  std::uniform_real_distribution<double> ud(0.0, 5.0);
  std::uniform_int_distribution<int> lvl(1, 4);
  std::vector<FeaturePoint> pts;
  for (int i = 0; i < n_points; ++i) pts.push_back(pt(ud(rng)));
  PreferenceDataset d;
  std::uniform_int_distribution<int> pick(0, n_points - 1);
  while (static_cast<int>(d.num_pairs()) < n_pairs) {
    const int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    d.add_comparison(pts[a], pts[b], level_from_int(lvl(rng)));
  }
  return d;
}

}  // namespace

TEST_CASE("choice_probability") {
  CHECK(choice_probability(0.0, 0.3) == 0.5);
  CHECK(choice_probability(0.0, 30.0) == 0.5);
  CHECK(std::abs(choice_probability(1.0, 0.1) - 1.0) < 1e-12);
  CHECK(std::abs(choice_probability(1.0, 3.0) - oracle::normal_cdf(1.0 / 3.0)) < 1e-13);
  CHECK(std::abs(choice_probability(1.0, 3.0) - 0.630559) < 5e-7);
  CHECK(choice_probability(1.0, 1.0) > choice_probability(1.0, 2.0));
  CHECK(choice_probability(0.5, 1.0) < choice_probability(1.0, 1.0));
  CHECK_THROWS_AS(choice_probability(1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(choice_probability(1.0, -1.0), InvalidArgument);
}

TEST_CASE("dataset merges duplicate points and rejects self comparisons") {
  PreferenceDataset d;
  d.add_comparison(pt(19.0), pt(10.0), UncertaintyLevel::VeryConfident);
  d.add_comparison(pt(19.0), pt(11.0), UncertaintyLevel::Confident);
  CHECK(d.num_points() == 3);
  CHECK(d.pairs()[1].winner == 0);
  CHECK_THROWS_AS(d.add_comparison(pt(3.0), pt(3.0), UncertaintyLevel::VeryConfident), InvalidArgument);
  CHECK_THROWS_AS(d.add_pair({0, 7, UncertaintyLevel::VeryConfident}), InvalidArgument);
  CHECK_THROWS_AS(level_from_int(5), InvalidArgument);
  CHECK_THROWS_AS(level_from_int(0), InvalidArgument);
}

TEST_CASE("log_likelihood") {
  PreferenceDataset empty;
  CHECK(log_likelihood(empty, Vector(0), unit_factors()) == 0.0);

  PreferenceDataset one;
  one.add_comparison(pt(1.0), pt(2.0), UncertaintyLevel::Confident);
  CHECK(log_likelihood(one, Vector::Zero(2), unit_factors()) == doctest::Approx(std::log(0.5)));

  PreferenceDataset two = one;
  two.add_comparison(pt(1.0), pt(2.0), UncertaintyLevel::Confident);
  Vector f(2);
  f << 0.4, -0.3;
  CHECK(log_likelihood(two, f, unit_factors()) == doctest::Approx(2.0 * log_likelihood(one, f, unit_factors())));
  CHECK(log_likelihood(one, f, unit_factors()) == doctest::Approx(std::log(oracle::normal_cdf(0.7 / 2.0))));
  CHECK_THROWS_AS(log_likelihood(one, Vector::Zero(3), unit_factors()), DimensionMismatch);
}

TEST_CASE("laplace_mode on an empty dataset is the prior mode") {
  PreferenceDataset d;
  d.add_point(pt(1.0));
  d.add_point(pt(2.0));
  KernelConfig cfg;
  const Matrix K = build_covariance(d.points(), cfg);
  const auto r = laplace_mode(d, K, unit_factors());
  CHECK(r.f_lap.norm() == 0.0);
  CHECK(r.W.norm() == 0.0);
}

TEST_CASE("laplace_mode with a nearly flat likelihood barely moves") {
  PreferenceDataset d;
  d.add_comparison(pt(0.0), pt(1.0), UncertaintyLevel::VeryConfident);
  const Matrix K = build_covariance(d.points(), KernelConfig{});
  const auto r = laplace_mode(d, K, UncertaintyFactors::uniform(1e6));
  CHECK(std::abs(r.f_lap[0] - r.f_lap[1]) < 1e-3);
}

TEST_CASE("laplace_mode matches a brute-force maximizer for one pair") {
  for (double rho : {0.0, 0.5, 0.9}) {
    for (double u : {0.1, 1.0, 10.0}) {
      Matrix K(2, 2);
      K << 1 + 1e-6, rho, rho, 1 + 1e-6;
      PreferenceDataset d;
      d.add_comparison(pt(0.0), pt(1.0), UncertaintyLevel::VeryConfident);
      const auto r = laplace_mode(d, K, UncertaintyFactors::uniform(u));
      const auto best =
          oracle::grid_argmax([&](double a, double b) { return oracle::single_pair_objective(a, b, rho, u); }, -6, 6);
      CAPTURE(rho);
      CAPTURE(u);
      CHECK(std::abs((r.f_lap[0] - r.f_lap[1]) - (best[0] - best[1])) < 1e-4);
    }
  }
}

TEST_CASE("laplace objective gradient and Hessian action match finite differences") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  KernelConfig cfg;
  cfg.gamma = 0.4;
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_dataset(rng, 8, 12);
    const Matrix K = build_covariance(d.points(), cfg);
    const auto n = static_cast<Eigen::Index>(d.num_points());
    const Vector f = Vector::NullaryExpr(n, [&] { return nd(rng); });
    const auto obj = laplace_objective(d, K, f, unit_factors());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector fp = f, fm = f;
      fp[i] += h;
      fm[i] -= h;
      const double fd =
          (laplace_objective(d, K, fp, unit_factors()).value - laplace_objective(d, K, fm, unit_factors()).value) /
          (2 * h);
      CHECK(std::abs(fd - obj.gradient[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
    const Vector v = Vector::NullaryExpr(n, [&] { return nd(rng); });
    const Matrix W = likelihood_terms(d, f, unit_factors()).neg_hessian;
    const Vector Hv = -(W * v + solve_spd(K, v));
    const Vector fd = (laplace_objective(d, K, f + h * v, unit_factors()).gradient -
                       laplace_objective(d, K, f - h * v, unit_factors()).gradient) /
                      (2 * h);
    CHECK((fd - Hv).norm() <= 1e-5 * std::max(1.0, Hv.norm()));
  }
}

TEST_CASE("converged posterior satisfies the state invariants") {
  std::mt19937_64 rng(99);
  KernelConfig cfg;
  cfg.gamma = 0.5;
  for (int trial = 0; trial < 15; ++trial) {
    const auto d = random_dataset(rng, 10, 15);
    const auto s = PosteriorState::fit(d, cfg, unit_factors());
    const auto obj = laplace_objective(d, s.K(), s.f_lap(), unit_factors());
    CHECK(obj.gradient.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(obj.value >= laplace_objective(d, s.K(), Vector::Zero(s.f_lap().size()), unit_factors()).value);
    CHECK(s.iterations() <= 100);
    const Matrix& W = s.W();
    CHECK(W.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(W).eigenvalues().minCoeff() > -1e-10);
    const Matrix H = -(W + s.K().inverse());
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (H + H.transpose())).eigenvalues().maxCoeff() < 0.0);
  }
}

TEST_CASE("posterior_covariance") {
  const Matrix K = (Matrix(2, 2) << 1.0, 0.3, 0.3, 1.0).finished();
  CHECK((posterior_covariance(K, Matrix::Zero(2, 2)) - K).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((posterior_covariance(Matrix::Identity(3, 3), Matrix::Identity(3, 3)) - 0.5 * Matrix::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix A = oracle::random_spd(4, rng);
    Matrix B = oracle::random_spd(4, rng);
    B /= 10.0;
    const Matrix expected = (B + A.inverse()).inverse();
    CHECK((posterior_covariance(A, B) - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("prediction with no data is the prior") {
  const auto s = PosteriorState::fit(PreferenceDataset{}, KernelConfig{}, unit_factors());
  const auto p = s.predict(pt(0.0), pt(0.5));
  CHECK(p.mu.norm() == 0.0);
  CHECK(p.sigma(0, 0) == doctest::Approx(1.0 + 1e-6));
  CHECK(p.sigma(0, 1) == doctest::Approx(std::exp(-0.25)));
}

TEST_CASE("noise-free interpolation leaves no variance at training points") {
  // K_t - k_t^T K^{-1} k_t, the W -> infinity limit of the predictive covariance.
  const std::vector<FeaturePoint> pts{pt(0.0), pt(0.7), pt(2.0)};
  KernelConfig cfg;
  const Matrix K = build_covariance(pts, cfg);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Vector k(3);
    for (int j = 0; j < 3; ++j) k[j] = jittered_kernel(pts[j], pts[i], cfg);
    const double residual = jittered_kernel(pts[i], pts[i], cfg) - k.dot(solve_spd(K, k).col(0));
    CHECK(std::abs(residual) < 1e-5);
  }
}

TEST_CASE("prediction matches an explicit-matrix implementation") {
  std::mt19937_64 rng(17);
  KernelConfig cfg;
  cfg.gamma = 0.6;
  const auto d = random_dataset(rng, 6, 5);
  const auto s = PosteriorState::fit(d, cfg, unit_factors());
  const auto& X = d.points();
  const auto n = static_cast<int>(X.size());
  Matrix K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = std::exp(-cfg.gamma * (X[i] - X[j]).squaredNorm()) + (i == j ? cfg.jitter : 0.0);
  const Matrix Kinv = K.inverse();
  // (K + W^{-1})^{-1} written without W^{-1}, which does not exist for pairwise data.
  const Matrix reduce = Kinv - Kinv * (s.W() + Kinv).inverse() * Kinv;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const FeaturePoint a = pt(5.0 * t / 99.0), b = pt(5.0 - 5.0 * t / 99.0);
    Matrix kt(n, 2);
    for (int i = 0; i < n; ++i) {
      kt(i, 0) = std::exp(-cfg.gamma * (X[i] - a).squaredNorm());
      kt(i, 1) = std::exp(-cfg.gamma * (X[i] - b).squaredNorm());
    }
    Eigen::Matrix2d Kt;
    Kt << 1 + cfg.jitter, std::exp(-cfg.gamma * (a - b).squaredNorm()), std::exp(-cfg.gamma * (a - b).squaredNorm()),
        1 + cfg.jitter;
    const Eigen::Vector2d mu = kt.transpose() * Kinv * s.f_lap();
    const Eigen::Matrix2d sigma = Kt - kt.transpose() * reduce * kt;
    const auto p = s.predict(a, b);
    worst = std::max(worst, (p.mu - mu).cwiseAbs().maxCoeff());
    worst = std::max(worst, (p.sigma - sigma).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
  for (int i = 0; i < n; ++i) CHECK(std::abs(s.predict_mean(X[i]) - s.f_lap()[i]) < 1e-8);
}

TEST_CASE("predictive covariance is symmetric PSD") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ud(0.0, 5.0);
  KernelConfig cfg;
  cfg.gamma = 0.5;
  const auto s = PosteriorState::fit(random_dataset(rng, 9, 14), cfg, unit_factors());
  for (int t = 0; t < 200; ++t) {
    const auto p = s.predict(pt(ud(rng)), pt(ud(rng)));
    CHECK(std::abs(p.sigma(0, 1) - p.sigma(1, 0)) < 1e-12);
    CHECK(p.sigma.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > -1e-8);
    CHECK(p.sigma(0, 0) >= 0.0);
    const double denom = std::sqrt(p.sigma(0, 0) * p.sigma(1, 1));
    if (denom > 1e-12) CHECK(std::abs(p.sigma(0, 1)) / denom <= 1.0 + 1e-8);
  }
}

TEST_CASE("relabeling points leaves the mode unchanged") {
  std::mt19937_64 rng(31);
  KernelConfig cfg;
  cfg.gamma = 0.5;
  const auto d = random_dataset(rng, 7, 10);
  PreferenceDataset r;
  for (auto it = d.points().rbegin(); it != d.points().rend(); ++it) r.add_point(*it);
  for (const auto& p : d.pairs()) r.add_comparison(d.points()[p.winner], d.points()[p.loser], p.level);
  const auto a = PosteriorState::fit(d, cfg, unit_factors());
  const auto b = PosteriorState::fit(r, cfg, unit_factors());
  for (std::size_t i = 0; i < d.num_points(); ++i) {
    const auto j = d.num_points() - 1 - i;
    CHECK(std::abs(a.f_lap()[static_cast<Eigen::Index>(i)] - b.f_lap()[static_cast<Eigen::Index>(j)]) < 1e-10);
  }
}

TEST_CASE("mode gap shrinks across the default levels") {
  const auto& factors = default_uncertainty_factors();
  Matrix K(2, 2);
  K << 1 + 1e-6, 0.5, 0.5, 1 + 1e-6;
  double prev = INFINITY;
  for (auto l : kAllLevels) {
    PreferenceDataset d;
    d.add_comparison(pt(0.0), pt(1.0), l);
    const auto r = laplace_mode(d, K, factors);
    const double gap = r.f_lap[0] - r.f_lap[1];
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("level-1 answers without conflicts are ranked correctly") {
  KernelConfig cfg;
  cfg.gamma = 0.3;
  PreferenceDataset d;
  // a chain 4 > 3 > 2 > 1 > 0 plus a few consistent long-range pairs
  for (int i = 0; i < 4; ++i) d.add_comparison(pt(i + 1.0), pt(i), UncertaintyLevel::VeryConfident);
  d.add_comparison(pt(4.0), pt(0.0), UncertaintyLevel::VeryConfident);
  d.add_comparison(pt(3.0), pt(1.0), UncertaintyLevel::VeryConfident);
  const auto s = PosteriorState::fit(d, cfg, default_uncertainty_factors());
  for (const auto& p : d.pairs()) CHECK(s.f_lap()[p.winner] > s.f_lap()[p.loser]);
}

TEST_CASE("contradictory pairs and single-level streams still fit") {
  PreferenceDataset d;
  d.add_comparison(pt(0.0), pt(1.0), UncertaintyLevel::VeryUncertain);
  d.add_comparison(pt(1.0), pt(0.0), UncertaintyLevel::VeryUncertain);
  const auto s = PosteriorState::fit(d, KernelConfig{}, default_uncertainty_factors());
  CHECK(std::abs(s.f_lap()[0] - s.f_lap()[1]) < 1e-10);
}

TEST_CASE("laplace_mode reports non-convergence with the gradient norm") {
  PreferenceDataset d;
  d.add_comparison(pt(0.0), pt(1.0), UncertaintyLevel::VeryConfident);
  const Matrix K = build_covariance(d.points(), KernelConfig{});
  LaplaceOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-300;
  try {
    laplace_mode(d, K, UncertaintyFactors::uniform(0.05), opts);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.iterations() == 1);
    CHECK(e.grad_norm() > 0.0);
  }
}
