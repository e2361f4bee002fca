#include "uupl/errors.hpp"
#include "uupl/simulation.hpp"
#include "uupl/uncertainty_gmm.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace uupl;

namespace {

FeaturePoint pt(double x) { return FeaturePoint::Constant(1, x); }

double normal_pdf_1d(double d, double sigma) {
  return std::exp(-0.5 * d * d / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST_CASE("empty dataset gives the bare constant") {
  const GmmModel g(PreferenceDataset{}, GmmWeights{}, 0.3);
  CHECK(g.density(pt(4.0)) == 1.0);
  CHECK(GmmModel::identity().density(pt(-2.0)) == 1.0);
}

TEST_CASE("one level-1 pair in 1D with unit bandwidth") {
  PreferenceDataset d;
  d.add_comparison(pt(0.0), pt(1.7), UncertaintyLevel::VeryConfident);
  const GmmWeights w;
  const GmmModel g(d, w, 1.0);
  const double expected = 1.0 + w.w[0] / std::sqrt(2.0 * std::numbers::pi) + w.w[0] * normal_pdf_1d(1.7, 1.0);
  CHECK(std::abs(g.density(pt(0.0)) - expected) < 1e-14);
  CHECK(g.num_components() == 2);
}

TEST_CASE("density matches a direct sum in two dimensions") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  PreferenceDataset d;
  for (int i = 0; i < 6; ++i) {
    FeaturePoint a(2), b(2);
    a << ud(rng), ud(rng);
    b << ud(rng), ud(rng);
    d.add_comparison(a, b, level_from_int(1 + i % 4));
  }
  const GmmWeights w;
  const double sigma = 0.4;
  const GmmModel g(d, w, sigma);
  for (int t = 0; t < 20; ++t) {
    FeaturePoint x(2);
    x << ud(rng), ud(rng);
    double sum = 1.0;
    for (const auto& p : d.pairs()) {
      for (auto idx : {p.winner, p.loser}) {
        const double r2 = (x - d.points()[idx]).squaredNorm();
        sum += w[p.level] * std::exp(-0.5 * r2 / (sigma * sigma)) / (2.0 * std::numbers::pi * sigma * sigma);
      }
    }
    CHECK(std::abs(g.density(x) - sum) < 1e-12 * sum);
  }
}

TEST_CASE("far from every component G is 1") {
  PreferenceDataset d;
  d.add_comparison(pt(0.0), pt(0.5), UncertaintyLevel::VeryConfident);
  const GmmModel g(d, GmmWeights{}, 0.1);
  CHECK(std::abs(g.density(pt(0.5 + 8 * 0.1)) - 1.0) < 1e-10);
  CHECK(std::abs(g.density(pt(-0.8)) - 1.0) < 1e-10);
}

TEST_CASE("domain scaling divides by the extent") {
  Domain dom;
  dom.lower = pt(10.0);
  dom.upper = pt(26.0);
  PreferenceDataset d;
  d.add_comparison(pt(19.0), pt(12.0), UncertaintyLevel::Confident);
  const GmmWeights w;
  const auto g = GmmModel::for_domain(d, w, dom, 0.05);
  const double expected = 1.0 + w.w[1] * (normal_pdf_1d(0.0, 0.05) + normal_pdf_1d(7.0 / 16.0, 0.05));
  CHECK(g.density(pt(19.0)) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("weights must be strictly decreasing and positive") {
  CHECK_NOTHROW(GmmWeights{}.validate());
  CHECK_THROWS_AS((GmmWeights{{1.0, 1.0, 0.3, 0.1}}.validate()), InvalidArgument);
  CHECK_THROWS_AS((GmmWeights{{1.0, 0.6, 0.3, 0.0}}.validate()), InvalidArgument);
  CHECK_THROWS_AS(GmmModel(PreferenceDataset{}, GmmWeights{}, 0.0), InvalidArgument);
}

TEST_CASE("scale_covariance") {
  PredictiveDistribution p;
  p.mu = Eigen::Vector2d(0.3, -0.2);
  p.sigma << 1.0, 0.3, 0.3, 2.0;

  const auto same = scale_covariance(p, 1.0, 1.0);
  CHECK((same.sigma_prime - p.sigma).norm() == 0.0);
  CHECK(same.mu == p.mu);

  const auto quarter = scale_covariance(p, 2.0, 2.0);
  CHECK((quarter.sigma_prime - 0.25 * p.sigma).norm() < 1e-15);

  const auto s = scale_covariance(p, 1.5, 3.0);
  // 1/1.5^2, 0.3/(1.5*3), 2/3^2
  CHECK(std::abs(s.sigma_prime(0, 0) - 0.4444) < 5e-5);
  CHECK(std::abs(s.sigma_prime(0, 1) - 0.0667) < 5e-5);
  CHECK(std::abs(s.sigma_prime(1, 0) - 0.0667) < 5e-5);
  CHECK(std::abs(s.sigma_prime(1, 1) - 0.2222) < 5e-5);
  CHECK(s.g1 == 1.5);
  CHECK(s.g2 == 3.0);

  CHECK_THROWS_AS(scale_covariance(p, 0.99, 1.0), InvalidArgument);
  CHECK_THROWS_AS(scale_covariance(p, 1.0, 0.5), InvalidArgument);
}

TEST_CASE("joint variance term is the variance of the scaled difference") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ug(1.0, 5.0);
  for (int t = 0; t < 500; ++t) {
    Eigen::Matrix2d A;
    A << nd(rng), nd(rng), nd(rng), nd(rng);
    PredictiveDistribution p;
    p.sigma = A * A.transpose();
    const double g1 = ug(rng), g2 = ug(rng);
    const auto s = scale_covariance(p, g1, g2);
    const Eigen::Vector2d a(1.0 / g1, -1.0 / g2);
    const double direct = a.dot(p.sigma * a);
    CHECK(joint_variance_term(s.sigma_prime) >= 0.0);
    CHECK(std::abs(joint_variance_term(s.sigma_prime) - std::max(direct, 0.0)) < 1e-10 * (1 + direct));
    CHECK(s.sigma_prime(0, 0) <= p.sigma(0, 0));
    CHECK(s.sigma_prime(1, 1) <= p.sigma(1, 1));
    CHECK(s.sigma_prime.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > -1e-8);
  }
  Eigen::Matrix2d rounding;
  rounding << 1.0, 1.0 + 1e-12, 1.0 + 1e-12, 1.0;
  CHECK(joint_variance_term(rounding) == 0.0);
}

TEST_CASE("a more confident answer never lowers G") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    PreferenceDataset base;
    for (int i = 0; i < 4; ++i) base.add_comparison(pt(ud(rng)), pt(ud(rng) + 2.0), level_from_int(1 + i % 4));
    PreferenceDataset unsure = base, sure = base;
    const FeaturePoint a = pt(ud(rng)), b = pt(ud(rng) + 2.0);
    unsure.add_comparison(a, b, UncertaintyLevel::VeryUncertain);
    sure.add_comparison(a, b, UncertaintyLevel::VeryConfident);
    const GmmModel gu(unsure, GmmWeights{}, 0.2), gs(sure, GmmWeights{}, 0.2);
    for (double x = -1.0; x <= 4.0; x += 0.05) CHECK(gs.density(pt(x)) >= gu.density(pt(x)));
  }
}

TEST_CASE("a far pair leaves G unchanged") {
  PreferenceDataset d;
  d.add_comparison(pt(0.0), pt(0.3), UncertaintyLevel::Confident);
  PreferenceDataset more = d;
  more.add_comparison(pt(5.0), pt(6.0), UncertaintyLevel::VeryConfident);
  const double sigma = 0.5;
  const GmmModel a(d, GmmWeights{}, sigma), b(more, GmmWeights{}, sigma);
  for (double x = -1.0; x <= 5.0 - 8.01 * sigma; x += 0.01) CHECK(std::abs(a.density(pt(x)) - b.density(pt(x))) < 1e-10);
}

TEST_CASE("19 compared against every other integer gives the least scaled spread at 19") {
  const auto task = GroundTruthTask::thermal();
  const auto m = MethodConfig::full(task);
  PreferenceDataset d;
  const FeaturePoint a = pt(19.0);
  for (int t = 10; t <= 26; ++t) {
    if (t == 19) continue;
    const FeaturePoint b = pt(t);
    if (task.evaluate(a) >= task.evaluate(b)) {
      d.add_comparison(a, b, UncertaintyLevel::VeryConfident);
    } else {
      d.add_comparison(b, a, UncertaintyLevel::VeryConfident);
    }
  }
  REQUIRE(d.num_pairs() == 16);
  const auto state = PosteriorState::fit(d, m.kernel, m.engine_factors(), m.laplace);
  const auto g = m.gmm_for(d, task.domain());
  double best = INFINITY, at = 0.0;
  for (int i = 0; i <= 160; ++i) {
    const FeaturePoint x = pt(10.0 + 0.1 * i);
    const double sd = std::sqrt(state.predict_variance(x)) / g.density(x);
    if (sd < best) {
      best = sd;
      at = x[0];
    }
  }
  CHECK(at == doctest::Approx(19.0));
}
