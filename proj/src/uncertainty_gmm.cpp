#include "uupl/uncertainty_gmm.hpp"

#include "uupl/errors.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numbers>

namespace uupl {

void GmmWeights::validate() const {
  if (!(w[3] > 0.0)) throw InvalidArgument("gmm weights must be positive");
  for (std::size_t i = 1; i < w.size(); ++i) {
    if (!(w[i - 1] > w[i])) throw InvalidArgument("gmm weights must satisfy w1 > w2 > w3 > w4 > 0");
  }
}

GmmModel::GmmModel(const PreferenceDataset& data, const GmmWeights& weights, double bandwidth,
                   std::optional<Vector> scale)
    : bandwidth_(bandwidth) {
  weights.validate();
  if (!(bandwidth > 0.0)) throw InvalidArgument("gmm bandwidth must be positive");
  const auto dim = static_cast<Eigen::Index>(data.dim());
  scale_ = scale.value_or(Vector::Ones(dim));
  if (data.num_points() > 0 && scale_.size() != dim) throw DimensionMismatch("gmm scale dimension mismatch");
  if ((scale_.array() <= 0.0).any()) throw InvalidArgument("gmm scale must be positive");
  norm_ = std::pow(2.0 * std::numbers::pi * bandwidth * bandwidth, -0.5 * static_cast<double>(dim));
  for (const auto& p : data.pairs()) {
    for (auto idx : {p.winner, p.loser}) {
      centers_.push_back(data.points()[idx].cwiseQuotient(scale_));
      weights_.push_back(weights[p.level]);
    }
  }
}

GmmModel GmmModel::for_domain(const PreferenceDataset& data, const GmmWeights& weights, const Domain& domain,
                              double bandwidth_fraction) {
  domain.validate();
  return GmmModel(data, weights, bandwidth_fraction, domain.extent());
}

double GmmModel::density(const FeaturePoint& x) const {
  if (centers_.empty()) return 1.0;
  if (x.size() != scale_.size()) throw DimensionMismatch("gmm density: dimension mismatch");
  const Vector z = x.cwiseQuotient(scale_);
  const double inv_two_var = 0.5 / (bandwidth_ * bandwidth_);
  double sum = 0.0;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    sum += weights_[i] * std::exp(-inv_two_var * (z - centers_[i]).squaredNorm());
  }
  return 1.0 + norm_ * sum;
}

double gmm_density(const GmmModel& model, const FeaturePoint& x) { return model.density(x); }

ScaledPrediction scale_covariance(const PredictiveDistribution& pred, double g1, double g2) {
  if (!(g1 >= 1.0) || !(g2 >= 1.0)) throw InvalidArgument("scale_covariance: G values must be >= 1");
  ScaledPrediction out;
  out.mu = pred.mu;
  out.g1 = g1;
  out.g2 = g2;
  const Eigen::Vector2d inv(1.0 / g1, 1.0 / g2);
  out.sigma_prime = inv.asDiagonal() * pred.sigma * inv.asDiagonal();
  for (int i = 0; i < 2; ++i) {
    if (out.sigma_prime(i, i) < 0.0) {
      spdlog::debug("scale_covariance: clamped variance {} to zero", out.sigma_prime(i, i));
      out.sigma_prime(i, i) = 0.0;
    }
  }
  return out;
}

double joint_variance_term(const Eigen::Matrix2d& sigma_prime) {
  const double g = sigma_prime(0, 0) + sigma_prime(1, 1) - 2.0 * sigma_prime(0, 1);
  if (g < 0.0) {
    spdlog::debug("joint variance term {} clamped to zero", g);
    return 0.0;
  }
  return g;
}

}  // namespace uupl
