#pragma once

#include "uupl/preference_gp.hpp"
#include "uupl/types.hpp"

#include <array>
#include <optional>
#include <vector>

namespace uupl {

/// Mixture weight per uncertainty level; confident answers weigh more.
struct GmmWeights {
  std::array<double, 4> w{1.0, 0.6, 0.3, 0.1};

  double operator[](UncertaintyLevel l) const { return w[level_index(l)]; }
  /// Requires w1 > w2 > w3 > w4 > 0.
  void validate() const;
};

/// G(x) = 1 + sum over answered pairs and both members of w(level) * N(x; member, sigma^2 I).
///
/// Features are divided by `scale` (per dimension) before the density is
/// evaluated, so `bandwidth` is in scaled units. With the default unit scale
/// the density lives in raw feature units.
class GmmModel {
 public:
  GmmModel() = default;
  GmmModel(const PreferenceDataset& data, const GmmWeights& weights, double bandwidth,
           std::optional<Vector> scale = std::nullopt);

  /// Disabled model: G == 1 everywhere.
  static GmmModel identity() { return GmmModel(); }

  /// Default bandwidth 0.1 over features normalized by the domain extent.
  static GmmModel for_domain(const PreferenceDataset& data, const GmmWeights& weights, const Domain& domain,
                             double bandwidth_fraction = 0.1);

  double density(const FeaturePoint& x) const;

  double bandwidth() const { return bandwidth_; }
  std::size_t num_components() const { return centers_.size(); }

 private:
  std::vector<Vector> centers_;  // already divided by scale_
  std::vector<double> weights_;
  Vector scale_;
  double bandwidth_ = 1.0;
  double norm_ = 0.0;  // (2 pi sigma^2)^{-n/2}
};

/// Same as GmmModel::density; free-function form.
double gmm_density(const GmmModel& model, const FeaturePoint& x);

struct ScaledPrediction {
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sigma_prime = Eigen::Matrix2d::Zero();
  double g1 = 1.0;
  double g2 = 1.0;
};

/// Sigma' = diag(g)^{-1} Sigma diag(g)^{-1}; the mean passes through.
/// Throws InvalidArgument for g < 1.
ScaledPrediction scale_covariance(const PredictiveDistribution& pred, double g1, double g2);

/// Var'(x1) + Var'(x2) - 2 Cov', clamped at zero.
double joint_variance_term(const Eigen::Matrix2d& sigma_prime);

}  // namespace uupl
