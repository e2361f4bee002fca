#pragma once

#include "uupl/math_kernel.hpp"
#include "uupl/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace uupl {

/// Self-reported confidence for one answer. 1 is very confident, 4 very uncertain.
enum class UncertaintyLevel : std::uint8_t {
  VeryConfident = 1,
  Confident = 2,
  Uncertain = 3,
  VeryUncertain = 4,
};

inline constexpr std::array<UncertaintyLevel, 4> kAllLevels = {
    UncertaintyLevel::VeryConfident, UncertaintyLevel::Confident, UncertaintyLevel::Uncertain,
    UncertaintyLevel::VeryUncertain};

/// Throws InvalidArgument unless 1 <= level <= 4.
UncertaintyLevel level_from_int(int level);
inline int to_int(UncertaintyLevel l) { return static_cast<int>(l); }
inline std::size_t level_index(UncertaintyLevel l) { return static_cast<std::size_t>(l) - 1; }

/// Probit standard deviation per level; strictly increasing with the level.
struct UncertaintyFactors {
  std::array<double, 4> u{};

  double operator[](UncertaintyLevel l) const { return u[level_index(l)]; }
  void validate() const;

  /// Same factor for every level. Used to switch the level-aware likelihood off.
  /// Deliberately skips the ordering check.
  static UncertaintyFactors uniform(double value);
};

struct PreferencePair {
  std::size_t winner = 0;
  std::size_t loser = 0;
  UncertaintyLevel level = UncertaintyLevel::VeryConfident;
};

/// Unique feature points plus comparisons that index into them. Points closer
/// than 1e-12 (max-abs) are merged on insertion.
class PreferenceDataset {
 public:
  PreferenceDataset() = default;

  std::size_t add_point(const FeaturePoint& x);
  /// Adds `winner` preferred over `loser`. Throws if they coincide.
  void add_comparison(const FeaturePoint& winner, const FeaturePoint& loser, UncertaintyLevel level);
  void add_pair(const PreferencePair& pair);

  const std::vector<FeaturePoint>& points() const { return points_; }
  const std::vector<PreferencePair>& pairs() const { return pairs_; }
  std::size_t num_points() const { return points_.size(); }
  std::size_t num_pairs() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  /// Feature dimension, 0 while no point was added.
  std::size_t dim() const { return points_.empty() ? 0 : static_cast<std::size_t>(points_.front().size()); }

 private:
  std::vector<FeaturePoint> points_;
  std::vector<PreferencePair> pairs_;
};

/// Phi(delta / u).
double choice_probability(double delta_reward, double u);

double log_likelihood(const PreferenceDataset& data, const Vector& f, const UncertaintyFactors& factors);

/// Log-likelihood with its gradient and negative Hessian W at `f`.
struct LikelihoodTerms {
  double value = 0.0;
  Vector gradient;
  Matrix neg_hessian;
};
LikelihoodTerms likelihood_terms(const PreferenceDataset& data, const Vector& f,
                                 const UncertaintyFactors& factors);

/// S(f) = log-likelihood - 0.5 f^T K^{-1} f and its gradient.
struct Objective {
  double value = 0.0;
  Vector gradient;
};
Objective laplace_objective(const PreferenceDataset& data, const Matrix& K, const Vector& f,
                            const UncertaintyFactors& factors);

struct LaplaceOptions {
  int max_iter = 100;
  double tol = 1e-8;
};

struct LaplaceResult {
  Vector f_lap;
  Matrix W;
  int iterations = 0;
  double grad_norm = 0.0;
};

/// Posterior mode by damped Newton from f = 0. Throws ConvergenceError when the
/// gradient tolerance is not met, NumericalError when a step breaks down.
LaplaceResult laplace_mode(const PreferenceDataset& data, const Matrix& K, const UncertaintyFactors& factors,
                           const LaplaceOptions& opts = {});

/// (W + K^{-1})^{-1} without forming K^{-1}.
Matrix posterior_covariance(const Matrix& K, const Matrix& W);

struct PredictiveDistribution {
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
};

/// A fitted model. Immutable; prediction is safe from several threads.
class PosteriorState {
 public:
  static PosteriorState fit(PreferenceDataset data, const KernelConfig& kernel,
                            const UncertaintyFactors& factors, const LaplaceOptions& opts = {});

  PredictiveDistribution predict(const FeaturePoint& x1, const FeaturePoint& x2) const;
  double predict_mean(const FeaturePoint& x) const;
  /// Marginal variance at one point, clamped at zero.
  double predict_variance(const FeaturePoint& x) const;
  /// Means over many points at once.
  Vector predict_means(std::span<const FeaturePoint> xs) const;
  /// Marginal variances over many points at once.
  Vector predict_variances(std::span<const FeaturePoint> xs) const;

  const PreferenceDataset& dataset() const { return data_; }
  const KernelConfig& kernel() const { return kernel_; }
  const UncertaintyFactors& factors() const { return factors_; }
  const Matrix& K() const { return K_; }
  const Vector& f_lap() const { return f_lap_; }
  const Matrix& W() const { return W_; }
  /// (W + K^{-1})^{-1}
  const Matrix& laplace_covariance() const { return cov_; }
  /// (K + W^{-1})^{-1}, the matrix the predictive covariance subtracts.
  const Matrix& variance_reduction() const { return reduce_; }
  int iterations() const { return iterations_; }

 private:
  PreferenceDataset data_;
  KernelConfig kernel_;
  UncertaintyFactors factors_;
  Matrix K_;
  Vector f_lap_;
  Matrix W_;
  Vector alpha_;  // K^{-1} f_lap
  Matrix cov_;
  Matrix reduce_;
  int iterations_ = 0;
};

}  // namespace uupl
