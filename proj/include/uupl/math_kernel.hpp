#pragma once

#include "uupl/types.hpp"

#include <cstdint>
#include <span>

namespace uupl {

/// RBF kernel settings. `jitter` is added wherever two points coincide.
struct KernelConfig {
  double gamma = 1.0;
  double jitter = 1e-6;

  void validate() const;
};

// Standard normal helpers. All reject non-finite input.
double std_normal_cdf(double z);
double std_normal_pdf(double z);
/// ln Phi(z), accurate deep into the lower tail.
double log_std_normal_cdf(double z);
/// phi(z) / Phi(z), the derivative of ln Phi(z).
double inverse_mills_ratio(double z);

/// Entropy of a Bernoulli(p) variable in bits.
double binary_entropy(double p);

/// exp(-gamma * ||x1 - x2||^2), no jitter.
double rbf_kernel(const FeaturePoint& x1, const FeaturePoint& x2, const KernelConfig& cfg);

/// Covariance between two points including the jitter term, which applies
/// when the points coincide (max-abs difference below 1e-12).
double jittered_kernel(const FeaturePoint& x1, const FeaturePoint& x2, const KernelConfig& cfg);

/// Dense covariance over `points` with jitter on the diagonal.
/// Throws NotPositiveDefinite if the jittered matrix cannot be Cholesky-factorized.
Matrix build_covariance(std::span<const FeaturePoint> points, const KernelConfig& cfg);

/// Cross covariance: rows index `points`, columns index `tests`.
Matrix cross_covariance(std::span<const FeaturePoint> points, std::span<const FeaturePoint> tests,
                        const KernelConfig& cfg);

/// Solves A X = B for symmetric positive definite A via Cholesky.
/// DimensionMismatch for shape errors, NotPositiveDefinite when A is not SPD.
Matrix solve_spd(const Matrix& A, const Matrix& B);

/// Pearson correlation. Throws UndefinedCorrelation if either input is constant.
double sample_correlation(std::span<const double> predicted, std::span<const double> truth);

/// 0.5 / median pairwise squared distance over a coarse lattice of `domain`.
double median_heuristic_gamma(const Domain& domain);
double median_heuristic_gamma(std::span<const FeaturePoint> points);

bool same_point(const FeaturePoint& a, const FeaturePoint& b, double tol = 1e-12);

/// One round of the SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace uupl
