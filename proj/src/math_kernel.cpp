#include "uupl/math_kernel.hpp"

#include "uupl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace uupl {

namespace {

void require_finite(double z, const char* who) {
  if (!std::isfinite(z)) {
    throw InvalidArgument(std::string(who) + ": non-finite input");
  }
}

// Mills ratio Phi(-t)/phi(t) for t >= 8 by backward continued fraction.
double mills_ratio_upper(double t) {
  double v = t;
  for (int k = 64; k >= 1; --k) {
    v = t + k / v;
  }
  return 1.0 / v;
}

constexpr double kLowerTailSwitch = -8.0;

}  // namespace

bool Domain::contains(const FeaturePoint& x, double slack) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower[i] - slack && x[i] <= upper[i] + slack)) return false;
  }
  return true;
}

void Domain::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size()) {
    throw InvalidArgument("domain: bounds must be non-empty and of equal dimension");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
      throw InvalidArgument("domain: dimension " + std::to_string(i) + " requires min < max");
    }
  }
}

std::vector<FeaturePoint> Domain::lattice(std::size_t per_dim) const {
  return lattice(std::vector<std::size_t>(dim(), per_dim));
}

std::vector<FeaturePoint> Domain::lattice(const std::vector<std::size_t>& per_dim) const {
  if (per_dim.size() != dim()) throw DimensionMismatch("lattice: per-dimension counts mismatch");
  std::size_t total = 1;
  for (auto n : per_dim) {
    if (n == 0) throw InvalidArgument("lattice: zero points along an axis");
    total *= n;
  }
  std::vector<FeaturePoint> out;
  out.reserve(total);
  std::vector<std::size_t> idx(dim(), 0);
  for (std::size_t c = 0; c < total; ++c) {
    FeaturePoint x(static_cast<Eigen::Index>(dim()));
    for (std::size_t d = 0; d < dim(); ++d) {
      const auto e = static_cast<Eigen::Index>(d);
      x[e] = per_dim[d] == 1 ? 0.5 * (lower[e] + upper[e])
                             : lower[e] + (upper[e] - lower[e]) * static_cast<double>(idx[d]) /
                                              static_cast<double>(per_dim[d] - 1);
    }
    out.push_back(std::move(x));
    for (std::size_t d = 0; d < dim(); ++d) {
      if (++idx[d] < per_dim[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

void KernelConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("kernel: gamma must be > 0");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw InvalidArgument("kernel: jitter must be >= 0");
}

double std_normal_cdf(double z) {
  require_finite(z, "std_normal_cdf");
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double std_normal_pdf(double z) {
  require_finite(z, "std_normal_pdf");
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

double log_std_normal_cdf(double z) {
  require_finite(z, "log_std_normal_cdf");
  if (z < kLowerTailSwitch) {
    const double t = -z;
    const double log_pdf = -0.5 * t * t - 0.5 * std::log(2.0 * std::numbers::pi);
    return log_pdf + std::log(mills_ratio_upper(t));
  }
  if (z > 0.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  return std::log(std_normal_cdf(z));
}

double inverse_mills_ratio(double z) {
  require_finite(z, "inverse_mills_ratio");
  if (z < kLowerTailSwitch) return 1.0 / mills_ratio_upper(-z);
  return std_normal_pdf(z) / std_normal_cdf(z);
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("binary_entropy: p outside [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double rbf_kernel(const FeaturePoint& x1, const FeaturePoint& x2, const KernelConfig& cfg) {
  if (x1.size() != x2.size()) throw DimensionMismatch("rbf_kernel: dimension mismatch");
  return std::exp(-cfg.gamma * (x1 - x2).squaredNorm());
}

bool same_point(const FeaturePoint& a, const FeaturePoint& b, double tol) {
  return a.size() == b.size() && (a - b).cwiseAbs().maxCoeff() <= tol;
}

double jittered_kernel(const FeaturePoint& x1, const FeaturePoint& x2, const KernelConfig& cfg) {
  const double k = rbf_kernel(x1, x2, cfg);
  return same_point(x1, x2) ? k + cfg.jitter : k;
}

Matrix build_covariance(std::span<const FeaturePoint> points, const KernelConfig& cfg) {
  cfg.validate();
  if (points.empty()) throw InvalidArgument("build_covariance: no points");
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto dim = points.front().size();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (points[i].size() != dim) throw DimensionMismatch("build_covariance: mixed dimensions");
    K(i, i) = 1.0 + cfg.jitter;
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = K(j, i) = rbf_kernel(points[i], points[j], cfg);
    }
  }
  if (Eigen::LLT<Matrix>(K).info() != Eigen::Success) {
    throw NotPositiveDefinite("build_covariance: covariance is singular after jitter");
  }
  return K;
}

Matrix cross_covariance(std::span<const FeaturePoint> points, std::span<const FeaturePoint> tests,
                        const KernelConfig& cfg) {
  Matrix k(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(tests.size()));
  for (std::size_t j = 0; j < tests.size(); ++j) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          jittered_kernel(points[i], tests[j], cfg);
    }
  }
  return k;
}

Matrix solve_spd(const Matrix& A, const Matrix& B) {
  if (A.rows() != A.cols()) throw DimensionMismatch("solve_spd: matrix is not square");
  if (B.rows() != A.rows()) throw DimensionMismatch("solve_spd: right-hand side row mismatch");
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("solve_spd: matrix is not SPD");
  return llt.solve(B);
}

double sample_correlation(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw DimensionMismatch("sample_correlation: length mismatch");
  if (predicted.size() < 2) throw InvalidArgument("sample_correlation: need at least two samples");
  const auto n = static_cast<double>(predicted.size());
  double mp = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    mp += predicted[i];
    mt += truth[i];
  }
  mp /= n;
  mt /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double a = predicted[i] - mp;
    const double b = truth[i] - mt;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("sample_correlation: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double median_heuristic_gamma(std::span<const FeaturePoint> points) {
  if (points.size() < 2) throw InvalidArgument("median_heuristic_gamma: need two points");
  std::vector<double> d2;
  d2.reserve(points.size() * (points.size() - 1) / 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) d2.push_back((points[i] - points[j]).squaredNorm());
  }
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  if (!(*mid > 0.0)) throw InvalidArgument("median_heuristic_gamma: degenerate point set");
  return 0.5 / *mid;
}

double median_heuristic_gamma(const Domain& domain) {
  domain.validate();
  // Keep the lattice near a thousand points so the pair count stays small.
  const std::size_t per_dim = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::floor(std::pow(1000.0, 1.0 / static_cast<double>(domain.dim())))));
  const auto pts = domain.lattice(per_dim);
  return median_heuristic_gamma(std::span<const FeaturePoint>(pts));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace uupl
