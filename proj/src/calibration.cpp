#include "uupl/calibration.hpp"

#include "uupl/errors.hpp"
#include "uupl/math_kernel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>

namespace uupl {

namespace {

constexpr LaplaceOptions kCurveSolve{200, 1e-11};
constexpr double kLevel4Gap = 1e-3;

}  // namespace

std::vector<double> default_u_grid() {
  constexpr int n = 200;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = std::pow(10.0, -2.0 + 6.0 * i / (n - 1));
  return grid;
}

double single_pair_delta_flap(double gamma, double rho, double u, double jitter) {
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("delta_flap: rho must lie in [0, 1)");
  PreferenceDataset data;
  FeaturePoint a(1), b(1);
  a << 0.0;
  // Place the second point so the kernel correlation equals rho.
  b << (rho > 0.0 ? std::sqrt(-std::log(rho) / gamma) : 1.0);
  data.add_comparison(a, b, UncertaintyLevel::VeryConfident);
  Matrix K;
  if (rho > 0.0) {
    K = build_covariance(data.points(), KernelConfig{gamma, jitter});
  } else {
    K = Matrix::Identity(2, 2) * (1.0 + jitter);
  }
  const auto res = laplace_mode(data, K, UncertaintyFactors::uniform(u), kCurveSolve);
  return std::abs(res.f_lap[0] - res.f_lap[1]);
}

double CalibrationCurve::evaluate(double u) const { return single_pair_delta_flap(gamma, rho, u, jitter); }

double CalibrationCurve::inverse(double target) const {
  if (delta_flap.empty()) throw InvalidArgument("calibration curve is empty");
  if (!(target <= d_max() && target >= tail_min())) {
    throw InvalidArgument("calibration: target " + std::to_string(target) + " outside the tail range [" +
                          std::to_string(tail_min()) + ", " + std::to_string(d_max()) + "]");
  }
  std::size_t hi = tail_start;  // delta_flap[hi] >= target
  while (hi + 1 < delta_flap.size() && delta_flap[hi + 1] >= target) ++hi;
  if (delta_flap[hi] == target || hi + 1 == delta_flap.size()) return u_grid[hi];
  double lo_log = std::log(u_grid[hi]);
  double hi_log = std::log(u_grid[hi + 1]);
  for (int it = 0; it < 100 && hi_log - lo_log > 1e-14; ++it) {
    const double mid = 0.5 * (lo_log + hi_log);
    if (evaluate(std::exp(mid)) >= target) {
      lo_log = mid;
    } else {
      hi_log = mid;
    }
  }
  return std::exp(0.5 * (lo_log + hi_log));
}

CalibrationCurve compute_delta_flap_curve(double gamma, double rho, std::span<const double> u_grid, double jitter) {
  if (!(gamma > 0.0)) throw InvalidArgument("delta_flap curve: gamma must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("delta_flap curve: rho must lie in [0, 1)");
  if (u_grid.size() < 2) throw InvalidArgument("delta_flap curve: need at least two u values");
  for (std::size_t i = 0; i < u_grid.size(); ++i) {
    if (!(u_grid[i] > 0.0) || (i > 0 && !(u_grid[i] > u_grid[i - 1]))) {
      throw InvalidArgument("delta_flap curve: u grid must be positive and increasing");
    }
  }

  CalibrationCurve curve;
  curve.gamma = gamma;
  curve.rho = rho;
  curve.jitter = jitter;
  curve.u_grid.assign(u_grid.begin(), u_grid.end());
  curve.delta_flap.reserve(u_grid.size());
  for (double u : u_grid) {
    try {
      curve.delta_flap.push_back(single_pair_delta_flap(gamma, rho, u, jitter));
    } catch (const Error& e) {
      throw NumericalError("delta_flap curve: solve failed at u = " + std::to_string(u) + ": " + e.what());
    }
  }
  double best = -1.0;
  for (std::size_t i = 0; i < curve.delta_flap.size(); ++i) {
    if (curve.delta_flap[i] >= best) {
      best = curve.delta_flap[i];
      curve.tail_start = i;
    }
  }
  for (std::size_t i = curve.tail_start + 1; i < curve.delta_flap.size(); ++i) {
    if (!(curve.delta_flap[i] < curve.delta_flap[i - 1])) {
      throw NumericalError("delta_flap curve: tail is not strictly decreasing at u = " +
                           std::to_string(curve.u_grid[i]));
    }
  }
  return curve;
}

const CalibrationCurve& cached_delta_flap_curve(double gamma, double rho) {
  static std::mutex mu;
  static std::map<std::pair<double, double>, CalibrationCurve> cache;
  std::lock_guard lock(mu);
  auto it = cache.find({gamma, rho});
  if (it == cache.end()) {
    const auto grid = default_u_grid();
    it = cache.emplace(std::pair{gamma, rho}, compute_delta_flap_curve(gamma, rho, grid)).first;
  }
  return it->second;
}

UncertaintyFactors default_uncertainty_factors(const CalibrationCurve& curve) {
  const double dm = curve.d_max();
  if (!(kLevel4Gap < dm && kLevel4Gap >= curve.tail_min())) {
    throw InvalidArgument("calibration: level-4 target outside the curve tail");
  }
  UncertaintyFactors f{{curve.inverse(dm), curve.inverse(2.0 / 3.0 * dm), curve.inverse(1.0 / 3.0 * dm),
                        curve.inverse(kLevel4Gap)}};
  f.validate();
  return f;
}

const UncertaintyFactors& default_uncertainty_factors() {
  static const UncertaintyFactors f = default_uncertainty_factors(cached_delta_flap_curve());
  return f;
}

const CalibrationAnswer& CalibrationSession::record(const FeaturePoint& x1, const FeaturePoint& x2,
                                                    UncertaintyLevel level) {
  answers_.push_back({x1, x2, level, std::abs(f_calib_.eval(x1) - f_calib_.eval(x2))});
  return answers_.back();
}

std::array<std::optional<double>, 4> CalibrationSession::level_means() const {
  std::array<double, 4> sum{};
  std::array<int, 4> count{};
  for (const auto& a : answers_) {
    sum[level_index(a.level)] += a.gap;
    ++count[level_index(a.level)];
  }
  std::array<std::optional<double>, 4> out;
  for (std::size_t l = 0; l < 4; ++l) {
    if (count[l] > 0) out[l] = sum[l] / count[l];
  }
  return out;
}

std::array<std::optional<double>, 4> CalibrationSession::quantiles() const {
  const double span = f_calib_.range();
  if (!(span > 0.0)) throw InvalidArgument("calibration: function range must be positive");
  auto means = level_means();
  std::array<std::optional<double>, 4> q;
  for (std::size_t l = 0; l < 4; ++l) {
    // Gaps do not depend on an additive offset of f_calib, so the quantile is
    // taken with the function's minimum shifted to zero.
    if (means[l]) q[l] = std::clamp(*means[l] / span, 0.0, 1.0);
  }
  return q;
}

std::vector<double> isotonic_increasing(std::span<const double> values) {
  struct Block {
    double mean;
    std::size_t size;
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      auto last = blocks.back();
      blocks.pop_back();
      auto& prev = blocks.back();
      prev.mean = (prev.mean * static_cast<double>(prev.size) + last.mean * static_cast<double>(last.size)) /
                  static_cast<double>(prev.size + last.size);
      prev.size += last.size;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.size, b.mean);
  return out;
}

CalibrationOutcome calibrate_user(const CalibrationSession& session, const CalibrationCurve& curve) {
  const auto defaults = default_uncertainty_factors(curve);
  CalibrationOutcome out;
  out.quantiles = session.quantiles();
  const double dm = curve.d_max();
  for (std::size_t l = 0; l < 4; ++l) {
    if (!out.quantiles[l]) {
      out.factors.u[l] = defaults.u[l];
      out.warnings.push_back("level " + std::to_string(l + 1) + " was never used; keeping the default factor");
      continue;
    }
    double target = *out.quantiles[l] * dm;
    if (target < curve.tail_min()) {
      out.warnings.push_back("level " + std::to_string(l + 1) + " quantile below the curve tail; clamped");
      target = curve.tail_min();
    }
    out.factors.u[l] = curve.inverse(target);
  }

  bool ordered = true;
  for (std::size_t l = 1; l < 4; ++l) ordered = ordered && out.factors.u[l - 1] < out.factors.u[l];
  if (!ordered) {
    out.warnings.push_back("calibrated factors were not increasing; applied isotonic repair");
    std::array<double, 4> logs{};
    for (std::size_t l = 0; l < 4; ++l) logs[l] = std::log(out.factors.u[l]);
    const auto fitted = isotonic_increasing(logs);
    for (std::size_t l = 0; l < 4; ++l) out.factors.u[l] = std::exp(fitted[l]);
    for (std::size_t l = 1; l < 4; ++l) {
      if (!(out.factors.u[l] > out.factors.u[l - 1])) out.factors.u[l] = out.factors.u[l - 1] * (1.0 + 1e-6);
    }
  }
  for (const auto& w : out.warnings) spdlog::warn("calibrate_user: {}", w);
  out.factors.validate();
  return out;
}

std::vector<std::pair<FeaturePoint, FeaturePoint>> generate_calibration_queries(const Domain& domain,
                                                                                std::size_t count,
                                                                                std::uint64_t seed) {
  domain.validate();
  if (count < 1) throw InvalidArgument("calibration: query count must be >= 1");
  std::mt19937_64 rng(seed);
  const auto dim = static_cast<Eigen::Index>(domain.dim());
  auto draw = [&] {
    FeaturePoint x(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      x[d] = std::uniform_real_distribution<double>(domain.lower[d], domain.upper[d])(rng);
    }
    return x;
  };
  std::vector<std::pair<FeaturePoint, FeaturePoint>> out;
  out.reserve(count);
  while (out.size() < count) {
    auto a = draw();
    auto b = draw();
    if (same_point(a, b)) continue;
    out.emplace_back(std::move(a), std::move(b));
  }
  return out;
}

}  // namespace uupl
