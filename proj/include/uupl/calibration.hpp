#pragma once

#include "uupl/preference_gp.hpp"
#include "uupl/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace uupl {

/// Reward gap of the posterior mode for a single comparison, as a function of
/// the probit factor u. Only the decreasing tail (u >= tail start) is inverted.
class CalibrationCurve {
 public:
  std::vector<double> u_grid;
  std::vector<double> delta_flap;
  double gamma = 1.0;
  double rho = 0.5;
  double jitter = 1e-6;
  std::size_t tail_start = 0;  // index into u_grid

  double d_max() const { return delta_flap.at(tail_start); }
  double tail_start_u() const { return u_grid.at(tail_start); }
  double tail_min() const { return delta_flap.back(); }

  /// Solves the single-pair Laplace problem at `u` and returns |f1 - f2|.
  double evaluate(double u) const;

  /// d^{-1}(target) on the tail: bracketed on the grid, refined by bisection
  /// in log u against evaluate(). Throws InvalidArgument outside the tail range.
  double inverse(double target) const;
};

/// 200 log-spaced values on [1e-2, 1e4].
std::vector<double> default_u_grid();

/// Single-pair mode gap with kernel correlation `rho` between the two points.
double single_pair_delta_flap(double gamma, double rho, double u, double jitter = 1e-6);

/// Throws NumericalError naming the offending u if any solve fails.
CalibrationCurve compute_delta_flap_curve(double gamma, double rho, std::span<const double> u_grid,
                                          double jitter = 1e-6);

/// Memoized compute_delta_flap_curve over default_u_grid(), keyed on (gamma, rho).
const CalibrationCurve& cached_delta_flap_curve(double gamma = 1.0, double rho = 0.5);

/// u^l at the percentage points {1, 2/3, 1/3} of d_max and at d = 1e-3.
UncertaintyFactors default_uncertainty_factors(const CalibrationCurve& curve);

/// Factors from the cached curve with default settings.
const UncertaintyFactors& default_uncertainty_factors();

/// The known function users describe during calibration.
struct CalibrationFunction {
  Domain domain;
  std::function<double(const FeaturePoint&)> eval;
  double min_value = 0.0;
  double max_value = 1.0;

  double range() const { return max_value - min_value; }
};

struct CalibrationAnswer {
  FeaturePoint x1;
  FeaturePoint x2;
  UncertaintyLevel level = UncertaintyLevel::VeryConfident;
  double gap = 0.0;  // |f_calib(x1) - f_calib(x2)|
};

class CalibrationSession {
 public:
  explicit CalibrationSession(CalibrationFunction f_calib) : f_calib_(std::move(f_calib)) {}

  const CalibrationAnswer& record(const FeaturePoint& x1, const FeaturePoint& x2, UncertaintyLevel level);
  void record(CalibrationAnswer answer) { answers_.push_back(std::move(answer)); }

  const CalibrationFunction& function() const { return f_calib_; }
  const std::vector<CalibrationAnswer>& answers() const { return answers_; }

  /// Mean gap per level; empty buckets stay unset.
  std::array<std::optional<double>, 4> level_means() const;
  /// Mean gap over the function's range, clipped to [0, 1].
  std::array<std::optional<double>, 4> quantiles() const;

 private:
  CalibrationFunction f_calib_;
  std::vector<CalibrationAnswer> answers_;
};

struct CalibrationOutcome {
  UncertaintyFactors factors;
  std::array<std::optional<double>, 4> quantiles;
  std::vector<std::string> warnings;
};

/// Maps each level's mean gap quantile q to d^{-1}(q d_max). Empty buckets fall
/// back to the curve's defaults; out-of-order results are repaired isotonically.
CalibrationOutcome calibrate_user(const CalibrationSession& session, const CalibrationCurve& curve);

/// Seeded uniform pairs over `domain`, never two identical points.
std::vector<std::pair<FeaturePoint, FeaturePoint>> generate_calibration_queries(const Domain& domain,
                                                                                std::size_t count,
                                                                                std::uint64_t seed);

/// Pool-adjacent-violators fit of a non-decreasing sequence (unit weights).
std::vector<double> isotonic_increasing(std::span<const double> values);

}  // namespace uupl
