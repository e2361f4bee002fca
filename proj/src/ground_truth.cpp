#include "uupl/errors.hpp"
#include "uupl/math_kernel.hpp"
#include "uupl/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace uupl {

namespace {

double bump(double x, double center, double width) {
  const double z = (x - center) / width;
  return std::exp(-0.5 * z * z);
}

struct Hill {
  double cx, cy;
  double height;
  double major, minor;  // bandwidths along the rotated axes
  double angle;         // radians
};

// exp(-(a/major)^2 - (b/minor)^2) in the hill's rotated frame.
double hill_value(const Hill& h, double x, double y) {
  const double c = std::cos(h.angle), s = std::sin(h.angle);
  const double dx = x - h.cx, dy = y - h.cy;
  const double a = (c * dx + s * dy) / h.major;
  const double b = (-s * dx + c * dy) / h.minor;
  return h.height * std::exp(-(a * a + b * b));
}

constexpr std::array<Hill, 3> kTabletopHills{{
    {-2.5, 2.0, 1.0, 3.6, 2.2, std::numbers::pi / 6.0},
    {3.0, 2.5, 0.7, 2.5, 2.5, 0.0},
    {1.0, -2.5, 0.85, 3.6, 1.8, -std::numbers::pi / 9.0},
}};

Domain box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  Domain d;
  d.lower = Eigen::Map<const Vector>(lo.begin(), static_cast<Eigen::Index>(lo.size()));
  d.upper = Eigen::Map<const Vector>(hi.begin(), static_cast<Eigen::Index>(hi.size()));
  return d;
}

}  // namespace

GroundTruthTask::GroundTruthTask(TaskKind kind, std::string name, Domain domain, std::size_t per_dim)
    : kind_(kind), name_(std::move(name)), domain_(std::move(domain)) {
  grid_ = domain_.lattice(per_dim);
  grid_values_.reserve(grid_.size());
  for (const auto& x : grid_) grid_values_.push_back(raw(x));
  const auto [lo, hi] = std::minmax_element(grid_values_.begin(), grid_values_.end());
  min_ = *lo;
  max_ = *hi;
}

GroundTruthTask GroundTruthTask::thermal() {
  return GroundTruthTask(TaskKind::Thermal, "thermal", box({10.0}, {26.0}), 161);
}

GroundTruthTask GroundTruthTask::tabletop() {
  return GroundTruthTask(TaskKind::Tabletop, "tabletop", box({-5.0, -5.0}, {5.0, 5.0}), 101);
}

GroundTruthTask GroundTruthTask::driving() {
  return GroundTruthTask(TaskKind::Driving, "driving", box({0.0, 0.0, 0.0, 0.0}, {5.0, 5.0, 5.0, 5.0}), 9);
}

GroundTruthTask GroundTruthTask::from_name(const std::string& name) {
  if (name == "thermal") return thermal();
  if (name == "tabletop") return tabletop();
  if (name == "driving") return driving();
  throw InvalidArgument("unknown task '" + name + "' (expected thermal, tabletop or driving)");
}

double GroundTruthTask::driving_component(int dim, double v) {
  switch (dim) {
    case 0:  // distance to the front car: unimodal
      return bump(v, 2.5, 1.2);
    case 1:  // speed: monotone
      return 0.8 / (1.0 + std::exp(-1.5 * (v - 2.5)));
    case 2:  // heading angle: bimodal
      return 0.6 * bump(v, 1.1, 0.7) + 0.9 * bump(v, 3.8, 0.7);
    case 3:  // distance to lane center: saturating
      return 0.7 * (1.0 - std::exp(-0.9 * v));
    default:
      throw InvalidArgument("driving_component: dimension must be 0..3");
  }
}

double GroundTruthTask::raw(const FeaturePoint& x) const {
  switch (kind_) {
    case TaskKind::Thermal:
      return 0.6 * bump(x[0], 13.0, 1.2) + 1.0 * bump(x[0], 18.5, 1.0) + 0.8 * bump(x[0], 23.0, 1.5);
    case TaskKind::Tabletop: {
      double v = 0.0;
      for (const auto& h : kTabletopHills) v += hill_value(h, x[0], x[1]);
      return v;
    }
    case TaskKind::Driving: {
      double v = 0.0;
      for (int d = 0; d < 4; ++d) v += driving_component(d, x[d]);
      return v;
    }
  }
  return 0.0;
}

double GroundTruthTask::evaluate(const FeaturePoint& x) const {
  if (static_cast<std::size_t>(x.size()) != domain_.dim()) throw DimensionMismatch(name_ + ": dimension mismatch");
  if (!domain_.contains(x)) throw InvalidArgument(name_ + ": point outside the task domain");
  return raw(x);
}

CalibrationFunction GroundTruthTask::as_calibration_function() const {
  auto self = *this;
  return CalibrationFunction{domain_, [self](const FeaturePoint& x) { return self.evaluate(x); }, min_, max_};
}

void OracleConfig::validate() const {
  for (double u : factors.u) {
    if (!(u > 0.0)) throw InvalidArgument("oracle: factors must be positive");
  }
  if (choice_mode == ChoiceMode::Stochastic && !rng_seed) {
    throw InvalidArgument("oracle: stochastic choices need an rng seed");
  }
}

UncertaintyLevel quantize_level(double normalized_gap) {
  if (normalized_gap >= 5.0 / 6.0) return UncertaintyLevel::VeryConfident;
  if (normalized_gap >= 0.5) return UncertaintyLevel::Confident;
  if (normalized_gap >= 1.0 / 6.0) return UncertaintyLevel::Uncertain;
  return UncertaintyLevel::VeryUncertain;
}

OracleAnswer oracle_answer(const GroundTruthTask& task, const FeaturePoint& x1, const FeaturePoint& x2,
                           const OracleConfig& cfg, std::mt19937_64& rng) {
  const double delta = task.evaluate(x1) - task.evaluate(x2);
  OracleAnswer ans;
  ans.level = quantize_level(std::abs(delta) / task.range());
  if (cfg.choice_mode == ChoiceMode::Deterministic) {
    ans.choice = delta >= 0.0 ? 1 : 2;
    return ans;
  }
  const double p_first = choice_probability(delta, cfg.factors[ans.level]);
  ans.choice = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p_first ? 1 : 2;
  return ans;
}

}  // namespace uupl
