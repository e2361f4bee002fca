#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace uupl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point in feature space. All comparisons reference these.
using FeaturePoint = Eigen::VectorXd;

/// Axis-aligned box the features live in.
struct Domain {
  Vector lower;
  Vector upper;

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  Vector extent() const { return upper - lower; }
  bool contains(const FeaturePoint& x, double slack = 1e-12) const;

  /// Throws InvalidArgument when bounds are empty, mismatched or inverted.
  void validate() const;

  /// Regular lattice with `per_dim` points along every axis, endpoints
  /// included, first coordinate varying fastest.
  std::vector<FeaturePoint> lattice(std::size_t per_dim) const;
  std::vector<FeaturePoint> lattice(const std::vector<std::size_t>& per_dim) const;
};

}  // namespace uupl
