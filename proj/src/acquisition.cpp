#include "uupl/acquisition.hpp"

#include "uupl/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace uupl {

void AcquisitionConfig::validate() const {
  if (!(u_acq > 0.0)) throw InvalidArgument("acquisition: u_acq must be positive");
  if (pool_size < 1) throw InvalidArgument("acquisition: pool_size must be >= 1");
}

void StoppingConfig::validate() const {
  if (base_queries < 1) throw InvalidArgument("stopping: base_queries must be >= 1");
  if (increment < 1) throw InvalidArgument("stopping: increment must be >= 1");
  if (!(drop_threshold > 0.0)) throw InvalidArgument("stopping: drop_threshold must be positive");
  if (max_queries < base_queries) throw InvalidArgument("stopping: max_queries must be >= base_queries");
}

double pair_score(const Eigen::Vector2d& mu, const Eigen::Matrix2d& sigma_prime, double u_acq) {
  if (!(u_acq > 0.0)) throw InvalidArgument("pair_score: u_acq must be positive");
  const double g = joint_variance_term(sigma_prime);
  const double gap = mu[0] - mu[1];
  const double u2 = u_acq * u_acq;
  const double c = std::numbers::pi * std::numbers::ln2 * u2;
  const double entropy = binary_entropy(std_normal_cdf(gap / std::sqrt(u2 + g)));
  const double expected_noise = std::sqrt(c) * std::exp(-gap * gap / (c + 2.0 * g)) / std::sqrt(c + 2.0 * g);
  return entropy - expected_noise;
}

std::vector<std::pair<FeaturePoint, FeaturePoint>> candidate_pool(const PosteriorState& state, const Domain& domain,
                                                                  const AcquisitionConfig& cfg,
                                                                  std::span<const FeaturePoint> grid) {
  cfg.validate();
  domain.validate();
  std::vector<FeaturePoint> lattice_storage;
  if (cfg.candidate_source == CandidateSource::Grid && grid.empty()) {
    lattice_storage = domain.lattice(domain.dim() <= 2 ? std::size_t{101} : std::size_t{9});
    grid = lattice_storage;
  }
  if (cfg.candidate_source == CandidateSource::Grid && grid.size() < 2) {
    throw InvalidArgument("acquisition: candidate grid needs at least two points");
  }

  std::mt19937_64 rng(splitmix64(cfg.rng_seed ^ splitmix64(state.dataset().num_pairs())));
  const auto dim = static_cast<Eigen::Index>(domain.dim());
  auto draw = [&]() -> FeaturePoint {
    if (cfg.candidate_source == CandidateSource::Grid) {
      std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
      return grid[pick(rng)];
    }
    FeaturePoint x(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      std::uniform_real_distribution<double> coord(domain.lower[d], domain.upper[d]);
      x[d] = coord(rng);
    }
    return x;
  };

  std::vector<std::pair<FeaturePoint, FeaturePoint>> pool;
  pool.reserve(static_cast<std::size_t>(cfg.pool_size));
  while (pool.size() < static_cast<std::size_t>(cfg.pool_size)) {
    FeaturePoint a = draw();
    FeaturePoint b = draw();
    if (same_point(a, b)) continue;
    pool.emplace_back(std::move(a), std::move(b));
  }
  return pool;
}

QuerySelection score_candidate(const PosteriorState& state, const GmmModel& gmm, const FeaturePoint& x1,
                               const FeaturePoint& x2, double u_acq) {
  const auto pred = state.predict(x1, x2);
  const auto scaled = scale_covariance(pred, gmm.density(x1), gmm.density(x2));
  QuerySelection q;
  q.x1 = x1;
  q.x2 = x2;
  q.score = pair_score(scaled.mu, scaled.sigma_prime, u_acq);
  q.g = joint_variance_term(scaled.sigma_prime);
  return q;
}

QuerySelection select_next_query(const PosteriorState& state, const GmmModel& gmm, const Domain& domain,
                                 const AcquisitionConfig& cfg, std::span<const FeaturePoint> grid) {
  const auto pool = candidate_pool(state, domain, cfg, grid);
  QuerySelection best;
  bool have = false;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto q = score_candidate(state, gmm, pool[i].first, pool[i].second, cfg.u_acq);
    if (!have || q.score > best.score) {
      q.candidate = i;
      best = std::move(q);
      have = true;
    }
  }
  return best;
}

std::optional<double> checkpoint_drop(std::span<const double> trace, const StoppingConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<long>(trace.size());
  if (n < cfg.base_queries) return std::nullopt;
  const long last = cfg.base_queries + (n - cfg.base_queries) / cfg.increment * cfg.increment;
  const long prev = last - cfg.increment;
  if (prev < 1) return std::nullopt;
  const double before = trace[static_cast<std::size_t>(prev - 1)];
  const double after = trace[static_cast<std::size_t>(last - 1)];
  if (!(before > 0.0)) return 0.0;
  return (before - after) / before;
}

bool should_stop(std::span<const double> trace, const StoppingConfig& cfg) {
  const auto drop = checkpoint_drop(trace, cfg);
  if (static_cast<long>(trace.size()) >= cfg.max_queries) return true;
  return drop.has_value() && *drop >= cfg.drop_threshold;
}

double mean_scaled_variance(const PosteriorState& state, const GmmModel& gmm, std::span<const FeaturePoint> grid) {
  if (grid.empty()) throw InvalidArgument("mean_scaled_variance: empty grid");
  const Vector var = state.predict_variances(grid);
  double total = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double g = gmm.density(grid[i]);
    total += var[static_cast<Eigen::Index>(i)] / (g * g);
  }
  return total / static_cast<double>(grid.size());
}

std::vector<FeaturePoint> variance_grid(const Domain& domain) {
  return domain.lattice(domain.dim() <= 2 ? std::size_t{101} : std::size_t{9});
}

}  // namespace uupl
