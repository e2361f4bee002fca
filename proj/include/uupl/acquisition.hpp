#pragma once

#include "uupl/preference_gp.hpp"
#include "uupl/uncertainty_gmm.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace uupl {

enum class CandidateSource {
  Grid,     // both members drawn from a fixed lattice
  Uniform,  // both members drawn uniformly from the domain box
};

struct AcquisitionConfig {
  double u_acq = 1.0;
  int pool_size = 200;
  std::uint64_t rng_seed = 0;
  CandidateSource candidate_source = CandidateSource::Uniform;

  void validate() const;
};

/// Expected information gain of asking (x1, x2), given the scaled predictive
/// distribution of their rewards.
double pair_score(const Eigen::Vector2d& mu, const Eigen::Matrix2d& sigma_prime, double u_acq);

struct QuerySelection {
  FeaturePoint x1;
  FeaturePoint x2;
  double score = 0.0;
  double g = 0.0;              // joint variance term of the winner
  std::size_t candidate = 0;   // index within the pool
};

/// Candidate pool for the current state. Seeded by cfg.rng_seed mixed with the
/// number of answered pairs, so it is a pure function of (state, cfg).
std::vector<std::pair<FeaturePoint, FeaturePoint>> candidate_pool(const PosteriorState& state, const Domain& domain,
                                                                  const AcquisitionConfig& cfg,
                                                                  std::span<const FeaturePoint> grid = {});

/// Scores one candidate: predict -> G -> scale -> score.
QuerySelection score_candidate(const PosteriorState& state, const GmmModel& gmm, const FeaturePoint& x1,
                               const FeaturePoint& x2, double u_acq);

/// Argmax of pair_score over the pool; ties go to the lowest index.
/// `grid` supplies the lattice for CandidateSource::Grid.
QuerySelection select_next_query(const PosteriorState& state, const GmmModel& gmm, const Domain& domain,
                                 const AcquisitionConfig& cfg, std::span<const FeaturePoint> grid = {});

struct StoppingConfig {
  int base_queries = 20;
  int increment = 5;
  double drop_threshold = 0.05;
  int max_queries = 60;  // hard cap for users whose answers never settle the variance

  void validate() const;
};

/// Relative drop of the trace between the two most recent checkpoints
/// (base_queries, base_queries + increment, ...). Empty before the second
/// checkpoint exists.
std::optional<double> checkpoint_drop(std::span<const double> variance_trace, const StoppingConfig& cfg);

/// True once the variance has dropped by at least drop_threshold over the
/// last increment, or the trace reaches max_queries. A small drop means the
/// answers are still too uncertain to trust, so querying continues.
bool should_stop(std::span<const double> variance_trace, const StoppingConfig& cfg);

/// Mean of Var(x) / G(x)^2 over `grid`. This is the statistic the stopping rule watches.
double mean_scaled_variance(const PosteriorState& state, const GmmModel& gmm, std::span<const FeaturePoint> grid);

/// 101 points per axis up to two dimensions, 9 per axis beyond.
std::vector<FeaturePoint> variance_grid(const Domain& domain);

}  // namespace uupl
