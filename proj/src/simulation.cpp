#include "uupl/simulation.hpp"

#include "uupl/errors.hpp"
#include "uupl/math_kernel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numbers>
#include <thread>

namespace uupl {

namespace {

// The plain median heuristic gives length scales near half the domain, far
// smoother than any of the reward functions.
constexpr double kLengthScaleDivisor = 5.0;

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

UncertaintyFactors MethodConfig::engine_factors() const {
  return use_uncertainty_likelihood ? factors : UncertaintyFactors::uniform(factors.u[0]);
}

GmmModel MethodConfig::gmm_for(const PreferenceDataset& data, const Domain& domain) const {
  if (!use_gmm_scaling) return GmmModel::identity();
  return GmmModel::for_domain(data, gmm_weights, domain, gmm_bandwidth_fraction);
}

OracleConfig OracleConfig::for_task(const GroundTruthTask& task, double sharpness) {
  if (!(sharpness > 0.0)) throw InvalidArgument("oracle: sharpness must be positive");
  OracleConfig cfg;
  cfg.factors = default_uncertainty_factors();
  for (double& u : cfg.factors.u) u *= sharpness * task.range();
  return cfg;
}

MethodConfig MethodConfig::for_domain(const Domain& domain) {
  domain.validate();
  MethodConfig m;
  m.name = "full";
  // Data thins out as the dimension grows, so the prior gets smoother with it.
  const double dim = static_cast<double>(domain.dim());
  m.kernel.gamma = median_heuristic_gamma(domain) * kLengthScaleDivisor * kLengthScaleDivisor / std::sqrt(dim);
  m.factors = default_uncertainty_factors();
  // The normalized mixture peak grows like (2 pi sigma^2)^(-n/2); rescale so
  // every dimension sees the one-dimensional peak.
  const double peak_ratio = std::pow(2.0 * std::numbers::pi * m.gmm_bandwidth_fraction * m.gmm_bandwidth_fraction,
                                     0.5 * (dim - 1.0));
  for (double& w : m.gmm_weights.w) w *= peak_ratio;
  m.acquisition.u_acq = m.factors.u[0];
  m.acquisition.pool_size = 200;
  m.acquisition.candidate_source = domain.dim() == 1 ? CandidateSource::Grid : CandidateSource::Uniform;
  return m;
}

MethodConfig MethodConfig::full(const GroundTruthTask& task) {
  auto m = for_domain(task.domain());
  // Per-task tweaks on top of the generic rules, from a coarse sweep.
  if (task.kind() == TaskKind::Tabletop) {
    for (double& w : m.gmm_weights.w) w *= 0.3;
  }
  if (task.kind() == TaskKind::Thermal) m.kernel.gamma *= 1.4;
  return m;
}

MethodConfig MethodConfig::named(const std::string& name, const GroundTruthTask& task) {
  auto m = full(task);
  m.name = name;
  if (name == "full") return m;
  if (name == "no-gmm") {
    m.use_gmm_scaling = false;
  } else if (name == "no-likelihood") {
    m.use_uncertainty_likelihood = false;
  } else if (name == "baseline") {
    m.use_gmm_scaling = false;
    m.use_uncertainty_likelihood = false;
  } else {
    throw InvalidArgument("unknown method '" + name + "' (expected full, no-gmm, no-likelihood or baseline)");
  }
  return m;
}

std::vector<MethodConfig> ablation_methods(const GroundTruthTask& task) {
  return {MethodConfig::named("full", task), MethodConfig::named("no-gmm", task),
          MethodConfig::named("no-likelihood", task), MethodConfig::named("baseline", task)};
}

double grid_accuracy(const PosteriorState& state, const GroundTruthTask& task) {
  const Vector mu = state.predict_means(task.evaluation_grid());
  try {
    return sample_correlation(std::span<const double>(mu.data(), static_cast<std::size_t>(mu.size())),
                              task.grid_values());
  } catch (const UndefinedCorrelation&) {
    return 0.0;  // a flat posterior carries no ordering information
  }
}

TrialResult run_trial(const GroundTruthTask& task, const MethodConfig& method, const OracleConfig& oracle, int iters,
                      std::uint64_t seed) {
  if (iters < 1) throw InvalidArgument("run_trial: iters must be >= 1");
  const auto start = std::chrono::steady_clock::now();

  OracleConfig human = oracle;
  human.rng_seed = splitmix64(seed ^ 0x6f7261636c65ULL);
  human.validate();
  std::mt19937_64 human_rng(*human.rng_seed);

  AcquisitionConfig acq = method.acquisition;
  acq.rng_seed = splitmix64(seed ^ 0x61637175ULL);
  const auto engine_factors = method.engine_factors();
  const std::span<const FeaturePoint> candidates =
      acq.candidate_source == CandidateSource::Grid ? std::span<const FeaturePoint>(task.evaluation_grid())
                                                    : std::span<const FeaturePoint>();

  TrialResult result;
  result.seed = seed;
  result.trace.reserve(static_cast<std::size_t>(iters));
  PreferenceDataset data;
  auto state = PosteriorState::fit(data, method.kernel, engine_factors, method.laplace);
  for (int it = 1; it <= iters; ++it) {
    const auto gmm = method.gmm_for(state.dataset(), task.domain());
    const auto query = select_next_query(state, gmm, task.domain(), acq, candidates);
    const auto answer = oracle_answer(task, query.x1, query.x2, human, human_rng);
    if (answer.choice == 1) {
      data.add_comparison(query.x1, query.x2, answer.level);
    } else {
      data.add_comparison(query.x2, query.x1, answer.level);
    }
    try {
      state = PosteriorState::fit(data, method.kernel, engine_factors, method.laplace);
    } catch (const Error& e) {
      throw TrialError("trial seed " + std::to_string(seed) + ", iteration " + std::to_string(it) + ": " + e.what(),
                       it);
    }
    result.trace.push_back(grid_accuracy(state, task));
  }
  result.final_accuracy = result.trace.back();
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::uint64_t trial_seed(std::uint64_t base_seed, int t) { return splitmix64(splitmix64(base_seed) + static_cast<std::uint64_t>(t)); }

ExperimentSummary run_experiment(const GroundTruthTask& task, const std::vector<MethodConfig>& methods,
                                 const OracleConfig& oracle, int trials, int iters, std::uint64_t base_seed,
                                 unsigned max_threads) {
  if (trials < 1) throw InvalidArgument("run_experiment: trials must be >= 1");
  ExperimentSummary summary;
  summary.task = task.name();
  summary.iters = iters;
  summary.base_seed = base_seed;

  unsigned workers = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
  for (const auto& method : methods) {
    MethodSummary ms;
    ms.name = method.name;
    ms.trials.resize(static_cast<std::size_t>(trials));
    // Trials are independent; results land in their own slot so order never matters.
    for (int first = 0; first < trials; first += static_cast<int>(workers)) {
      std::vector<std::future<TrialResult>> batch;
      const int last = std::min(trials, first + static_cast<int>(workers));
      for (int t = first; t < last; ++t) {
        batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                   [&, t] { return run_trial(task, method, oracle, iters, trial_seed(base_seed, t)); }));
      }
      for (int t = first; t < last; ++t) ms.trials[static_cast<std::size_t>(t)] = batch[static_cast<std::size_t>(t - first)].get();
    }
    std::vector<double> finals;
    for (const auto& tr : ms.trials) finals.push_back(tr.final_accuracy);
    double mean = 0.0;
    for (double f : finals) mean += f;
    ms.mean_final = mean / static_cast<double>(finals.size());
    ms.std_final = stddev(finals);
    summary.methods.push_back(std::move(ms));
  }
  return summary;
}

double accuracy_std_at(const MethodSummary& m, std::size_t iter) {
  std::vector<double> xs;
  for (const auto& t : m.trials) xs.push_back(t.trace.at(iter));
  return stddev(xs);
}

}  // namespace uupl
