#pragma once

#include "uupl/acquisition.hpp"
#include "uupl/calibration.hpp"
#include "uupl/errors.hpp"
#include "uupl/preference_gp.hpp"
#include "uupl/uncertainty_gmm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace uupl {

enum class TaskKind { Thermal, Tabletop, Driving };

/// Analytic reward function with its domain and evaluation lattice.
class GroundTruthTask {
 public:
  static GroundTruthTask thermal();
  static GroundTruthTask tabletop();
  static GroundTruthTask driving();
  /// "thermal" | "tabletop" | "driving"; InvalidArgument otherwise.
  static GroundTruthTask from_name(const std::string& name);

  TaskKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const Domain& domain() const { return domain_; }

  /// Throws InvalidArgument for points outside the domain.
  double evaluate(const FeaturePoint& x) const;

  /// 161 points for thermal, 101 x 101 for tabletop, 9^4 for driving.
  const std::vector<FeaturePoint>& evaluation_grid() const { return grid_; }
  const std::vector<double>& grid_values() const { return grid_values_; }
  double min_value() const { return min_; }
  double max_value() const { return max_; }
  double range() const { return max_ - min_; }

  /// One additive term of the driving reward (dimension 0..3).
  static double driving_component(int dim, double v);

  CalibrationFunction as_calibration_function() const;

 private:
  GroundTruthTask(TaskKind kind, std::string name, Domain domain, std::size_t per_dim);
  double raw(const FeaturePoint& x) const;

  TaskKind kind_;
  std::string name_;
  Domain domain_;
  std::vector<FeaturePoint> grid_;
  std::vector<double> grid_values_;
  double min_ = 0.0;
  double max_ = 0.0;
};

enum class ChoiceMode { Stochastic, Deterministic };

struct OracleConfig {
  UncertaintyFactors factors;
  ChoiceMode choice_mode = ChoiceMode::Stochastic;
  std::optional<std::uint64_t> rng_seed;

  void validate() const;

  /// Default factors scaled by `sharpness` times the task's reward range, so
  /// the noise is proportional to the reward scale.
  static OracleConfig for_task(const GroundTruthTask& task, double sharpness = kDefaultSharpness);
  static constexpr double kDefaultSharpness = 0.02;
};

struct OracleAnswer {
  int choice = 1;  // 1 prefers x1, 2 prefers x2
  UncertaintyLevel level = UncertaintyLevel::VeryConfident;
};

/// Level from |dR| / range: >= 5/6 -> 1, >= 1/2 -> 2, >= 1/6 -> 3, else 4.
UncertaintyLevel quantize_level(double normalized_gap);

/// Simulated human. `rng` is only consulted in stochastic mode.
OracleAnswer oracle_answer(const GroundTruthTask& task, const FeaturePoint& x1, const FeaturePoint& x2,
                           const OracleConfig& cfg, std::mt19937_64& rng);

/// Engine configuration for one experiment arm.
struct MethodConfig {
  std::string name = "full";
  bool use_uncertainty_likelihood = true;
  bool use_gmm_scaling = true;
  KernelConfig kernel;
  GmmWeights gmm_weights;
  double gmm_bandwidth_fraction = 0.05;
  UncertaintyFactors factors;
  AcquisitionConfig acquisition;
  LaplaceOptions laplace;

  /// Factors the likelihood actually uses: `factors`, or u1 for every level
  /// when the level-aware likelihood is switched off.
  UncertaintyFactors engine_factors() const;
  GmmModel gmm_for(const PreferenceDataset& data, const Domain& domain) const;

  /// Defaults for an arbitrary box: length scale, GMM weights and candidate
  /// source all follow from the bounds.
  static MethodConfig for_domain(const Domain& domain);
  /// Task defaults with both components on.
  static MethodConfig full(const GroundTruthTask& task);
  /// "full" | "no-gmm" | "no-likelihood" | "baseline".
  static MethodConfig named(const std::string& name, const GroundTruthTask& task);
};

/// The four ablation arms, in the order full, no-gmm, no-likelihood, baseline.
std::vector<MethodConfig> ablation_methods(const GroundTruthTask& task);

struct TrialResult {
  std::vector<double> trace;  // accuracy after each iteration
  double final_accuracy = 0.0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;  // not exported
};

/// Thrown when a refit fails inside a trial; carries the 1-based iteration.
class TrialError : public Error {
 public:
  TrialError(const std::string& what, int iteration) : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Pearson correlation between the posterior mean and the truth on the task grid.
double grid_accuracy(const PosteriorState& state, const GroundTruthTask& task);

TrialResult run_trial(const GroundTruthTask& task, const MethodConfig& method, const OracleConfig& oracle, int iters,
                      std::uint64_t seed);

struct MethodSummary {
  std::string name;
  std::vector<TrialResult> trials;
  double mean_final = 0.0;
  double std_final = 0.0;
};

struct ExperimentSummary {
  std::string task;
  int iters = 0;
  std::uint64_t base_seed = 0;
  std::vector<MethodSummary> methods;
};

/// Seed of trial `t`, shared by every method so arms are paired.
std::uint64_t trial_seed(std::uint64_t base_seed, int t);

/// Runs every method for `trials` trials. `oracle.rng_seed` is ignored; each
/// trial seeds its oracle from the trial seed.
ExperimentSummary run_experiment(const GroundTruthTask& task, const std::vector<MethodConfig>& methods,
                                 const OracleConfig& oracle, int trials, int iters, std::uint64_t base_seed,
                                 unsigned max_threads = 0);

/// Standard deviation across trials of the accuracy at 0-based iteration `iter`.
double accuracy_std_at(const MethodSummary& m, std::size_t iter);

enum class ExportFormat { Csv, Json };

/// CSV: task,method,trial,iteration,accuracy. JSON mirrors ExperimentSummary.
void export_results(const ExperimentSummary& summary, const std::filesystem::path& path, ExportFormat format);
std::string results_to_csv(const ExperimentSummary& summary);
std::string results_to_json(const ExperimentSummary& summary);
ExperimentSummary results_from_json(const std::string& text);
ExperimentSummary load_results_json(const std::filesystem::path& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace uupl
