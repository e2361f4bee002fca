#pragma once

#include "uupl/acquisition.hpp"
#include "uupl/calibration.hpp"
#include "uupl/errors.hpp"
#include "uupl/simulation.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uupl {

inline constexpr int kSessionSchemaVersion = 1;

/// A query is already waiting for an answer.
class PendingQueryConflict : public Error {
 public:
  using Error::Error;
};

/// The answer names a query that is not the pending one.
class StaleQuery : public Error {
 public:
  using Error::Error;
};

class SessionStopped : public Error {
 public:
  using Error::Error;
};

/// Operation not available in the current phase.
class PhaseError : public Error {
 public:
  using Error::Error;
};

class SchemaVersionError : public IoError {
 public:
  using IoError::IoError;
};

class CorruptSessionError : public IoError {
 public:
  using IoError::IoError;
};

enum class Phase { Calibrating, Learning, Stopped };

const char* phase_name(Phase p);

/// Fully resolved session settings. Nothing in here is left to defaults once a
/// session exists, so a stored session replays the same way on any build.
struct SessionConfig {
  std::string task = "thermal";  // thermal | tabletop | driving | custom
  Domain domain;
  bool calibrate = false;
  int calibration_queries = 50;
  std::uint64_t seed = 0;
  double kernel_gamma = 1.0;
  GmmWeights gmm_weights;
  double gmm_bandwidth_fraction = 0.05;
  int pool_size = 200;
  StoppingConfig stopping;

  void validate() const;

  /// Request body of POST /sessions: only `task` (or a custom `domain`) is
  /// needed, everything else falls back to the engine defaults for the domain.
  static SessionConfig from_request(const nlohmann::json& body);

  nlohmann::json to_json() const;
  static SessionConfig from_json(const nlohmann::json& j);
};

enum class QueryKind { Calibration, Learning };

struct QueryRecord {
  std::string id;
  QueryKind kind = QueryKind::Learning;
  FeaturePoint x1;
  FeaturePoint x2;
  std::int64_t presented_at = 0;  // unix milliseconds
  std::optional<int> choice;      // 1 prefers x1
  std::optional<UncertaintyLevel> level;
  std::optional<std::int64_t> answered_at;

  bool answered() const { return choice.has_value(); }
  nlohmann::json to_json() const;
  static QueryRecord from_json(const nlohmann::json& j);
};

/// Mean and GMM-scaled variance over a set of points.
struct PosteriorGrid {
  std::vector<FeaturePoint> points;
  std::vector<double> mean;
  std::vector<double> variance;

  nlohmann::json to_json() const;
};

/// Mean and Var(x) / G(x)^2 at every point.
PosteriorGrid evaluate_posterior_grid(const PosteriorState& state, const GmmModel& gmm,
                                      std::vector<FeaturePoint> points);

/// JSON text with sorted keys, no whitespace and shortest round-trip doubles.
std::string canonical_dump(const nlohmann::json& j);

class Session {
 public:
  static Session create(SessionConfig cfg, std::string id);

  const std::string& id() const { return id_; }
  Phase phase() const { return phase_; }
  const SessionConfig& config() const { return cfg_; }
  const UncertaintyFactors& factors() const { return factors_; }
  bool factors_calibrated() const { return calibrated_; }
  const std::vector<std::string>& calibration_warnings() const { return warnings_; }
  const std::vector<QueryRecord>& transcript() const { return transcript_; }
  const std::optional<QueryRecord>& pending() const { return pending_; }
  const std::vector<double>& variance_trace() const { return variance_trace_; }
  std::size_t calibration_answered() const;
  std::size_t learning_answered() const { return data_.num_pairs(); }

  /// The pending query if there is one, otherwise a freshly issued one.
  const QueryRecord& next_query(std::int64_t now_ms);
  /// Throws PendingQueryConflict while a query is unanswered.
  const QueryRecord& issue_query(std::int64_t now_ms);
  /// choice in {1, 2}, level in 1..4.
  void submit_answer(const std::string& query_id, int choice, int level, std::int64_t now_ms);

  /// Fitted on demand after a load.
  const PosteriorState& posterior() const;
  GmmModel gmm() const;
  /// PhaseError while calibrating.
  PosteriorGrid posterior_grid(std::vector<FeaturePoint> points) const;

  /// u1..u4 with provenance "default" or "calibrated".
  nlohmann::json factors_json() const;
  nlohmann::json status_json() const;
  nlohmann::json to_json() const;
  std::string serialize() const { return canonical_dump(to_json()); }
  /// SchemaVersionError or CorruptSessionError on bad input.
  static Session deserialize(const std::string& text);

  /// Canonical text of the stored posterior: factors, points, mode, variance trace.
  std::string posterior_snapshot() const { return canonical_dump(snapshot_); }

  /// Rebuilds the session from its config by re-asking and re-answering every
  /// transcript entry. Throws Error if a re-issued query differs from the record.
  static Session replay(const Session& stored);

 private:
  Session() = default;
  const QueryRecord& issue(std::int64_t now_ms);
  void finish_calibration();
  void refit();
  void update_snapshot();
  std::vector<FeaturePoint> candidate_grid() const;
  AcquisitionConfig acquisition() const;

  std::string id_;
  SessionConfig cfg_;
  Phase phase_ = Phase::Learning;
  UncertaintyFactors factors_;
  bool calibrated_ = false;
  std::vector<std::string> warnings_;
  std::vector<std::pair<FeaturePoint, FeaturePoint>> calibration_pairs_;
  std::vector<QueryRecord> transcript_;
  std::optional<QueryRecord> pending_;
  std::vector<double> variance_trace_;
  int next_number_ = 1;
  PreferenceDataset data_;
  std::shared_ptr<CalibrationSession> calibration_;
  mutable std::shared_ptr<const PosteriorState> state_;
  nlohmann::json snapshot_;
};

}  // namespace uupl
