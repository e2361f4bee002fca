#include "uupl/session.hpp"

#include <cmath>
#include <set>

namespace uupl {

using nlohmann::json;

namespace {

constexpr std::uint64_t kCalibrationSalt = 0x63616c6962ULL;
constexpr std::uint64_t kAcquisitionSalt = 0x61637175ULL;
constexpr std::size_t kCandidateGrid1d = 161;

json point_json(const FeaturePoint& x) {
  json a = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(x[i]);
  return a;
}

FeaturePoint point_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

bool bit_equal(const FeaturePoint& a, const FeaturePoint& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

void dump_into(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      // nlohmann::json keeps object members in a std::map, so they come out sorted.
      for (const auto& [k, v] : j.items()) {
        if (!first) out += ',';
        first = false;
        out += json(k).dump();
        out += ':';
        dump_into(v, out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump_into(j[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) throw NumericalError("canonical_dump: non-finite number");
      out += format_double(v);
      break;
    }
    default:
      out += j.dump();
  }
}

const char* kind_name(QueryKind k) { return k == QueryKind::Calibration ? "calibration" : "learning"; }

Phase phase_from(const std::string& s) {
  if (s == "calibrating") return Phase::Calibrating;
  if (s == "learning") return Phase::Learning;
  if (s == "stopped") return Phase::Stopped;
  throw InvalidArgument("unknown phase '" + s + "'");
}

json stopping_json(const StoppingConfig& s) {
  return {{"base_queries", s.base_queries},
          {"increment", s.increment},
          {"drop_threshold", s.drop_threshold},
          {"max_queries", s.max_queries}};
}

void read_stopping(const json& j, StoppingConfig& s, bool all_required) {
  static const std::set<std::string> keys{"base_queries", "increment", "drop_threshold", "max_queries"};
  for (const auto& [k, v] : j.items()) {
    if (!keys.count(k)) throw InvalidArgument("stopping: unknown field '" + k + "'");
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    } else if (all_required) {
      throw InvalidArgument(std::string("stopping: missing field '") + key + "'");
    }
  };
  read("base_queries", s.base_queries);
  read("increment", s.increment);
  read("drop_threshold", s.drop_threshold);
  read("max_queries", s.max_queries);
}

}  // namespace

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Calibrating:
      return "calibrating";
    case Phase::Learning:
      return "learning";
    case Phase::Stopped:
      return "stopped";
  }
  return "unknown";
}

std::string canonical_dump(const json& j) {
  std::string out;
  dump_into(j, out);
  return out;
}

// ---- config ----

void SessionConfig::validate() const {
  domain.validate();
  if (calibrate && calibration_queries < 1) throw InvalidArgument("session: calibration_queries must be >= 1");
  if (!(std::isfinite(kernel_gamma) && kernel_gamma > 0.0)) throw InvalidArgument("session: kernel_gamma must be positive");
  gmm_weights.validate();
  if (!(gmm_bandwidth_fraction > 0.0)) throw InvalidArgument("session: gmm bandwidth must be positive");
  if (pool_size < 1) throw InvalidArgument("session: pool_size must be >= 1");
  stopping.validate();
}

SessionConfig SessionConfig::from_request(const json& body) {
  if (!body.is_object()) throw InvalidArgument("session config must be a JSON object");
  static const std::set<std::string> keys{"task",   "domain",      "calibrate", "calibration_queries",
                                          "seed",   "kernel_gamma", "pool_size", "stopping"};
  for (const auto& [k, v] : body.items()) {
    if (!keys.count(k)) throw InvalidArgument("session config: unknown field '" + k + "'");
  }
  try {
    SessionConfig cfg;
    cfg.task = body.value("task", std::string("thermal"));
    MethodConfig method;
    if (cfg.task == "custom") {
      if (!body.contains("domain")) throw InvalidArgument("a custom task needs a domain");
      const auto& d = body.at("domain");
      cfg.domain.lower = point_from(d.at("lower"));
      cfg.domain.upper = point_from(d.at("upper"));
      cfg.domain.validate();
      method = MethodConfig::for_domain(cfg.domain);
    } else {
      if (body.contains("domain")) throw InvalidArgument("domain is fixed by the task; use task \"custom\"");
      const auto task = GroundTruthTask::from_name(cfg.task);
      cfg.domain = task.domain();
      method = MethodConfig::full(task);
    }
    cfg.calibrate = body.value("calibrate", false);
    cfg.calibration_queries = body.value("calibration_queries", 50);
    cfg.seed = body.value("seed", std::uint64_t{0});
    cfg.kernel_gamma = body.value("kernel_gamma", method.kernel.gamma);
    cfg.gmm_weights = method.gmm_weights;
    cfg.gmm_bandwidth_fraction = method.gmm_bandwidth_fraction;
    cfg.pool_size = body.value("pool_size", method.acquisition.pool_size);
    if (body.contains("stopping")) {
      if (!body.at("stopping").is_object()) throw InvalidArgument("stopping must be an object");
      read_stopping(body.at("stopping"), cfg.stopping, false);
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("session config: ") + e.what());
  }
}

json SessionConfig::to_json() const {
  return {{"task", task},
          {"domain", {{"lower", point_json(domain.lower)}, {"upper", point_json(domain.upper)}}},
          {"calibrate", calibrate},
          {"calibration_queries", calibration_queries},
          {"seed", seed},
          {"kernel_gamma", kernel_gamma},
          {"gmm", {{"weights", gmm_weights.w}, {"bandwidth_fraction", gmm_bandwidth_fraction}}},
          {"pool_size", pool_size},
          {"stopping", stopping_json(stopping)}};
}

SessionConfig SessionConfig::from_json(const json& j) {
  SessionConfig cfg;
  cfg.task = j.at("task").get<std::string>();
  cfg.domain.lower = point_from(j.at("domain").at("lower"));
  cfg.domain.upper = point_from(j.at("domain").at("upper"));
  cfg.calibrate = j.at("calibrate").get<bool>();
  cfg.calibration_queries = j.at("calibration_queries").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.kernel_gamma = j.at("kernel_gamma").get<double>();
  cfg.gmm_weights.w = j.at("gmm").at("weights").get<std::array<double, 4>>();
  cfg.gmm_bandwidth_fraction = j.at("gmm").at("bandwidth_fraction").get<double>();
  cfg.pool_size = j.at("pool_size").get<int>();
  read_stopping(j.at("stopping"), cfg.stopping, true);
  cfg.validate();
  return cfg;
}

// ---- records ----

json QueryRecord::to_json() const {
  json j{{"id", id},
         {"kind", kind_name(kind)},
         {"x1", point_json(x1)},
         {"x2", point_json(x2)},
         {"presented_at", presented_at}};
  if (answered()) {
    j["choice"] = *choice;
    j["level"] = to_int(*level);
    j["answered_at"] = *answered_at;
  }
  return j;
}

QueryRecord QueryRecord::from_json(const json& j) {
  QueryRecord r;
  r.id = j.at("id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "calibration" && kind != "learning") throw InvalidArgument("unknown query kind '" + kind + "'");
  r.kind = kind == "calibration" ? QueryKind::Calibration : QueryKind::Learning;
  r.x1 = point_from(j.at("x1"));
  r.x2 = point_from(j.at("x2"));
  r.presented_at = j.at("presented_at").get<std::int64_t>();
  if (j.contains("choice")) {
    r.choice = j.at("choice").get<int>();
    r.level = level_from_int(j.at("level").get<int>());
    r.answered_at = j.at("answered_at").get<std::int64_t>();
  }
  return r;
}

json PosteriorGrid::to_json() const {
  json pts = json::array();
  for (const auto& p : points) pts.push_back(point_json(p));
  return {{"points", pts}, {"mean", mean}, {"variance", variance}};
}

PosteriorGrid evaluate_posterior_grid(const PosteriorState& state, const GmmModel& gmm,
                                      std::vector<FeaturePoint> points) {
  PosteriorGrid out;
  const Vector mu = state.predict_means(points);
  const Vector var = state.predict_variances(points);
  out.mean.assign(mu.data(), mu.data() + mu.size());
  out.variance.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double g = gmm.density(points[i]);
    out.variance[i] = var[static_cast<Eigen::Index>(i)] / (g * g);
  }
  out.points = std::move(points);
  return out;
}

// ---- session ----

Session Session::create(SessionConfig cfg, std::string id) {
  cfg.validate();
  Session s;
  s.id_ = std::move(id);
  s.cfg_ = std::move(cfg);
  s.factors_ = default_uncertainty_factors();
  if (s.cfg_.calibrate) {
    const auto f_calib = GroundTruthTask::thermal().as_calibration_function();
    s.phase_ = Phase::Calibrating;
    s.calibration_pairs_ = generate_calibration_queries(
        f_calib.domain, static_cast<std::size_t>(s.cfg_.calibration_queries), splitmix64(s.cfg_.seed ^ kCalibrationSalt));
    s.calibration_ = std::make_shared<CalibrationSession>(f_calib);
  } else {
    s.phase_ = Phase::Learning;
  }
  s.refit();
  return s;
}

std::size_t Session::calibration_answered() const { return calibration_ ? calibration_->answers().size() : 0; }

const PosteriorState& Session::posterior() const {
  if (!state_) {
    KernelConfig kernel;
    kernel.gamma = cfg_.kernel_gamma;
    state_ = std::make_shared<const PosteriorState>(PosteriorState::fit(data_, kernel, factors_));
  }
  return *state_;
}

GmmModel Session::gmm() const {
  return GmmModel::for_domain(data_, cfg_.gmm_weights, cfg_.domain, cfg_.gmm_bandwidth_fraction);
}

void Session::refit() {
  state_.reset();
  update_snapshot();
}

void Session::update_snapshot() {
  const auto& st = posterior();
  json pts = json::array();
  for (const auto& p : data_.points()) pts.push_back(point_json(p));
  const Vector& f = st.f_lap();
  snapshot_ = {{"factors", factors_.u},
               {"points", pts},
               {"f_lap", std::vector<double>(f.data(), f.data() + f.size())},
               {"variance_trace", variance_trace_}};
}

AcquisitionConfig Session::acquisition() const {
  AcquisitionConfig acq;
  acq.u_acq = factors_.u[0];
  acq.pool_size = cfg_.pool_size;
  acq.rng_seed = splitmix64(cfg_.seed ^ kAcquisitionSalt);
  acq.candidate_source = cfg_.domain.dim() == 1 ? CandidateSource::Grid : CandidateSource::Uniform;
  return acq;
}

std::vector<FeaturePoint> Session::candidate_grid() const {
  if (cfg_.domain.dim() != 1) return {};
  return cfg_.domain.lattice(kCandidateGrid1d);
}

const QueryRecord& Session::issue(std::int64_t now_ms) {
  QueryRecord r;
  if (phase_ == Phase::Calibrating) {
    const auto& pair = calibration_pairs_.at(calibration_answered());
    r.kind = QueryKind::Calibration;
    r.x1 = pair.first;
    r.x2 = pair.second;
  } else {
    const auto grid = candidate_grid();
    const auto q = select_next_query(posterior(), gmm(), cfg_.domain, acquisition(), grid);
    r.kind = QueryKind::Learning;
    r.x1 = q.x1;
    r.x2 = q.x2;
  }
  r.id = "q" + std::to_string(next_number_++);
  r.presented_at = now_ms;
  pending_ = std::move(r);
  return *pending_;
}

const QueryRecord& Session::next_query(std::int64_t now_ms) {
  if (phase_ == Phase::Stopped) throw SessionStopped("session " + id_ + " has stopped");
  if (pending_) return *pending_;
  return issue(now_ms);
}

const QueryRecord& Session::issue_query(std::int64_t now_ms) {
  if (phase_ == Phase::Stopped) throw SessionStopped("session " + id_ + " has stopped");
  if (pending_) throw PendingQueryConflict("query " + pending_->id + " is still pending");
  return issue(now_ms);
}

void Session::finish_calibration() {
  const auto outcome = calibrate_user(*calibration_, cached_delta_flap_curve());
  factors_ = outcome.factors;
  warnings_ = outcome.warnings;
  calibrated_ = true;
  phase_ = Phase::Learning;
}

void Session::submit_answer(const std::string& query_id, int choice, int level, std::int64_t now_ms) {
  if (phase_ == Phase::Stopped) throw SessionStopped("session " + id_ + " has stopped");
  if (!pending_ || pending_->id != query_id) {
    for (const auto& r : transcript_) {
      if (r.id == query_id) throw StaleQuery("query " + query_id + " was already answered");
    }
    throw StaleQuery("unknown query id '" + query_id + "'");
  }
  if (choice != 1 && choice != 2) throw InvalidArgument("choice must be 1 or 2");
  const auto lvl = level_from_int(level);

  QueryRecord rec = *pending_;
  rec.choice = choice;
  rec.level = lvl;
  rec.answered_at = now_ms;

  if (rec.kind == QueryKind::Calibration) {
    calibration_->record(rec.x1, rec.x2, lvl);
    transcript_.push_back(std::move(rec));
    pending_.reset();
    if (calibration_answered() == static_cast<std::size_t>(cfg_.calibration_queries)) {
      finish_calibration();
      refit();
    }
    return;
  }

  // Fit on a copy first so a failed solve leaves the session untouched.
  PreferenceDataset data = data_;
  if (choice == 1) {
    data.add_comparison(rec.x1, rec.x2, lvl);
  } else {
    data.add_comparison(rec.x2, rec.x1, lvl);
  }
  KernelConfig kernel;
  kernel.gamma = cfg_.kernel_gamma;
  auto fitted = std::make_shared<const PosteriorState>(PosteriorState::fit(data, kernel, factors_));
  const auto g = GmmModel::for_domain(data, cfg_.gmm_weights, cfg_.domain, cfg_.gmm_bandwidth_fraction);
  const double v = mean_scaled_variance(*fitted, g, variance_grid(cfg_.domain));

  data_ = std::move(data);
  variance_trace_.push_back(v);
  transcript_.push_back(std::move(rec));
  pending_.reset();
  if (should_stop(variance_trace_, cfg_.stopping)) phase_ = Phase::Stopped;
  state_ = std::move(fitted);
  update_snapshot();
}

PosteriorGrid Session::posterior_grid(std::vector<FeaturePoint> points) const {
  if (phase_ == Phase::Calibrating) throw PhaseError("posterior is available once calibration has finished");
  for (const auto& p : points) {
    if (static_cast<std::size_t>(p.size()) != cfg_.domain.dim()) throw DimensionMismatch("posterior: grid dimension");
  }
  return evaluate_posterior_grid(posterior(), gmm(), std::move(points));
}

json Session::factors_json() const {
  return {{"u1", factors_.u[0]},
          {"u2", factors_.u[1]},
          {"u3", factors_.u[2]},
          {"u4", factors_.u[3]},
          {"provenance", calibrated_ ? "calibrated" : "default"},
          {"warnings", warnings_}};
}

json Session::status_json() const {
  json j{{"schema_version", kSessionSchemaVersion},
         {"id", id_},
         {"phase", phase_name(phase_)},
         {"task", cfg_.task},
         {"domain", {{"lower", point_json(cfg_.domain.lower)}, {"upper", point_json(cfg_.domain.upper)}}},
         {"uncertainty_factors", factors_json()},
         {"progress",
          {{"answered", transcript_.size()},
           {"calibration_answered", calibration_answered()},
           {"calibration_total", cfg_.calibrate ? cfg_.calibration_queries : 0},
           {"learning_answered", learning_answered()}}},
         {"stopping", stopping_json(cfg_.stopping)},
         {"variance_trace", variance_trace_}};
  j["pending"] = pending_ ? pending_->to_json() : json(nullptr);
  return j;
}

json Session::to_json() const {
  json transcript = json::array();
  for (const auto& r : transcript_) transcript.push_back(r.to_json());
  json j{{"schema_version", kSessionSchemaVersion},
         {"id", id_},
         {"phase", phase_name(phase_)},
         {"config", cfg_.to_json()},
         {"uncertainty_factors", factors_json()},
         {"transcript", transcript},
         {"next_query_number", next_number_},
         {"variance_trace", variance_trace_},
         {"posterior", snapshot_}};
  j["pending"] = pending_ ? pending_->to_json() : json(nullptr);
  return j;
}

Session Session::deserialize(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptSessionError(std::string("session file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version") || !j.at("schema_version").is_number_integer()) {
    throw CorruptSessionError("session file has no schema_version");
  }
  const auto version = j.at("schema_version").get<std::int64_t>();
  if (version != kSessionSchemaVersion) {
    throw SchemaVersionError("session schema_version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kSessionSchemaVersion) + ")");
  }
  try {
    Session s;
    s.id_ = j.at("id").get<std::string>();
    s.cfg_ = SessionConfig::from_json(j.at("config"));
    s.phase_ = phase_from(j.at("phase").get<std::string>());
    const auto& jf = j.at("uncertainty_factors");
    for (std::size_t l = 0; l < 4; ++l) s.factors_.u[l] = jf.at("u" + std::to_string(l + 1)).get<double>();
    s.factors_.validate();
    const auto provenance = jf.at("provenance").get<std::string>();
    if (provenance != "default" && provenance != "calibrated") {
      throw InvalidArgument("unknown factor provenance '" + provenance + "'");
    }
    s.calibrated_ = provenance == "calibrated";
    s.warnings_ = jf.at("warnings").get<std::vector<std::string>>();
    s.next_number_ = j.at("next_query_number").get<int>();
    s.variance_trace_ = j.at("variance_trace").get<std::vector<double>>();
    s.snapshot_ = j.at("posterior");
    if (s.cfg_.calibrate) {
      const auto f_calib = GroundTruthTask::thermal().as_calibration_function();
      s.calibration_pairs_ = generate_calibration_queries(f_calib.domain,
                                                          static_cast<std::size_t>(s.cfg_.calibration_queries),
                                                          splitmix64(s.cfg_.seed ^ kCalibrationSalt));
      s.calibration_ = std::make_shared<CalibrationSession>(f_calib);
    }
    for (const auto& jr : j.at("transcript")) {
      auto r = QueryRecord::from_json(jr);
      if (!r.answered()) throw InvalidArgument("transcript entry " + r.id + " has no answer");
      if (r.kind == QueryKind::Calibration) {
        if (!s.calibration_) throw InvalidArgument("calibration answer in a session without calibration");
        s.calibration_->record(r.x1, r.x2, *r.level);
      } else if (*r.choice == 1) {
        s.data_.add_comparison(r.x1, r.x2, *r.level);
      } else {
        s.data_.add_comparison(r.x2, r.x1, *r.level);
      }
      s.transcript_.push_back(std::move(r));
    }
    if (!j.at("pending").is_null()) s.pending_ = QueryRecord::from_json(j.at("pending"));
    if (s.variance_trace_.size() != s.data_.num_pairs()) throw InvalidArgument("variance trace length mismatch");
    return s;
  } catch (const json::exception& e) {
    throw CorruptSessionError(std::string("session file has an unexpected layout: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw CorruptSessionError(std::string("session file is inconsistent: ") + e.what());
  }
}

Session Session::replay(const Session& stored) {
  auto s = create(stored.cfg_, stored.id_);
  for (const auto& rec : stored.transcript_) {
    const auto& q = s.issue_query(rec.presented_at);
    if (!bit_equal(q.x1, rec.x1) || !bit_equal(q.x2, rec.x2)) {
      throw Error("replay diverged at query " + rec.id);
    }
    s.submit_answer(q.id, *rec.choice, to_int(*rec.level), *rec.answered_at);
  }
  if (stored.pending_) s.issue_query(stored.pending_->presented_at);
  return s;
}

}  // namespace uupl
