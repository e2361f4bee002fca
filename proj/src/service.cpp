#include "uupl/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <chrono>

namespace uupl {

using nlohmann::json;

namespace {

class GridTooLarge : public Error {
 public:
  using Error::Error;
};

ApiResponse ok(json j, int status = 200) {
  j["schema_version"] = kSessionSchemaVersion;
  return {status, canonical_dump(j)};
}

ApiResponse fail(int status, const std::string& code, const std::string& message) {
  json j{{"schema_version", kSessionSchemaVersion}, {"error", {{"code", code}, {"message", message}}}};
  return {status, canonical_dump(j)};
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("request body is not valid JSON: ") + e.what());
  }
}

int int_field(const json& j, const char* key) {
  if (!j.contains(key)) throw InvalidArgument(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw InvalidArgument(std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

std::vector<std::size_t> parse_grid_spec(const std::string& spec, std::size_t dim) {
  std::vector<std::size_t> counts;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto end = std::min(spec.find(',', start), spec.size());
    std::size_t n = 0;
    const char* first = spec.data() + start;
    const char* last = spec.data() + end;
    auto [p, ec] = std::from_chars(first, last, n);
    if (ec != std::errc() || p != last || n == 0) throw InvalidArgument("grid: expected positive counts, got '" + spec + "'");
    counts.push_back(n);
    start = end + 1;
  }
  if (counts.size() == 1) counts.assign(dim, counts.front());
  if (counts.size() != dim) {
    throw InvalidArgument("grid: " + std::to_string(counts.size()) + " counts for a " + std::to_string(dim) +
                          "-dimensional domain");
  }
  return counts;
}

ElicitationService::ElicitationService(ServiceConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.data_dir) {}

std::int64_t ElicitationService::now() const {
  if (cfg_.clock) return cfg_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::shared_ptr<std::mutex> ElicitationService::lock_for(const std::string& id) {
  std::lock_guard<std::mutex> g(locks_mutex_);
  auto& m = locks_[id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

template <class F>
ApiResponse ElicitationService::guarded(F&& f) {
  try {
    return f();
  } catch (const SessionNotFound& e) {
    return fail(404, "not_found", e.what());
  } catch (const PendingQueryConflict& e) {
    return fail(409, "pending_query", e.what());
  } catch (const StaleQuery& e) {
    return fail(409, "stale_query", e.what());
  } catch (const PhaseError& e) {
    return fail(409, "wrong_phase", e.what());
  } catch (const SessionStopped& e) {
    return fail(410, "session_stopped", e.what());
  } catch (const GridTooLarge& e) {
    return fail(413, "grid_too_large", e.what());
  } catch (const InvalidArgument& e) {
    return fail(400, "invalid_argument", e.what());
  } catch (const SchemaVersionError& e) {
    spdlog::error("{}", e.what());
    return fail(500, "schema_version", e.what());
  } catch (const CorruptSessionError& e) {
    spdlog::error("{}", e.what());
    return fail(500, "corrupt_session", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return fail(500, "internal", e.what());
  }
}

ApiResponse ElicitationService::create_session(const std::string& body) {
  return guarded([&] {
    const auto cfg = SessionConfig::from_request(body.empty() ? json::object() : parse_body(body));
    std::string id;
    do {
      id = new_session_id();
    } while (store_.exists(id));
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    const auto s = Session::create(cfg, id);
    store_.save(s);
    spdlog::info("session {} created ({}, {})", id, cfg.task, phase_name(s.phase()));
    return ok(s.status_json(), 201);
  });
}

ApiResponse ElicitationService::get_session(const std::string& id) {
  return guarded([&] { return ok(store_.load(id).status_json()); });
}

ApiResponse ElicitationService::get_query(const std::string& id) {
  return guarded([&] {
    {
      // Fast path: a pending query is answered from the file without locking.
      const auto s = store_.load(id);
      if (s.pending()) return ok({{"id", id}, {"phase", phase_name(s.phase())}, {"query", s.pending()->to_json()}});
    }
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    auto s = store_.load(id);
    const bool fresh = !s.pending();
    const auto q = s.next_query(now());
    if (fresh) store_.save(s);
    return ok({{"id", id}, {"phase", phase_name(s.phase())}, {"query", q.to_json()}});
  });
}

ApiResponse ElicitationService::post_answer(const std::string& id, const std::string& body) {
  return guarded([&] {
    const auto req = parse_body(body);
    if (!req.is_object()) throw InvalidArgument("answer must be a JSON object");
    if (!req.contains("query_id") || !req.at("query_id").is_string()) {
      throw InvalidArgument("field 'query_id' must be a string");
    }
    const auto qid = req.at("query_id").get<std::string>();
    const int choice = int_field(req, "choice");
    const int level = int_field(req, "level");
    auto lock = lock_for(id);
    std::lock_guard<std::mutex> g(*lock);
    auto s = store_.load(id);
    s.submit_answer(qid, choice, level, now());
    store_.save(s);
    return ok(s.status_json());
  });
}

ApiResponse ElicitationService::get_posterior(const std::string& id, const std::optional<std::string>& grid) {
  return guarded([&] {
    const auto s = store_.load(id);
    const auto& domain = s.config().domain;
    std::vector<std::size_t> counts =
        grid ? parse_grid_spec(*grid, domain.dim()) : std::vector<std::size_t>(domain.dim(), domain.dim() <= 2 ? 101 : 9);
    std::size_t cells = 1;
    for (auto c : counts) {
      if (c > cfg_.max_grid_cells || cells > cfg_.max_grid_cells / c) {
        throw GridTooLarge("grid exceeds " + std::to_string(cfg_.max_grid_cells) + " cells");
      }
      cells *= c;
    }
    const auto result = s.posterior_grid(domain.lattice(counts));
    json j = result.to_json();
    j["id"] = id;
    j["phase"] = phase_name(s.phase());
    j["grid"] = counts;
    return ok(std::move(j));
  });
}

ApiResponse ElicitationService::export_session(const std::string& id) {
  return guarded([&] { return ApiResponse{200, store_.load_text(id)}; });
}

void ElicitationService::install(httplib::Server& server) {
  const std::string origin = cfg_.cors_origin;
  auto send = [origin](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Vary", "Origin");
  });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Get(R"(/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_session(req.matches[1]));
  });
  server.Get(R"(/sessions/([^/]+)/query)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_query(req.matches[1]));
  });
  server.Post(R"(/sessions/([^/]+)/answer)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_answer(req.matches[1], req.body));
  });
  server.Get(R"(/sessions/([^/]+)/posterior)", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> grid;
    if (req.has_param("grid")) grid = req.get_param_value("grid");
    send(res, get_posterior(req.matches[1], grid));
  });
  server.Get(R"(/sessions/([^/]+)/export)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, export_session(req.matches[1]));
  });
  server.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      send(res, fail(res.status, res.status == 404 ? "not_found" : "http_error", "no such endpoint"));
    }
  });
}

}  // namespace uupl
