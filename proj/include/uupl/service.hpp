#pragma once

#include "uupl/session_store.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

namespace httplib {
class Server;
}

namespace uupl {

struct ServiceConfig {
  std::filesystem::path data_dir = "uupl-data";
  std::string cors_origin = "*";
  std::size_t max_grid_cells = 50000;
  /// Unix milliseconds; replaceable so tests get stable timestamps.
  std::function<std::int64_t()> clock;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // canonical JSON
};

/// The elicitation API. Every method is safe to call from several threads;
/// writes to one session are serialized, reads go straight to the stored file.
class ElicitationService {
 public:
  explicit ElicitationService(ServiceConfig cfg);

  ApiResponse create_session(const std::string& body);
  ApiResponse get_session(const std::string& id);
  ApiResponse get_query(const std::string& id);
  ApiResponse post_answer(const std::string& id, const std::string& body);
  /// `grid` is one point count for every axis ("161") or one per axis ("101,51").
  ApiResponse get_posterior(const std::string& id, const std::optional<std::string>& grid);
  ApiResponse export_session(const std::string& id);

  /// Routes plus CORS headers on every response.
  void install(httplib::Server& server);

  const SessionStore& store() const { return store_; }

 private:
  std::shared_ptr<std::mutex> lock_for(const std::string& id);
  std::int64_t now() const;
  template <class F>
  ApiResponse guarded(F&& f);

  ServiceConfig cfg_;
  SessionStore store_;
  std::mutex locks_mutex_;
  std::unordered_map<std::string, std::shared_ptr<std::mutex>> locks_;
};

/// Parses a grid spec into per-axis counts; InvalidArgument when malformed.
std::vector<std::size_t> parse_grid_spec(const std::string& spec, std::size_t dim);

}  // namespace uupl
