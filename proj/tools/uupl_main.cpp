#include "uupl/service.hpp"
#include "uupl/simulation.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <iostream>

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve(int port, const std::string& host, const std::string& data_dir, const std::string& cors_origin) {
  // Environment wins over flags so deployments can pin these without editing command lines.
  std::string dir = data_dir;
  if (const char* env = std::getenv("UUPL_DATA_DIR"); env && *env) dir = env;
  if (const char* env = std::getenv("UUPL_PORT"); env && *env) {
    try {
      port = std::stoi(env);
    } catch (const std::exception&) {
      throw uupl::InvalidArgument(std::string("UUPL_PORT is not a port number: ") + env);
    }
  }
  if (port < 0 || port > 65535) throw uupl::InvalidArgument("port out of range: " + std::to_string(port));

  uupl::ServiceConfig cfg;
  cfg.data_dir = dir;
  cfg.cors_origin = cors_origin;
  uupl::ElicitationService service(cfg);
  httplib::Server server;
  service.install(server);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw uupl::IoError("cannot bind " + host + ":" + std::to_string(port));
  spdlog::info("serving on http://{}:{} (data in {})", host, bound, dir);
  server.listen_after_bind();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uupl"};
  app.require_subcommand(1);

  std::string task = "thermal", method = "full", out, format = "csv";
  int trials = 6, iters = 50;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  auto* sim = app.add_subcommand("simulate", "run simulated trials for one method");
  sim->add_option("--task", task)->check(CLI::IsMember({"thermal", "tabletop", "driving"}));
  sim->add_option("--method", method)->check(CLI::IsMember({"full", "no-gmm", "no-likelihood", "baseline"}));
  auto* abl = app.add_subcommand("ablation", "run all four ablation arms");
  abl->add_option("--task", task)->check(CLI::IsMember({"thermal", "tabletop", "driving"}));
  for (auto* sub : {sim, abl}) {
    sub->add_option("--trials", trials)->check(CLI::PositiveNumber);
    sub->add_option("--iters", iters)->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed);
    sub->add_option("--out", out);
    sub->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", threads, "worker threads (0 = hardware)");
  }

  int port = 8080;
  std::string host = "127.0.0.1", data_dir = "uupl-data", cors_origin = "*";
  auto* srv = app.add_subcommand("serve", "run the elicitation HTTP service");
  srv->add_option("--port", port, "0 picks a free port; UUPL_PORT overrides");
  srv->add_option("--host", host);
  srv->add_option("--data-dir", data_dir, "session directory; UUPL_DATA_DIR overrides");
  srv->add_option("--cors-origin", cors_origin);
  CLI11_PARSE(app, argc, argv);

  try {
    if (srv->parsed()) return serve(port, host, data_dir, cors_origin);
    const auto t = uupl::GroundTruthTask::from_name(task);
    std::vector<uupl::MethodConfig> methods;
    if (sim->parsed()) {
      methods.push_back(uupl::MethodConfig::named(method, t));
    } else {
      methods = uupl::ablation_methods(t);
    }
    const auto oracle = uupl::OracleConfig::for_task(t);
    const auto summary = uupl::run_experiment(t, methods, oracle, trials, iters, seed, threads);
    for (const auto& m : summary.methods) {
      std::cerr << m.name << ": final accuracy " << m.mean_final << " +/- " << m.std_final << "\n";
    }
    const auto fmt = format == "json" ? uupl::ExportFormat::Json : uupl::ExportFormat::Csv;
    if (out.empty()) {
      std::cout << (fmt == uupl::ExportFormat::Json ? uupl::results_to_json(summary) : uupl::results_to_csv(summary));
    } else {
      uupl::export_results(summary, out, fmt);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
