#include "uupl/errors.hpp"
#include "uupl/simulation.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace uupl {

namespace {

constexpr int kSchemaVersion = 1;

const char* format_ext(ExportFormat f) { return f == ExportFormat::Csv ? "csv" : "json"; }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalError("format_double failed");
  return std::string(buf, end);
}

std::string results_to_csv(const ExperimentSummary& summary) {
  std::ostringstream out;
  out << "task,method,trial,iteration,accuracy\n";
  for (const auto& m : summary.methods) {
    for (std::size_t t = 0; t < m.trials.size(); ++t) {
      const auto& trace = m.trials[t].trace;
      for (std::size_t i = 0; i < trace.size(); ++i) {
        out << summary.task << ',' << m.name << ',' << t << ',' << (i + 1) << ',' << format_double(trace[i]) << '\n';
      }
    }
  }
  return out.str();
}

std::string results_to_json(const ExperimentSummary& summary) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["task"] = summary.task;
  j["iters"] = summary.iters;
  j["base_seed"] = summary.base_seed;
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& m : summary.methods) {
    nlohmann::ordered_json jm;
    jm["name"] = m.name;
    jm["mean_final"] = m.mean_final;
    jm["std_final"] = m.std_final;
    jm["trials"] = nlohmann::ordered_json::array();
    for (const auto& t : m.trials) {
      nlohmann::ordered_json jt;
      jt["seed"] = t.seed;
      jt["final_accuracy"] = t.final_accuracy;
      jt["trace"] = t.trace;
      jm["trials"].push_back(std::move(jt));
    }
    j["methods"].push_back(std::move(jm));
  }
  return j.dump(2) + "\n";
}

ExperimentSummary results_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("results: malformed JSON: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw IoError("results: unsupported schema_version " + j.at("schema_version").dump());
    }
    ExperimentSummary s;
    s.task = j.at("task").get<std::string>();
    s.iters = j.at("iters").get<int>();
    s.base_seed = j.at("base_seed").get<std::uint64_t>();
    for (const auto& jm : j.at("methods")) {
      MethodSummary m;
      m.name = jm.at("name").get<std::string>();
      m.mean_final = jm.at("mean_final").get<double>();
      m.std_final = jm.at("std_final").get<double>();
      for (const auto& jt : jm.at("trials")) {
        TrialResult t;
        t.seed = jt.at("seed").get<std::uint64_t>();
        t.final_accuracy = jt.at("final_accuracy").get<double>();
        t.trace = jt.at("trace").get<std::vector<double>>();
        m.trials.push_back(std::move(t));
      }
      s.methods.push_back(std::move(m));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("results: unexpected layout: ") + e.what());
  }
}

void export_results(const ExperimentSummary& summary, const std::filesystem::path& path, ExportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing " + format_ext(format));
  out << (format == ExportFormat::Csv ? results_to_csv(summary) : results_to_json(summary));
  if (!out) throw IoError("write failed: " + path.string());
}

ExperimentSummary load_results_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return results_from_json(ss.str());
}

}  // namespace uupl
