#include "manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lqe/error.hpp"

namespace lqe::cli {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  const auto path = dir / "manifest.json";
  if (std::filesystem::exists(path)) throw IoError("manifest already exists: " + path.string());
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["code_version"] = m.code_version;
  j["dataset_fingerprint"] = m.dataset_fingerprint;
  j["started_at"] = m.started_at;
  j["output_dir"] = m.output_dir;
  j["config"] = m.config;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest in " + dir.string());
  const auto j = nlohmann::json::parse(in);
  RunManifest m;
  m.command = j.at("command");
  m.seed = j.at("seed");
  m.code_version = j.at("code_version");
  m.dataset_fingerprint = j.at("dataset_fingerprint");
  m.started_at = j.at("started_at");
  m.output_dir = j.at("output_dir");
  m.config = j.at("config");
  return m;
}

void write_completion(const std::filesystem::path& dir, const std::string& summary_json) {
  nlohmann::ordered_json j;
  j["finished_at"] = utc_timestamp();
  j["summary"] = nlohmann::json::parse(summary_json);
  std::ofstream out(dir / "completed.json");
  if (!out) throw IoError("cannot write completed.json in " + dir.string());
  out << j.dump(2) << '\n';
}

}  // namespace lqe::cli
