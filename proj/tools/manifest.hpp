#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace lqe::cli {

struct RunManifest {
  std::string command;
  std::string config;  // key = value snapshot
  std::uint64_t seed = 0;
  std::string code_version;
  std::string dataset_fingerprint;
  std::string started_at;  // UTC, ISO-8601
  std::string output_dir;
};

/// Writes manifest.json; refuses to overwrite an existing manifest.
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

/// Writes completed.json next to the manifest with the end timestamp and a summary.
void write_completion(const std::filesystem::path& dir, const std::string& summary_json);

std::string utc_timestamp();

}  // namespace lqe::cli
