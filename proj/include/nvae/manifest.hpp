#pragma once

#include <chrono>
#include <ctime>
#include <string>
#include <vector>

#include "nvae/io.hpp"

#include <json.hpp>

namespace nvae {

inline const char* kToolVersion = "0.1.0";

// Reproducibility sidecar written next to every command's primary output:
// the resolved configuration, digests of every input file, the seed, and the
// tool version. Timestamps live only here, so all other outputs are
// byte-stable across reruns.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string started_utc;
  std::string finished_utc;

  void add_input(const std::string& path) {
    inputs.emplace_back(path, file_digest(path));
  }

  static std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void write(const std::string& primary_output) const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    nlohmann::json ins = nlohmann::json::object();
    for (const auto& [path, digest] : inputs) ins[path] = digest;
    j["inputs"] = ins;
    j["outputs"] = outputs;
    j["seed"] = seed;
    j["tool_version"] = kToolVersion;
    j["started_utc"] = started_utc;
    j["finished_utc"] = finished_utc;
    atomic_write_text(primary_output + ".manifest.json", j.dump(2) + "\n");
  }
};

}  // namespace nvae
