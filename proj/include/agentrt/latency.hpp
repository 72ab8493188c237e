#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentrt {

/// Configurable per-stage delays of one inference cycle, in milliseconds.
/// Defaults follow the measured budget: network 6, preprocessing 6.8,
/// vision encoder 39, prefill 52, 3.1 per decode step.
struct LatencyModel {
  double network_ms = 6.0;  // treated as round-trip
  double preprocess_ms = 6.8;
  double vision_ms = 39.0;
  double prefill_ms = 52.0;
  double decode_per_token_ms = 3.1;
  double overlap_ms = 0.0;  // pipelining credit subtracted from the stage sum
  // Scripted decode profile. When set, overrides the per-cycle step counts
  // derived from the actual token stream.
  std::optional<double> first_chunk_forward_steps;
  double reasoning_forward_steps = 43.1;  // total steps on thinking cycles

  double stage_sum_ms() const {
    return network_ms + preprocess_ms + vision_ms + prefill_ms - overlap_ms;
  }
};

class DeadlineConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline LatencyModel latency_from_json(const nlohmann::json& j) {
  LatencyModel m;
  m.network_ms = j.value("network_ms", m.network_ms);
  m.preprocess_ms = j.value("preprocess_ms", m.preprocess_ms);
  m.vision_ms = j.value("vision_ms", m.vision_ms);
  m.prefill_ms = j.value("prefill_ms", m.prefill_ms);
  m.decode_per_token_ms = j.value("decode_per_token_ms", m.decode_per_token_ms);
  m.overlap_ms = j.value("overlap_ms", m.overlap_ms);
  if (j.contains("first_chunk_forward_steps")) {
    m.first_chunk_forward_steps = j.at("first_chunk_forward_steps").get<double>();
  }
  m.reasoning_forward_steps =
      j.value("reasoning_forward_steps", m.reasoning_forward_steps);
  return m;
}

/// Loads a latency config. Files ending in .toml are read as flat
/// `key = value` pairs; anything else is JSON.
inline LatencyModel load_latency_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open latency config: " + path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml") {
    nlohmann::json j = nlohmann::json::object();
    std::string line;
    while (std::getline(in, line)) {
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty() || value.empty()) continue;
      j[key] = std::stod(value);
    }
    return latency_from_json(j);
  }
  nlohmann::json j;
  in >> j;
  return latency_from_json(j);
}

}  // namespace agentrt
