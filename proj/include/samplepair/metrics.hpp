#pragma once

// Per-epoch metrics, the CSV emitted for plotting and the run manifest.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "samplepair/config.hpp"
#include "samplepair/schedule.hpp"
#include "samplepair/version.hpp"

namespace samplepair {

struct EpochRecord {
  std::int64_t epoch = 0;
  Phase phase = Phase::Warmup;
  double train_err = 0.0;
  double train_loss = 0.0;
  double val_err = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

using MetricsLog = std::vector<EpochRecord>;

inline constexpr const char* kMetricsHeader =
    "epoch,phase,train_err,train_loss,val_err,val_loss,seconds";

/// Fixed formatting: rates and losses with 6 decimals, wall time with 3.
inline std::string format_record(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%lld,%s,%.6f,%.6f,%.6f,%.6f,%.3f",
                static_cast<long long>(r.epoch), std::string(phase_name(r.phase)).c_str(),
                r.train_err, r.train_loss, r.val_err, r.val_loss, r.seconds);
  return buf;
}

inline std::string metrics_csv(const MetricsLog& log) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : log) out += format_record(r) + "\n";
  return out;
}

/// Parses a CSV written by metrics_csv (used by tests and plotting helpers).
inline MetricsLog parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error("metrics CSV: unexpected header");
  MetricsLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw std::runtime_error("metrics CSV: bad row '" + line + "'");
    log.push_back({std::stoll(f[0]), parse_phase(f[1]), std::stod(f[2]), std::stod(f[3]),
                   std::stod(f[4]), std::stod(f[5]), std::stod(f[6])});
  }
  return log;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void emit_metrics(const MetricsLog& log, const std::filesystem::path& path) {
  write_text(path, metrics_csv(log));
}

struct DatasetFingerprint {
  std::string role;
  std::string name;
  std::size_t size = 0;
  std::string checksum;
};

/// Config echo, seeds, dataset checksums and code version.
inline nlohmann::json make_manifest(const ExperimentConfig& cfg,
                                    const std::vector<DatasetFingerprint>& datasets) {
  nlohmann::json ds = nlohmann::json::array();
  for (const auto& d : datasets)
    ds.push_back({{"role", d.role}, {"name", d.name}, {"size", d.size}, {"sha256", d.checksum}});
  return {{"format", "samplepair-manifest"},
          {"version", 1},
          {"code_version", kVersion},
          {"config", cfg},
          {"seeds", {{"data", cfg.seeds.data}, {"init", cfg.seeds.init},
                     {"augmentation", cfg.seeds.augmentation}}},
          {"datasets", ds}};
}

inline ExperimentConfig config_from_manifest(const nlohmann::json& manifest) {
  if (manifest.value("format", std::string()) != "samplepair-manifest")
    throw ConfigError("not a run manifest");
  auto cfg = manifest.at("config").get<ExperimentConfig>();
  cfg.validate();
  return cfg;
}

}  // namespace samplepair
