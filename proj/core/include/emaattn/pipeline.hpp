#pragma once

// End-to-end orchestration: ingest or generate, split, train every configured
// variant, evaluate, explain, render, and record a manifest of the outputs.

#include "emaattn/config.hpp"
#include "emaattn/ensemble.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emaattn {

const char* library_version();

struct ManifestEntry {
  std::string path;  // relative to the output directory, '/' separated
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::map<std::string, std::string> versions;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage, run order
  std::vector<ManifestEntry> files;                     // sorted by path
};

std::string manifest_json(const RunManifest& manifest);

// Everything downstream of ingestion, in the dataset's id order.
struct PreparedData {
  PaddedDataset padded;
  ClusterLabels labels;
  PaddedDataset train;
  PaddedDataset test;
  std::optional<GroundTruthSpec> truth;
  MtsDataset raw;  // before normalisation
};

PreparedData prepare_data(const PipelineConfig& cfg);

struct RunOptions {
  bool train = true;
  bool explain = true;
  // Used instead of training when train is false.
  std::vector<EnsembleModel> pretrained;
};

// Errors are rethrown with the failing stage prefixed to the message.
RunManifest run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

// EMAATTN_OUT, when set and non-empty, replaces the configured output directory.
void apply_environment(PipelineConfig& cfg);

std::string sha256_hex(const std::string& bytes);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace emaattn
