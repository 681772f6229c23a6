#pragma once

// Pipeline configuration read from an INI file with [data], [synth], [model],
// [pipeline], [explain] and [plots] sections. Unknown keys are rejected so a
// typo never silently falls back to a default.

#include "emaattn/dataset.hpp"
#include "emaattn/explain.hpp"
#include "emaattn/model.hpp"
#include "emaattn/synth.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace emaattn {

struct SynthBlock {
  SynthConfig config;
  // Generator seed; without one the pipeline seed is used.
  std::optional<std::uint64_t> seed;
  SignalKind kind = SignalKind::mean_shift;
  double amplitude = 0.3;
};

struct PlotToggles {
  bool correlation_bars = true;
  bool heatmaps = true;
  bool scatter = true;
  bool summaries = true;
};

struct PipelineConfig {
  std::filesystem::path dataset;  // ignored when synth is set
  std::filesystem::path labels;
  std::optional<SynthBlock> synth;
  int k = 3;
  Normalization normalization = Normalization::min_max;
  std::optional<int> t_cap;
  // Cluster labels from k-means on the data instead of a labels file.
  bool kmeans_labels = false;

  Hyperparams hyper;
  std::vector<Variant> variants{Variant::recurrent_baseline, Variant::temporal_only, Variant::dual};
  double split = 0.7;
  std::filesystem::path output_dir = "emaattn_out";
  std::uint64_t seed = 0;

  ExplainOptions explain;
  int scatter_feature = 0;
  int interaction_a = 0;
  int interaction_b = 1;
  int summaries_per_cluster = 1;
  PlotToggles plots;
};

// Relative paths resolve against `base_dir`. Throws Errc::config_error.
PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

// Checks run before any compute: split range, variants, input files exist.
void validate_config(const PipelineConfig& cfg);

// Canonical text of every effective setting; hashed into the run manifest.
std::string canonical_config(const PipelineConfig& cfg);

}  // namespace emaattn
