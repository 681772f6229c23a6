#pragma once

#include "emaattn/dataset.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace emaattn {

enum class SignalKind { mean_shift, oscillation, anti_correlated_pair };

const char* to_string(SignalKind kind);
SignalKind parse_signal_kind(const std::string& name);

// Planted structure of one cluster. Windows are fractions of each individual's
// own length. For anti_correlated_pair, features[0] is pushed down and
// features[1] up inside the windows.
struct ClusterSignal {
  std::vector<int> features;
  std::vector<std::pair<double, double>> windows;
  SignalKind kind = SignalKind::mean_shift;
  double amplitude = 0.3;
};

struct GroundTruthSpec {
  std::vector<ClusterSignal> clusters;
};

struct SynthConfig {
  int n_per_cluster = 20;
  // Optional per-cluster sizes overriding n_per_cluster (imbalanced designs).
  std::vector<int> cluster_sizes;
  int k = 3;
  int v = 12;
  int t_min = 112;
  int t_max = 224;
  int likert_levels = 7;
  double noise_sd = 0.15;
  std::uint64_t seed = 1;

  int size_of(int cluster) const;
};

struct SynthResult {
  MtsDataset dataset;
  ClusterLabels labels;
  GroundTruthSpec truth;
};

// AR(1) coefficient of the baseline noise.
inline constexpr double kBaselineAr = 0.6;

// One planted feature per cluster (feature c for cluster c; a pair 2c, 2c+1 for
// anti_correlated_pair) with staggered windows inside the first 70% of the series.
GroundTruthSpec default_ground_truth(int k, int v, SignalKind kind = SignalKind::mean_shift,
                                     double amplitude = 0.3);

SynthResult generate(const SynthConfig& config, const GroundTruthSpec& spec);

std::string ground_truth_to_json(const GroundTruthSpec& spec);
GroundTruthSpec ground_truth_from_json(const std::string& text);

// k-means++ on per-individual feature means (Euclidean), at most 100 Lloyd
// iterations, ties broken towards the lowest cluster index.
ClusterLabels kmeans_labels(const PaddedDataset& pd, int k, std::uint64_t seed);

// splitmix64 finalizer; used to derive independent per-individual streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace emaattn
