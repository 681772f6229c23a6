#pragma once

#include "emaattn/numkit.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace emaattn {

// One individual's observed series. values is V x T_i, columns are time-points.
struct IndividualSeries {
  std::string id;
  Matrix values;

  int t_len() const { return static_cast<int>(values.cols()); }
  int v() const { return static_cast<int>(values.rows()); }
};

struct MtsDataset {
  std::vector<IndividualSeries> individuals;
  std::vector<std::string> feature_names;

  std::size_t size() const { return individuals.size(); }
  int v() const { return static_cast<int>(feature_names.size()); }
  std::vector<std::string> ids() const;
};

// Rectangular N x V x T view. Each tensor entry is V x t_pad; mask[i] is true on
// the observed prefix and padded cells hold 0.0.
struct PaddedDataset {
  std::vector<std::string> ids;
  std::vector<Matrix> tensor;
  std::vector<Mask> mask;
  std::vector<std::string> feature_names;
  int t_pad = 0;

  std::size_t size() const { return ids.size(); }
  int v() const { return static_cast<int>(feature_names.size()); }
  int t_valid(std::size_t i) const;
  // Columns of individual i restricted to its mask.
  Matrix observed(std::size_t i) const;
};

struct ClusterLabels {
  std::map<std::string, int> assignment;
  int k = 0;

  int cluster_of(const std::string& id) const;  // throws Errc::missing_id
  std::size_t cluster_size(int c) const;
};

struct IngestConfig {
  char delimiter = ',';
};

MtsDataset parse_dataset(std::istream& in, const IngestConfig& cfg = {});
MtsDataset load_dataset(const std::filesystem::path& path, const IngestConfig& cfg = {});
void write_dataset(std::ostream& out, const MtsDataset& ds);

enum class Normalization { min_max, z_score, none };

Normalization parse_normalization(const std::string& name);
MtsDataset normalize_per_individual(const MtsDataset& ds, Normalization mode);

PaddedDataset pad_and_mask(const MtsDataset& ds, std::optional<int> t_cap = std::nullopt);
MtsDataset strip_padding(const PaddedDataset& pd);

// Per individual: train = first floor(frac * T_i) observed points, test = the rest.
std::pair<PaddedDataset, PaddedDataset> temporal_split(const PaddedDataset& pd, double frac);

ClusterLabels parse_cluster_labels(std::istream& in, int k);
ClusterLabels load_cluster_labels(const std::filesystem::path& path, int k);
void write_cluster_labels(std::ostream& out, const ClusterLabels& labels);

// Checks k >= 2, labels in range and every cluster nonempty.
void validate_labels(const ClusterLabels& labels);

// Throws Errc::missing_id unless every id of `ids` is labelled.
void check_labels_cover(const ClusterLabels& labels, const std::vector<std::string>& ids);

}  // namespace emaattn
