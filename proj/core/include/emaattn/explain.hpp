#pragma once

// Turns per-individual attention weights into cluster- and individual-level
// explanation artifacts, plus CSV writers for each of them.

#include "emaattn/dataset.hpp"
#include "emaattn/ensemble.hpp"
#include "emaattn/model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace emaattn {

// received: mean over observed query rows (attention each time-point receives).
// given: mean over observed key columns.
enum class AveragingAxis { received, given };
enum class CorrelationKind { pearson, spearman };

AveragingAxis parse_averaging_axis(const std::string& name);
CorrelationKind parse_correlation_kind(const std::string& name);

struct ExplainOptions {
  AveragingAxis axis = AveragingAxis::received;
  CorrelationKind correlation = CorrelationKind::pearson;
};

struct AvgTemporalAttention {
  Vector weights;  // length T, 0 on unobserved indices, sums to 1
  std::string id;
  std::size_t model = 0;
};

// Throws Errc::no_valid_rows.
AvgTemporalAttention average_temporal(const Matrix& a_t, const Mask& mask, AveragingAxis axis = AveragingAxis::received);

// Correlation of the averaged weights with each feature over observed points.
// Zero-variance inputs give r = 0. Throws Errc::too_few_points (< 3 points).
Vector attention_feature_correlation(const Vector& weights, const Matrix& x, const Mask& mask,
                                     CorrelationKind kind = CorrelationKind::pearson);

// Predictions of every model for every individual, computed once.
class AttentionSet {
 public:
  AttentionSet(const EnsembleModel& ens, const PaddedDataset& data, ExplainOptions opts = {});

  const EnsembleModel& ensemble() const { return *ens_; }
  const PaddedDataset& data() const { return *data_; }
  const ExplainOptions& options() const { return opts_; }
  const Prediction& prediction(std::size_t model, std::size_t individual) const;
  const AvgTemporalAttention& averaged(std::size_t model, std::size_t individual) const;
  std::size_t index_of(const std::string& id) const;  // throws Errc::unknown_id

 private:
  const EnsembleModel* ens_;
  const PaddedDataset* data_;
  ExplainOptions opts_;
  std::vector<std::vector<Prediction>> preds_;
  std::vector<std::vector<AvgTemporalAttention>> averaged_;
};

struct CorrelationProfile {
  int cluster = 0;
  Vector r;  // one entry per feature
  int n_individuals = 0;
};

// Cluster c is described by its own model over its own members.
std::vector<CorrelationProfile> cluster_correlation_profiles(const AttentionSet& att, const ClusterLabels& labels);

struct AttentionFeatureRecord {
  std::string id;
  std::size_t model = 0;
  double mean_attention = 0.0;  // mean pre-softmax temporal score
  double mean_feature = 0.0;
  int class_label = 0;  // membership in the model's positive cluster
  int cluster = 0;
};

std::vector<AttentionFeatureRecord> attention_vs_feature_table(const AttentionSet& att, const ClusterLabels& labels,
                                                               int feature);

// Entry (i, j): contribution of feature j (x-axis) to feature i (y-axis).
struct FeatureAttentionHeatmap {
  int cluster = 0;
  Matrix weights;
  int n_individuals = 0;
};

std::vector<FeatureAttentionHeatmap> feature_attention_heatmaps(const AttentionSet& att, const ClusterLabels& labels);

struct InteractionRecord {
  int cluster = 0;
  std::string id;
  int time = 0;
  double value_a = 0.0;
  double value_b = 0.0;
  double weight = 0.0;
  std::size_t model = 0;
};

// Every observed time-point of every member of each cluster under that
// cluster's model. Throws Errc::bad_feature_index.
std::vector<InteractionRecord> interaction_table(const AttentionSet& att, const ClusterLabels& labels, int f_a, int f_b);

struct SummaryEntry {
  int time = 0;
  double value = 0.0;
  double weight = 0.0;
};

struct IndividualSummary {
  std::string id;
  int cluster = 0;
  std::size_t model = 0;
  std::vector<std::vector<SummaryEntry>> features;  // per feature, descending weight
};

IndividualSummary individual_summary(const AttentionSet& att, const ClusterLabels& labels, const std::string& id);

struct ModelInteraction {
  std::size_t model = 0;
  std::vector<InteractionRecord> records;
};

// The same individual's (f_a, f_b) values weighted by every model.
std::vector<ModelInteraction> cross_model_comparison(const AttentionSet& att, const std::string& id, int f_a, int f_b);

struct SimilarityRow {
  std::string id;
  int cluster = 0;
  std::vector<double> mean_similarity;  // per cluster, self excluded; NaN if no other member
};

struct SimilarityProfile {
  double sigma = 0.0;
  std::vector<SimilarityRow> rows;
};

// RBF similarity on flattened series over the common observed prefix, sigma =
// median pairwise distance.
SimilarityProfile cluster_similarity_profile(const PaddedDataset& data, const ClusterLabels& labels);

// CSV emitters; numbers use 9 significant digits.
std::string format_number(double v);
void write_correlation_profiles_csv(std::ostream& out, const std::vector<CorrelationProfile>& profiles,
                                    const std::vector<std::string>& feature_names);
void write_heatmap_csv(std::ostream& out, const FeatureAttentionHeatmap& heatmap,
                       const std::vector<std::string>& feature_names);
void write_interaction_csv(std::ostream& out, const std::vector<InteractionRecord>& records);
void write_summary_csv(std::ostream& out, const IndividualSummary& summary,
                       const std::vector<std::string>& feature_names);
void write_similarity_csv(std::ostream& out, const SimilarityProfile& profile, int k);
void write_attention_feature_csv(std::ostream& out, const std::vector<AttentionFeatureRecord>& records);
void write_cross_model_csv(std::ostream& out, const std::vector<ModelInteraction>& tables);

}  // namespace emaattn
