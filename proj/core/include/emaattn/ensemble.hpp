#pragma once

#include "emaattn/dataset.hpp"
#include "emaattn/model.hpp"

#include <string>
#include <vector>

namespace emaattn {

// One binary vector per cluster, aligned to `order`. For k == 2 only the
// vector of cluster 0 is returned. Throws Errc::missing_id.
std::vector<BinaryLabelVector> one_hot(const ClusterLabels& labels, const std::vector<std::string>& order);

struct EnsembleModel {
  std::vector<TrainedModel> models;  // model i predicts cluster i
  int k = 0;

  std::size_t size() const { return models.size(); }
  Variant variant() const { return models.front().hyper.variant; }
  // The model that describes cluster c. With k == 2 the single model covers
  // both clusters (cluster 1 is its negative class).
  std::size_t model_for_cluster(int c) const;
};

// One train_model run per one-hot vector, model i seeded with seed + i.
// Throws Errc::tiny_cluster if a cluster has fewer than two members.
EnsembleModel train_ensemble(const PaddedDataset& train, const ClusterLabels& labels, const Hyperparams& hyper);

struct ModelAccuracy {
  int positive_cluster = 0;
  int train_correct = 0;
  int test_correct = 0;
};

struct VariantAccuracy {
  Variant variant = Variant::dual;
  int n = 0;
  std::vector<ModelAccuracy> per_model;
  double mean_train_correct = 0.0;
  double mean_test_correct = 0.0;
};

struct AccuracyReport {
  std::vector<VariantAccuracy> rows;
};

// Number of individuals whose predicted binary label matches the model's
// one-hot vector.
int count_correct(const TrainedModel& model, const PaddedDataset& data, const BinaryLabelVector& truth);

// Per-model binary correctness on train and test, averaged over models.
// Throws Errc::alignment_error when the splits disagree or test is empty.
VariantAccuracy evaluate(const EnsembleModel& ens, const PaddedDataset& train, const PaddedDataset& test,
                         const ClusterLabels& labels);

std::string report_json(const AccuracyReport& report);
// Three-row "correct/N" table: baseline, temporal attention, proposed.
std::string report_table(const AccuracyReport& report);

}  // namespace emaattn
