#include "emaattn/ensemble.hpp"

#include "emaattn/error.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace emaattn {

std::vector<BinaryLabelVector> one_hot(const ClusterLabels& labels, const std::vector<std::string>& order) {
  if (labels.k < 2) throw Error(Errc::invalid_k, "one_hot: k must be >= 2");
  std::vector<int> clusters;
  clusters.reserve(order.size());
  for (const auto& id : order) clusters.push_back(labels.cluster_of(id));

  const int n_vectors = labels.k == 2 ? 1 : labels.k;
  std::vector<BinaryLabelVector> out(static_cast<std::size_t>(n_vectors));
  for (int c = 0; c < n_vectors; ++c) {
    auto& vec = out[static_cast<std::size_t>(c)];
    vec.positive_cluster = c;
    for (int cl : clusters) vec.values.push_back(cl == c ? 1 : 0);
  }
  return out;
}

std::size_t EnsembleModel::model_for_cluster(int c) const {
  if (c < 0 || c >= k) throw Error(Errc::unknown_cluster, "cluster " + std::to_string(c) + " outside ensemble");
  return std::min(static_cast<std::size_t>(c), models.size() - 1);
}

EnsembleModel train_ensemble(const PaddedDataset& train, const ClusterLabels& labels, const Hyperparams& hyper) {
  validate_labels(labels);
  const auto vectors = one_hot(labels, train.ids);
  for (int c = 0; c < labels.k; ++c) {
    std::size_t members = 0;
    for (const auto& id : train.ids) members += labels.cluster_of(id) == c ? 1 : 0;
    if (members < 2) {
      throw Error(Errc::tiny_cluster, "cluster " + std::to_string(c) + " has " + std::to_string(members) +
                                          " member(s) in the training data; need >= 2");
    }
  }
  EnsembleModel ens;
  ens.k = labels.k;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    Hyperparams h = hyper;
    h.seed = hyper.seed + i;
    ens.models.push_back(train_model(train, vectors[i], h));
  }
  return ens;
}

int count_correct(const TrainedModel& model, const PaddedDataset& data, const BinaryLabelVector& truth) {
  if (truth.values.size() != data.size()) throw Error(Errc::alignment_error, "label vector length mismatch");
  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ForwardResult fr = forward(model.params, data.tensor[i], data.mask[i]);
    correct += decide(fr.p) == truth.values[i] ? 1 : 0;
  }
  return correct;
}

VariantAccuracy evaluate(const EnsembleModel& ens, const PaddedDataset& train, const PaddedDataset& test,
                         const ClusterLabels& labels) {
  if (ens.models.empty()) throw Error(Errc::alignment_error, "empty ensemble");
  if (test.size() == 0 || train.size() == 0) throw Error(Errc::alignment_error, "empty evaluation split");
  if (train.ids != test.ids) throw Error(Errc::alignment_error, "train and test splits list different individuals");
  const auto vectors = one_hot(labels, train.ids);
  if (vectors.size() != ens.models.size()) {
    throw Error(Errc::alignment_error, "ensemble has " + std::to_string(ens.models.size()) + " models, labels need " +
                                           std::to_string(vectors.size()));
  }
  VariantAccuracy row;
  row.variant = ens.variant();
  row.n = static_cast<int>(train.size());
  for (std::size_t m = 0; m < ens.models.size(); ++m) {
    ModelAccuracy acc;
    acc.positive_cluster = vectors[m].positive_cluster;
    acc.train_correct = count_correct(ens.models[m], train, vectors[m]);
    acc.test_correct = count_correct(ens.models[m], test, vectors[m]);
    row.mean_train_correct += acc.train_correct;
    row.mean_test_correct += acc.test_correct;
    row.per_model.push_back(acc);
  }
  row.mean_train_correct /= static_cast<double>(ens.models.size());
  row.mean_test_correct /= static_cast<double>(ens.models.size());
  return row;
}

std::string report_json(const AccuracyReport& report) {
  nlohmann::ordered_json doc;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : report.rows) {
    nlohmann::ordered_json models = nlohmann::ordered_json::array();
    for (const auto& m : row.per_model) {
      models.push_back({{"positive_cluster", m.positive_cluster},
                        {"train_correct", m.train_correct},
                        {"test_correct", m.test_correct}});
    }
    doc["rows"].push_back({{"variant", to_string(row.variant)},
                           {"n", row.n},
                           {"mean_train_correct", row.mean_train_correct},
                           {"mean_test_correct", row.mean_test_correct},
                           {"models", models}});
  }
  return doc.dump(2) + "\n";
}

std::string report_table(const AccuracyReport& report) {
  auto label = [](Variant v) {
    switch (v) {
      case Variant::recurrent_baseline: return "Baseline GRU";
      case Variant::temporal_only: return "Temporal-Attention";
      case Variant::dual: return "Proposed Framework";
    }
    return "";
  };
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-22s %12s %12s\n", "Model", "Train", "Test");
  out << line;
  for (Variant v : {Variant::recurrent_baseline, Variant::temporal_only, Variant::dual}) {
    for (const auto& row : report.rows) {
      if (row.variant != v) continue;
      const std::string train = std::to_string(std::lround(row.mean_train_correct)) + "/" + std::to_string(row.n);
      const std::string test = std::to_string(std::lround(row.mean_test_correct)) + "/" + std::to_string(row.n);
      std::snprintf(line, sizeof line, "%-22s %12s %12s\n", label(v), train.c_str(), test.c_str());
      out << line;
    }
  }
  return out.str();
}

}  // namespace emaattn
