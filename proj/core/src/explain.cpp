#include "emaattn/explain.hpp"

#include "emaattn/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

namespace emaattn {

AveragingAxis parse_averaging_axis(const std::string& name) {
  if (name == "received") return AveragingAxis::received;
  if (name == "given") return AveragingAxis::given;
  throw Error(Errc::config_error, "unknown averaging axis '" + name + "'");
}

CorrelationKind parse_correlation_kind(const std::string& name) {
  if (name == "pearson") return CorrelationKind::pearson;
  if (name == "spearman") return CorrelationKind::spearman;
  throw Error(Errc::config_error, "unknown correlation kind '" + name + "'");
}

AvgTemporalAttention average_temporal(const Matrix& a_t, const Mask& mask, AveragingAxis axis) {
  const Eigen::Index t_len = a_t.rows();
  if (a_t.cols() != t_len || static_cast<Eigen::Index>(mask.size()) != t_len) {
    throw Error(Errc::shape_mismatch, "average_temporal: A_T must be T x T with a length-T mask");
  }
  const auto n_valid = std::count(mask.begin(), mask.end(), true);
  if (n_valid == 0) throw Error(Errc::no_valid_rows, "average_temporal: no observed rows");

  AvgTemporalAttention out;
  out.weights = Vector::Zero(t_len);
  for (Eigen::Index i = 0; i < t_len; ++i) {
    if (!mask[i]) continue;
    for (Eigen::Index j = 0; j < t_len; ++j) {
      if (!mask[j]) continue;
      if (axis == AveragingAxis::received) {
        out.weights(j) += a_t(i, j);
      } else {
        out.weights(i) += a_t(i, j);
      }
    }
  }
  out.weights /= static_cast<double>(n_valid);
  const double total = out.weights.sum();
  if (total > 0.0) out.weights /= total;
  return out;
}

namespace {

double pearson(const Vector& a, const Vector& b) {
  const Vector ac = a.array() - a.mean();
  const Vector bc = b.array() - b.mean();
  const double saa = ac.squaredNorm();
  const double sbb = bc.squaredNorm();
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(ac.dot(bc) / std::sqrt(saa * sbb), -1.0, 1.0);
}

Vector ranks(const Vector& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&v](auto a, auto b) { return v(a) < v(b); });
  Vector r(n);
  for (Eigen::Index s = 0; s < n;) {
    Eigen::Index e = s;
    while (e + 1 < n && v(order[e + 1]) == v(order[s])) ++e;
    const double mid = 0.5 * static_cast<double>(s + e);  // average rank for ties
    for (Eigen::Index q = s; q <= e; ++q) r(order[q]) = mid;
    s = e + 1;
  }
  return r;
}

}  // namespace

Vector attention_feature_correlation(const Vector& weights, const Matrix& x, const Mask& mask, CorrelationKind kind) {
  if (weights.size() != x.cols() || static_cast<Eigen::Index>(mask.size()) != x.cols()) {
    throw Error(Errc::shape_mismatch, "attention_feature_correlation: lengths differ");
  }
  std::vector<Eigen::Index> obs;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    if (mask[t]) obs.push_back(t);
  }
  if (obs.size() < 3) throw Error(Errc::too_few_points, "correlation needs at least 3 observed points");

  const auto n = static_cast<Eigen::Index>(obs.size());
  Vector w(n);
  for (Eigen::Index c = 0; c < n; ++c) w(c) = weights(obs[static_cast<std::size_t>(c)]);
  if (kind == CorrelationKind::spearman) w = ranks(w);

  Vector r(x.rows());
  Vector f(n);
  for (Eigen::Index feat = 0; feat < x.rows(); ++feat) {
    for (Eigen::Index c = 0; c < n; ++c) f(c) = x(feat, obs[static_cast<std::size_t>(c)]);
    r(feat) = pearson(w, kind == CorrelationKind::spearman ? ranks(f) : f);
  }
  return r;
}

AttentionSet::AttentionSet(const EnsembleModel& ens, const PaddedDataset& data, ExplainOptions opts)
    : ens_(&ens), data_(&data), opts_(opts) {
  if (ens.models.empty()) throw Error(Errc::invalid_argument, "AttentionSet: empty ensemble");
  preds_.resize(ens.models.size());
  averaged_.resize(ens.models.size());
  for (std::size_t m = 0; m < ens.models.size(); ++m) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      Prediction p = predict(ens.models[m], data.tensor[i], data.mask[i]);
      AvgTemporalAttention avg = average_temporal(p.bundle.a_t, data.mask[i], opts.axis);
      avg.id = data.ids[i];
      avg.model = m;
      preds_[m].push_back(std::move(p));
      averaged_[m].push_back(std::move(avg));
    }
  }
}

const Prediction& AttentionSet::prediction(std::size_t model, std::size_t individual) const {
  return preds_.at(model).at(individual);
}

const AvgTemporalAttention& AttentionSet::averaged(std::size_t model, std::size_t individual) const {
  return averaged_.at(model).at(individual);
}

std::size_t AttentionSet::index_of(const std::string& id) const {
  const auto it = std::find(data_->ids.begin(), data_->ids.end(), id);
  if (it == data_->ids.end()) throw Error(Errc::unknown_id, "no individual '" + id + "'");
  return static_cast<std::size_t>(it - data_->ids.begin());
}

namespace {

std::vector<std::size_t> members(const PaddedDataset& data, const ClusterLabels& labels, int c) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (labels.cluster_of(data.ids[i]) == c) out.push_back(i);
  }
  return out;
}

void check_feature(const PaddedDataset& data, int f) {
  if (f < 0 || f >= data.v()) throw Error(Errc::bad_feature_index, "feature index " + std::to_string(f) + " out of range");
}

}  // namespace

std::vector<CorrelationProfile> cluster_correlation_profiles(const AttentionSet& att, const ClusterLabels& labels) {
  const PaddedDataset& data = att.data();
  std::vector<CorrelationProfile> out;
  for (int c = 0; c < labels.k; ++c) {
    const auto idx = members(data, labels, c);
    if (idx.empty()) throw Error(Errc::empty_cluster, "cluster " + std::to_string(c) + " has no members");
    const std::size_t m = att.ensemble().model_for_cluster(c);
    CorrelationProfile prof;
    prof.cluster = c;
    prof.r = Vector::Zero(data.v());
    for (std::size_t i : idx) {
      prof.r += attention_feature_correlation(att.averaged(m, i).weights, data.tensor[i], data.mask[i],
                                              att.options().correlation);
    }
    prof.n_individuals = static_cast<int>(idx.size());
    if (idx.size() > 1) prof.r /= static_cast<double>(idx.size());
    out.push_back(std::move(prof));
  }
  return out;
}

std::vector<AttentionFeatureRecord> attention_vs_feature_table(const AttentionSet& att, const ClusterLabels& labels,
                                                               int feature) {
  const PaddedDataset& data = att.data();
  check_feature(data, feature);
  const auto vectors = one_hot(labels, data.ids);
  std::vector<AttentionFeatureRecord> out;
  for (std::size_t m = 0; m < att.ensemble().size(); ++m) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      AttentionFeatureRecord rec;
      rec.id = data.ids[i];
      rec.model = m;
      rec.mean_attention = att.prediction(m, i).bundle.mean_temporal_score;
      double sum = 0.0;
      int n = 0;
      for (Eigen::Index t = 0; t < data.tensor[i].cols(); ++t) {
        if (!data.mask[i][t]) continue;
        sum += data.tensor[i](feature, t);
        ++n;
      }
      rec.mean_feature = n > 0 ? sum / n : 0.0;
      rec.class_label = vectors.at(m).values[i];
      rec.cluster = labels.cluster_of(data.ids[i]);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<FeatureAttentionHeatmap> feature_attention_heatmaps(const AttentionSet& att, const ClusterLabels& labels) {
  const PaddedDataset& data = att.data();
  std::vector<FeatureAttentionHeatmap> out;
  for (int c = 0; c < labels.k; ++c) {
    const auto idx = members(data, labels, c);
    if (idx.empty()) throw Error(Errc::empty_cluster, "cluster " + std::to_string(c) + " has no members");
    const std::size_t m = att.ensemble().model_for_cluster(c);
    FeatureAttentionHeatmap h;
    h.cluster = c;
    h.weights = Matrix::Zero(data.v(), data.v());
    for (std::size_t i : idx) h.weights += att.prediction(m, i).bundle.a_f;
    h.weights /= static_cast<double>(idx.size());
    h.n_individuals = static_cast<int>(idx.size());
    out.push_back(std::move(h));
  }
  return out;
}

namespace {

void append_interactions(const AttentionSet& att, std::size_t m, std::size_t i, int cluster, int f_a, int f_b,
                         std::vector<InteractionRecord>& out) {
  const PaddedDataset& data = att.data();
  const Vector& w = att.averaged(m, i).weights;
  for (Eigen::Index t = 0; t < data.tensor[i].cols(); ++t) {
    if (!data.mask[i][t]) continue;
    out.push_back({cluster, data.ids[i], static_cast<int>(t), data.tensor[i](f_a, t), data.tensor[i](f_b, t), w(t), m});
  }
}

}  // namespace

std::vector<InteractionRecord> interaction_table(const AttentionSet& att, const ClusterLabels& labels, int f_a,
                                                 int f_b) {
  const PaddedDataset& data = att.data();
  check_feature(data, f_a);
  check_feature(data, f_b);
  if (f_a == f_b) throw Error(Errc::bad_feature_index, "interaction needs two distinct features");
  std::vector<InteractionRecord> out;
  for (int c = 0; c < labels.k; ++c) {
    const std::size_t m = att.ensemble().model_for_cluster(c);
    for (std::size_t i : members(data, labels, c)) append_interactions(att, m, i, c, f_a, f_b, out);
  }
  return out;
}

IndividualSummary individual_summary(const AttentionSet& att, const ClusterLabels& labels, const std::string& id) {
  const std::size_t i = att.index_of(id);
  const PaddedDataset& data = att.data();
  IndividualSummary out;
  out.id = id;
  out.cluster = labels.cluster_of(id);
  out.model = att.ensemble().model_for_cluster(out.cluster);
  const Vector& w = att.averaged(out.model, i).weights;

  std::vector<int> order;
  for (Eigen::Index t = 0; t < data.tensor[i].cols(); ++t) {
    if (data.mask[i][t]) order.push_back(static_cast<int>(t));
  }
  std::stable_sort(order.begin(), order.end(), [&w](int a, int b) { return w(a) > w(b); });
  for (int f = 0; f < data.v(); ++f) {
    std::vector<SummaryEntry> entries;
    entries.reserve(order.size());
    for (int t : order) entries.push_back({t, data.tensor[i](f, t), w(t)});
    out.features.push_back(std::move(entries));
  }
  return out;
}

std::vector<ModelInteraction> cross_model_comparison(const AttentionSet& att, const std::string& id, int f_a, int f_b) {
  const PaddedDataset& data = att.data();
  check_feature(data, f_a);
  check_feature(data, f_b);
  if (f_a == f_b) throw Error(Errc::bad_feature_index, "interaction needs two distinct features");
  const std::size_t i = att.index_of(id);
  std::vector<ModelInteraction> out;
  for (std::size_t m = 0; m < att.ensemble().size(); ++m) {
    ModelInteraction mi;
    mi.model = m;
    append_interactions(att, m, i, att.ensemble().models[m].positive_cluster, f_a, f_b, mi.records);
    out.push_back(std::move(mi));
  }
  return out;
}

SimilarityProfile cluster_similarity_profile(const PaddedDataset& data, const ClusterLabels& labels) {
  if (labels.k < 2) throw Error(Errc::invalid_k, "similarity profile needs k >= 2");
  const std::size_t n = data.size();
  std::vector<int> t_valid(n);
  for (std::size_t i = 0; i < n; ++i) t_valid[i] = data.t_valid(i);

  // Squared distances over the common observed prefix.
  Matrix d2 = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> dists;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int common = std::min(t_valid[i], t_valid[j]);
      const double d = (data.tensor[i].leftCols(common) - data.tensor[j].leftCols(common)).squaredNorm();
      d2(i, j) = d2(j, i) = d;
      dists.push_back(std::sqrt(d));
    }
  }
  SimilarityProfile out;
  if (!dists.empty()) {
    std::sort(dists.begin(), dists.end());
    const std::size_t h = dists.size() / 2;
    out.sigma = dists.size() % 2 ? dists[h] : 0.5 * (dists[h - 1] + dists[h]);
  }
  auto similarity = [&](std::size_t i, std::size_t j) {
    if (out.sigma <= 0.0) return d2(i, j) > 0.0 ? 0.0 : 1.0;
    return std::exp(-d2(i, j) / (2.0 * out.sigma * out.sigma));
  };
  for (std::size_t i = 0; i < n; ++i) {
    SimilarityRow row;
    row.id = data.ids[i];
    row.cluster = labels.cluster_of(data.ids[i]);
    std::vector<double> sum(static_cast<std::size_t>(labels.k), 0.0);
    std::vector<int> count(static_cast<std::size_t>(labels.k), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto c = static_cast<std::size_t>(labels.cluster_of(data.ids[j]));
      sum[c] += similarity(i, j);
      ++count[c];
    }
    for (std::size_t c = 0; c < sum.size(); ++c) {
      row.mean_similarity.push_back(count[c] > 0 ? sum[c] / count[c] : std::numeric_limits<double>::quiet_NaN());
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);  // no "-0"
  return buf;
}

void write_correlation_profiles_csv(std::ostream& out, const std::vector<CorrelationProfile>& profiles,
                                    const std::vector<std::string>& feature_names) {
  out << "cluster,n_individuals";
  for (const auto& name : feature_names) out << ',' << name;
  out << '\n';
  for (const auto& p : profiles) {
    out << p.cluster << ',' << p.n_individuals;
    for (Eigen::Index f = 0; f < p.r.size(); ++f) out << ',' << format_number(p.r(f));
    out << '\n';
  }
}

void write_heatmap_csv(std::ostream& out, const FeatureAttentionHeatmap& heatmap,
                       const std::vector<std::string>& feature_names) {
  out << "feature";
  for (const auto& name : feature_names) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < heatmap.weights.rows(); ++i) {
    out << feature_names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < heatmap.weights.cols(); ++j) out << ',' << format_number(heatmap.weights(i, j));
    out << '\n';
  }
}

void write_interaction_csv(std::ostream& out, const std::vector<InteractionRecord>& records) {
  out << "cluster,individual_id,time_index,value_a,value_b,weight,model\n";
  for (const auto& r : records) {
    out << r.cluster << ',' << r.id << ',' << r.time << ',' << format_number(r.value_a) << ','
        << format_number(r.value_b) << ',' << format_number(r.weight) << ',' << r.model << '\n';
  }
}

void write_summary_csv(std::ostream& out, const IndividualSummary& summary,
                       const std::vector<std::string>& feature_names) {
  out << "feature,rank,time_index,value,weight\n";
  for (std::size_t f = 0; f < summary.features.size(); ++f) {
    for (std::size_t r = 0; r < summary.features[f].size(); ++r) {
      const auto& e = summary.features[f][r];
      out << feature_names[f] << ',' << r << ',' << e.time << ',' << format_number(e.value) << ','
          << format_number(e.weight) << '\n';
    }
  }
}

void write_similarity_csv(std::ostream& out, const SimilarityProfile& profile, int k) {
  out << "individual_id,cluster";
  for (int c = 0; c < k; ++c) out << ",similarity_cluster" << c;
  out << '\n';
  for (const auto& row : profile.rows) {
    out << row.id << ',' << row.cluster;
    for (double s : row.mean_similarity) out << ',' << format_number(s);
    out << '\n';
  }
}

void write_attention_feature_csv(std::ostream& out, const std::vector<AttentionFeatureRecord>& records) {
  out << "model,individual_id,mean_attention,mean_feature,class,cluster\n";
  for (const auto& r : records) {
    out << r.model << ',' << r.id << ',' << format_number(r.mean_attention) << ',' << format_number(r.mean_feature)
        << ',' << r.class_label << ',' << r.cluster << '\n';
  }
}

void write_cross_model_csv(std::ostream& out, const std::vector<ModelInteraction>& tables) {
  out << "model,individual_id,time_index,value_a,value_b,weight\n";
  for (const auto& t : tables) {
    for (const auto& r : t.records) {
      out << t.model << ',' << r.id << ',' << r.time << ',' << format_number(r.value_a) << ','
          << format_number(r.value_b) << ',' << format_number(r.weight) << '\n';
    }
  }
}

}  // namespace emaattn
