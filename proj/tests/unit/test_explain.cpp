#include "emaattn/explain.hpp"
#include "emaattn/synth.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace emaattn;

namespace {

Mask prefix(int t, int valid) {
  Mask m(static_cast<std::size_t>(t), false);
  for (int j = 0; j < valid; ++j) m[static_cast<std::size_t>(j)] = true;
  return m;
}

Matrix random_stochastic(int t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix a(t, t);
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < t; ++j) a(i, j) = u(rng);
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

// Attention model whose temporal keys respond to `key_weights` (one entry per
// feature) and whose queries read a constant feature, so the attention a
// time-point receives is a monotone function of key_weights . x_t.
TrainedModel keyed_model(int v, int constant_feature, const std::vector<std::pair<int, double>>& key_weights,
                         int positive_cluster = 0) {
  ModelShape shape;
  shape.v = v;
  TrainedModel m;
  m.params = ModelParams(shape);
  m.params.block(Block::temporal_query)(constant_feature, 0) = 4.0;
  for (auto [f, w] : key_weights) m.params.block(Block::temporal_key)(f, 0) = w;
  m.positive_cluster = positive_cluster;
  m.feature_names.resize(static_cast<std::size_t>(v));
  return m;
}

EnsembleModel ensemble_of(std::vector<TrainedModel> models, int k) {
  EnsembleModel ens;
  ens.models = std::move(models);
  ens.k = k;
  return ens;
}

EnsembleModel random_ensemble(int v, int k, std::uint64_t seed) {
  std::vector<TrainedModel> models;
  const int count = k == 2 ? 1 : k;
  for (int c = 0; c < count; ++c) {
    ModelShape shape;
    shape.v = v;
    TrainedModel m;
    m.params = random_params(shape, seed + static_cast<std::uint64_t>(c), 0.5);
    m.positive_cluster = c;
    models.push_back(std::move(m));
  }
  return ensemble_of(std::move(models), k);
}

SynthResult synth(int k, int n, int t_min, int t_max, double noise, std::uint64_t seed,
                  SignalKind kind = SignalKind::mean_shift) {
  SynthConfig cfg;
  cfg.k = k;
  cfg.n_per_cluster = n;
  cfg.t_min = t_min;
  cfg.t_max = t_max;
  cfg.noise_sd = noise;
  cfg.seed = seed;
  return generate(cfg, default_ground_truth(k, 12, kind));
}

}  // namespace

TEST_CASE("averaging a uniform matrix") {
  Matrix a = Matrix::Zero(6, 6);
  a.topLeftCorner(4, 4).setConstant(0.25);
  const auto avg = average_temporal(a, prefix(6, 4));
  for (int j = 0; j < 4; ++j) CHECK(avg.weights(j) == doctest::Approx(0.25));
  CHECK(avg.weights(4) == 0.0);
  CHECK(avg.weights(5) == 0.0);
}

TEST_CASE("every query attending one key gives a delta") {
  Matrix a = Matrix::Zero(5, 5);
  a.col(2).setOnes();
  const auto avg = average_temporal(a, prefix(5, 5));
  for (int j = 0; j < 5; ++j) CHECK(avg.weights(j) == (j == 2 ? 1.0 : 0.0));
}

TEST_CASE("random stochastic matrix matches renormalised column means") {
  std::mt19937_64 rng(3);
  const Matrix a = random_stochastic(4, rng);
  const auto avg = average_temporal(a, prefix(4, 4));
  Vector expected = a.colwise().mean().transpose();
  expected /= expected.sum();
  CHECK((avg.weights - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(avg.weights.sum() - 1.0) <= 1e-9);

  const auto given = average_temporal(a, prefix(4, 4), AveragingAxis::given);
  for (int i = 0; i < 4; ++i) CHECK(given.weights(i) == doctest::Approx(0.25));
}

TEST_CASE("averaging errors and names") {
  require_errc(Errc::no_valid_rows, [] { average_temporal(Matrix::Zero(3, 3), Mask(3, false)); });
  require_errc(Errc::shape_mismatch, [] { average_temporal(Matrix::Zero(3, 2), Mask(3, true)); });
  CHECK(parse_averaging_axis("given") == AveragingAxis::given);
  CHECK(parse_correlation_kind("spearman") == CorrelationKind::spearman);
  require_errc(Errc::config_error, [] { parse_averaging_axis("diagonal"); });
  require_errc(Errc::config_error, [] { parse_correlation_kind("kendall"); });
}

TEST_CASE("correlation conventions") {
  Vector w(6);
  w << 0.1, 0.3, 0.05, 0.2, 0.25, 0.0;
  Matrix x(3, 6);
  x.row(0) = 2.0 * w.transpose().array() + 0.1;
  x.row(1) = -w.transpose();
  x.row(2).setConstant(0.4);
  const Vector r = attention_feature_correlation(w, x, prefix(6, 5));
  CHECK(r(0) == doctest::Approx(1.0));
  CHECK(r(1) == doctest::Approx(-1.0));
  CHECK(r(2) == 0.0);

  Matrix cubic(1, 6);
  cubic.row(0) = w.transpose().array().cube();
  CHECK(attention_feature_correlation(w, cubic, prefix(6, 5), CorrelationKind::spearman)(0) == doctest::Approx(1.0));
  CHECK(attention_feature_correlation(w, cubic, prefix(6, 5))(0) < 1.0);

  require_errc(Errc::too_few_points, [&] { attention_feature_correlation(w, x, prefix(6, 2)); });
}

TEST_CASE("a feature that suppresses attention correlates negatively") {
  const auto data = synth(2, 4, 40, 60, 0.15, 9);
  const auto pd = pad_and_mask(data.dataset);
  // Attention received falls as feature 0 rises.
  const auto ens = ensemble_of({keyed_model(12, 5, {{0, -3.0}})}, 2);
  const AttentionSet att(ens, pd);
  const auto profiles = cluster_correlation_profiles(att, data.labels);
  REQUIRE(profiles.size() == 2);
  for (const auto& p : profiles) {
    CHECK(p.r(0) < -0.9);
    CHECK(p.r.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(p.n_individuals == 4);
  }
}

TEST_CASE("a singleton cluster profile equals its member's correlations") {
  auto data = synth(3, 3, 20, 30, 0.15, 4);
  // move everyone but one individual out of cluster 2
  int kept = 0;
  for (auto& [id, c] : data.labels.assignment) {
    if (c == 2 && kept++ > 0) c = 0;
  }
  const auto pd = pad_and_mask(data.dataset);
  const auto ens = random_ensemble(12, 3, 7);
  const AttentionSet att(ens, pd);
  const auto profiles = cluster_correlation_profiles(att, data.labels);
  std::size_t member = 0;
  for (std::size_t i = 0; i < pd.size(); ++i)
    if (data.labels.cluster_of(pd.ids[i]) == 2) member = i;
  const Vector own = attention_feature_correlation(att.averaged(2, member).weights, pd.tensor[member], pd.mask[member]);
  CHECK(profiles[2].n_individuals == 1);
  CHECK(profiles[2].r == own);
}

TEST_CASE("shuffled labels leave only weak average correlations") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto data = synth(3, 8, 40, 60, 0.15, 50 + seed);
    const auto pd = pad_and_mask(data.dataset);
    std::vector<int> clusters;
    for (const auto& id : pd.ids) clusters.push_back(data.labels.cluster_of(id));
    std::mt19937_64 rng(seed);
    std::shuffle(clusters.begin(), clusters.end(), rng);
    for (std::size_t i = 0; i < pd.size(); ++i) data.labels.assignment[pd.ids[i]] = clusters[i];
    Hyperparams h;
    h.epochs = 100;
    h.seed = seed;
    const auto ens = train_ensemble(pd, data.labels, h);
    const AttentionSet att(ens, pd);
    for (const auto& p : cluster_correlation_profiles(att, data.labels)) worst = std::max(worst, p.r.cwiseAbs().mean());
  }
  CHECK(worst < 0.2);
}

TEST_CASE("attention versus feature records") {
  const auto data = synth(3, 20, 20, 30, 0.15, 2);
  const auto pd = pad_and_mask(data.dataset);
  const auto ens = random_ensemble(12, 3, 1);
  const AttentionSet att(ens, pd);
  const auto records = attention_vs_feature_table(att, data.labels, 4);
  CHECK(records.size() == 180);
  const auto& r = records[65];  // model 1, individual 5
  CHECK(r.model == 1);
  CHECK(r.id == pd.ids[5]);
  CHECK(r.mean_attention == att.prediction(1, 5).bundle.mean_temporal_score);
  CHECK(r.mean_feature == doctest::Approx(pd.observed(5).row(4).mean()));
  CHECK(r.class_label == (data.labels.cluster_of(pd.ids[5]) == 1 ? 1 : 0));
  CHECK(r.cluster == data.labels.cluster_of(pd.ids[5]));
  // the statistic differs between individuals
  std::set<double> distinct;
  for (const auto& rec : records) distinct.insert(rec.mean_attention);
  CHECK(distinct.size() > 100);
  require_errc(Errc::bad_feature_index, [&] { attention_vs_feature_table(att, data.labels, 12); });
}

TEST_CASE("mean temporal score is the mean pre-softmax logit over observed pairs") {
  const auto data = synth(2, 2, 12, 16, 0.15, 3);
  const auto pd = pad_and_mask(data.dataset);
  ModelShape shape;
  shape.v = 12;
  const auto params = random_params(shape, 4, 0.5);
  const auto fr = forward(params, pd.tensor[0], pd.mask[0]);
  const Matrix obs = pd.observed(0).transpose();
  const Matrix q = obs * params.block(Block::temporal_query);
  const Matrix k = obs * params.block(Block::temporal_key);
  const double expected = (q * k.transpose()).mean() / std::sqrt(16.0);
  CHECK(fr.bundle.mean_temporal_score == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("heatmaps of zero-initialised models are uniform") {
  const auto data = synth(3, 3, 20, 30, 0.15, 5);
  const auto pd = pad_and_mask(data.dataset);
  std::vector<TrainedModel> models(3);
  for (int c = 0; c < 3; ++c) {
    ModelShape shape;
    shape.v = 12;
    models[static_cast<std::size_t>(c)].params = ModelParams(shape);
    models[static_cast<std::size_t>(c)].positive_cluster = c;
  }
  const auto ens = ensemble_of(std::move(models), 3);
  const AttentionSet att(ens, pd);
  for (const auto& hm : feature_attention_heatmaps(att, data.labels))
    CHECK((hm.weights.array() - 1.0 / 12.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("heatmap rows stay stochastic") {
  const auto data = synth(3, 4, 20, 30, 0.15, 6);
  const auto pd = pad_and_mask(data.dataset);
  const auto ens = random_ensemble(12, 3, 11);
  const AttentionSet att(ens, pd);
  const auto maps = feature_attention_heatmaps(att, data.labels);
  REQUIRE(maps.size() == 3);
  for (const auto& hm : maps) {
    CHECK(hm.weights.minCoeff() >= 0.0);
    for (int i = 0; i < 12; ++i) CHECK(std::abs(hm.weights.row(i).sum() - 1.0) <= 1e-6);
    CHECK(hm.n_individuals == 4);
  }
}

TEST_CASE("interaction table size and contents") {
  const auto data = synth(3, 20, 100, 100, 0.15, 7);
  const auto pd = pad_and_mask(data.dataset);
  const auto ens = random_ensemble(12, 3, 2);
  const AttentionSet att(ens, pd);
  const auto records = interaction_table(att, data.labels, 0, 1);
  CHECK(records.size() == 6000);
  const auto in_cluster_1 = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.cluster == 1; });
  CHECK(in_cluster_1 == 2000);
  for (const auto& r : records) {
    CHECK(r.model == static_cast<std::size_t>(r.cluster));
    CHECK(r.value_a >= 0.0);
    CHECK(r.value_a <= 1.0);
    CHECK(r.weight >= 0.0);
  }
  require_errc(Errc::bad_feature_index, [&] { interaction_table(att, data.labels, 3, 3); });
  require_errc(Errc::bad_feature_index, [&] { interaction_table(att, data.labels, -1, 3); });
}

TEST_CASE("anti-correlated pair: weight concentrates where the first feature is low and the second high") {
  // Cluster 1 plants its pair on features 2 and 3; the model's keys respond to
  // (x3 - x2), as a model that learned the pair would.
  const auto data = synth(3, 5, 60, 80, 0.1, 8, SignalKind::anti_correlated_pair);
  const auto pd = pad_and_mask(data.dataset);
  auto ens = random_ensemble(12, 3, 3);
  ens.models[1] = keyed_model(12, 11, {{2, -3.0}, {3, 3.0}}, 1);
  const AttentionSet att(ens, pd);
  double hot = 0.0, rest = 0.0;
  int n_hot = 0, n_rest = 0;
  for (const auto& r : interaction_table(att, data.labels, 2, 3)) {
    if (r.cluster != 1) continue;
    const bool pattern = r.value_a < 0.4 && r.value_b > 0.6;
    (pattern ? hot : rest) += r.weight;
    (pattern ? n_hot : n_rest) += 1;
  }
  REQUIRE(n_hot > 0);
  CHECK(hot / n_hot > 2.0 * rest / n_rest);
}

TEST_CASE("individual summary ordering") {
  const auto data = synth(3, 2, 50, 50, 0.15, 9);
  const auto pd = pad_and_mask(data.dataset);
  const auto ens = random_ensemble(12, 3, 4);
  const AttentionSet att(ens, pd);
  const auto s = individual_summary(att, data.labels, pd.ids[3]);
  CHECK(s.cluster == data.labels.cluster_of(pd.ids[3]));
  CHECK(s.model == static_cast<std::size_t>(s.cluster));
  REQUIRE(s.features.size() == 12);
  for (const auto& list : s.features) {
    REQUIRE(list.size() == 50);
    std::set<int> times;
    for (std::size_t e = 0; e < list.size(); ++e) {
      times.insert(list[e].time);
      if (e > 0) CHECK(list[e].weight <= list[e - 1].weight);
    }
    CHECK(times.size() == 50);
    CHECK(*times.begin() == 0);
    CHECK(*times.rbegin() == 49);
  }
  CHECK(s.features[4][0].value == pd.tensor[3](4, s.features[4][0].time));
  require_errc(Errc::unknown_id, [&] { individual_summary(att, data.labels, "nobody"); });
}

TEST_CASE("top-decile attention of a trained model sits in the planted window") {
  SynthConfig cfg;
  cfg.noise_sd = 0.0;
  cfg.n_per_cluster = 6;
  cfg.t_min = 60;
  cfg.t_max = 80;
  cfg.seed = 12;
  const auto spec = default_ground_truth(3, 12);
  const auto data = generate(cfg, spec);
  const auto pd = pad_and_mask(data.dataset);
  Hyperparams h;
  h.epochs = 300;
  const auto ens = train_ensemble(pd, data.labels, h);
  const AttentionSet att(ens, pd);
  int inside = 0, total = 0;
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const int c = data.labels.cluster_of(pd.ids[i]);
    const auto s = individual_summary(att, data.labels, pd.ids[i]);
    const int t = pd.t_valid(i);
    const auto [ws, we] = spec.clusters[static_cast<std::size_t>(c)].windows.front();
    const int start = static_cast<int>(std::ceil(ws * t)), end = static_cast<int>(std::ceil(we * t));
    const auto top = static_cast<std::size_t>(std::max(1, t / 10));
    for (std::size_t e = 0; e < top; ++e) {
      const int time = s.features[0][e].time;
      inside += time >= start && time < end ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(inside) / total >= 0.6);
}

TEST_CASE("cross-model comparison") {
  const auto data = synth(3, 4, 20, 30, 0.15, 10);
  const auto pd = pad_and_mask(data.dataset);
  Hyperparams h;
  h.epochs = 40;
  const auto ens = train_ensemble(pd, data.labels, h);
  const AttentionSet att(ens, pd);
  const auto tables = cross_model_comparison(att, pd.ids[2], 0, 1);
  REQUIRE(tables.size() == 3);
  double spread = 0.0;
  for (std::size_t m = 1; m < 3; ++m) {
    REQUIRE(tables[m].records.size() == tables[0].records.size());
    for (std::size_t r = 0; r < tables[0].records.size(); ++r) {
      CHECK(tables[m].records[r].value_a == tables[0].records[r].value_a);
      CHECK(tables[m].records[r].value_b == tables[0].records[r].value_b);
      CHECK(tables[m].records[r].time == tables[0].records[r].time);
      spread = std::max(spread, std::abs(tables[m].records[r].weight - tables[0].records[r].weight));
    }
  }
  CHECK(spread > 1e-6);
  require_errc(Errc::unknown_id, [&] { cross_model_comparison(att, "nobody", 0, 1); });
  require_errc(Errc::bad_feature_index, [&] { cross_model_comparison(att, pd.ids[0], 1, 1); });

  const auto two = synth(2, 3, 20, 30, 0.15, 10);
  const auto pd2 = pad_and_mask(two.dataset);
  const auto ens2 = random_ensemble(12, 2, 5);
  const AttentionSet att2(ens2, pd2);
  CHECK(cross_model_comparison(att2, pd2.ids[0], 0, 1).size() == 1);
}

TEST_CASE("similarity profile") {
  SUBCASE("identical individuals") {
    MtsDataset ds;
    ds.feature_names = {"a", "b"};
    Matrix x(2, 4);
    x << 0.1, 0.2, 0.3, 0.4, 0.9, 0.8, 0.7, 0.6;
    ds.individuals = {{"p", x}, {"q", x}, {"r", Matrix(x.array() + 0.5)}, {"s", Matrix(x.array() + 0.6)}};
    ClusterLabels labels;
    labels.k = 2;
    labels.assignment = {{"p", 0}, {"q", 0}, {"r", 1}, {"s", 1}};
    const auto prof = cluster_similarity_profile(pad_and_mask(ds), labels);
    CHECK(prof.rows[0].mean_similarity[0] == 1.0);
    CHECK(prof.sigma > 0.0);
  }
  SUBCASE("separated clusters are more similar within than between") {
    const auto data = synth(3, 5, 30, 40, 0.05, 11);
    const auto prof = cluster_similarity_profile(pad_and_mask(data.dataset), data.labels);
    double within = 0.0, between = 0.0;
    for (const auto& row : prof.rows) {
      for (int c = 0; c < 3; ++c) (c == row.cluster ? within : between) += row.mean_similarity[static_cast<std::size_t>(c)];
    }
    CHECK(within / 15.0 > between / 30.0);
  }
  SUBCASE("clusters generated from the same spec overlap") {
    SynthConfig cfg;
    cfg.n_per_cluster = 5;
    cfg.t_min = 30;
    cfg.t_max = 40;
    cfg.noise_sd = 0.05;
    auto spec = default_ground_truth(3, 12);
    spec.clusters[2] = spec.clusters[0];
    const auto data = generate(cfg, spec);
    const auto prof = cluster_similarity_profile(pad_and_mask(data.dataset), data.labels);
    // members of 0 and 2 look as similar to each other's cluster as to their own
    double lo0 = 1.0, hi2 = 0.0;
    for (const auto& row : prof.rows) {
      if (row.cluster == 0) lo0 = std::min(lo0, row.mean_similarity[0]);
      if (row.cluster == 0) hi2 = std::max(hi2, row.mean_similarity[2]);
    }
    CHECK(hi2 > lo0);
  }
  SUBCASE("singleton clusters have no peer") {
    const auto data = synth(2, 2, 20, 20, 0.1, 12);
    auto labels = data.labels;
    labels.assignment[data.dataset.individuals[0].id] = 1;
    const auto prof = cluster_similarity_profile(pad_and_mask(data.dataset), labels);
    CHECK(std::isnan(prof.rows[1].mean_similarity[0]));
  }
}

TEST_CASE("csv output") {
  CHECK(format_number(0.123456789012) == "0.123456789");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(1e-12) == "1e-12");

  const auto data = synth(3, 3, 20, 30, 0.15, 13);
  const auto pd = pad_and_mask(data.dataset);
  const auto ens = random_ensemble(12, 3, 6);
  auto render = [&] {
    const AttentionSet att(ens, pd);
    std::ostringstream out;
    write_correlation_profiles_csv(out, cluster_correlation_profiles(att, data.labels), pd.feature_names);
    for (const auto& hm : feature_attention_heatmaps(att, data.labels)) write_heatmap_csv(out, hm, pd.feature_names);
    write_interaction_csv(out, interaction_table(att, data.labels, 0, 1));
    write_summary_csv(out, individual_summary(att, data.labels, pd.ids[0]), pd.feature_names);
    write_similarity_csv(out, cluster_similarity_profile(pd, data.labels), 3);
    write_attention_feature_csv(out, attention_vs_feature_table(att, data.labels, 0));
    write_cross_model_csv(out, cross_model_comparison(att, pd.ids[0], 0, 1));
    return out.str();
  };
  const std::string a = render();
  CHECK(a == render());
  CHECK(a.rfind("cluster,n_individuals,f0,f1", 0) == 0);
  CHECK(a.find("cluster,individual_id,time_index,value_a,value_b,weight,model\n") != std::string::npos);
  CHECK(a.find("feature,rank,time_index,value,weight\n") != std::string::npos);
  CHECK(a.find("individual_id,cluster,similarity_cluster0,similarity_cluster1,similarity_cluster2\n") !=
        std::string::npos);
  CHECK(a.find("model,individual_id,mean_attention,mean_feature,class,cluster\n") != std::string::npos);
}
