// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fails.
//
// usage: emaattn_acceptance --cli <emaattn binary> --fixture <fixture.cfg> --work <scratch dir>

#include "emaattn/ensemble.hpp"
#include "emaattn/explain.hpp"
#include "emaattn/model.hpp"
#include "emaattn/pipeline.hpp"
#include "emaattn/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace emaattn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// The planted-signal regime shared by the training-based criteria. Inputs come
// from the generator already on [0, 1], so no per-individual rescaling is
// applied: min-max rescaling would map every planted mean shift back onto the
// same range as the baseline.
struct Regime {
  double noise = 0.15;
  double amplitude = 0.3;
  int k = 3;
  std::vector<int> sizes;  // empty: 20 per cluster
  Normalization normalization = Normalization::none;
  Hyperparams hyper;

  Regime() {
    hyper.epochs = 300;
    hyper.lr = 0.01;
    hyper.weight_decay = 1.0;
  }
};

struct Split {
  PaddedDataset train;
  PaddedDataset test;
  ClusterLabels labels;
  GroundTruthSpec truth;
};

Split make_split(const Regime& regime, std::uint64_t data_seed) {
  SynthConfig sc;
  sc.k = regime.k;
  sc.cluster_sizes = regime.sizes;
  sc.noise_sd = regime.noise;
  sc.seed = data_seed;
  auto gen = generate(sc, default_ground_truth(regime.k, sc.v, SignalKind::mean_shift, regime.amplitude));
  const PaddedDataset pd = pad_and_mask(normalize_per_individual(gen.dataset, regime.normalization));
  auto [train, test] = temporal_split(pd, 0.7);
  return {std::move(train), std::move(test), std::move(gen.labels), std::move(gen.truth)};
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  for (Variant v : {Variant::dual, Variant::temporal_only, Variant::recurrent_baseline}) {
    const double err = gradcheck_random_instances(v, 12, {20, 50}, 20, default_gradcheck_eps(v), 2024);
    ok = ok && err < 1e-4;
    detail += std::string(to_string(v)) + "=" + fmt(err) + " ";
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < 60.0;
  return {ok, "max rel err " + detail + "in " + fmt(elapsed) + " s (limits 1e-4, 60 s)"};
}

Outcome attention_invariants() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // A briefly trained model supplies the "trained" half of the passes.
  SynthConfig sc;
  sc.n_per_cluster = 5;
  sc.t_min = 30;
  sc.t_max = 60;
  sc.seed = 5;
  auto gen = generate(sc, default_ground_truth(3, 12));
  const PaddedDataset pd = pad_and_mask(gen.dataset);
  Hyperparams h;
  h.epochs = 30;
  const TrainedModel trained = train_model(pd, one_hot(gen.labels, pd.ids)[0], h);

  double worst_row = 0.0, worst_f = 0.0, worst_avg = 0.0, worst_pad = 0.0;
  for (int pass = 0; pass < 100; ++pass) {
    const int t = std::uniform_int_distribution<int>(8, 80)(rng);
    const int valid = std::uniform_int_distribution<int>(2, t)(rng);
    Matrix x = Matrix::Zero(12, t);
    Mask mask(static_cast<std::size_t>(t), false);
    for (int j = 0; j < valid; ++j) {
      mask[static_cast<std::size_t>(j)] = true;
      for (int f = 0; f < 12; ++f) x(f, j) = unit(rng);
    }
    ModelShape shape;
    shape.v = 12;
    const ModelParams params = pass % 2 == 0 ? trained.params : random_params(shape, rng(), 1.0);
    const ForwardResult fr = forward(params, x, mask);
    for (int i = 0; i < valid; ++i) {
      worst_row = std::max(worst_row, std::abs(fr.bundle.a_t.row(i).sum() - 1.0));
      for (int j = valid; j < t; ++j) worst_pad = std::max(worst_pad, std::abs(fr.bundle.a_t(i, j)));
    }
    for (int i = valid; i < t; ++i) worst_pad = std::max(worst_pad, fr.bundle.a_t.row(i).cwiseAbs().maxCoeff());
    for (int i = 0; i < 12; ++i) worst_f = std::max(worst_f, std::abs(fr.bundle.a_f.row(i).sum() - 1.0));
    const AvgTemporalAttention avg = average_temporal(fr.bundle.a_t, mask);
    worst_avg = std::max(worst_avg, std::abs(avg.weights.sum() - 1.0));
  }
  const bool ok = worst_row <= 1e-9 && worst_f <= 1e-9 && worst_avg <= 1e-9 && worst_pad == 0.0;
  return {ok, "100 passes: |A_T row sum - 1| <= " + fmt(worst_row) + ", padded max " + fmt(worst_pad) +
                  ", |A_F row sum - 1| <= " + fmt(worst_f) + ", |A_T_av sum - 1| <= " + fmt(worst_avg)};
}

Outcome table_ordering() {
  const auto start = Clock::now();
  const Variant order[] = {Variant::dual, Variant::temporal_only, Variant::recurrent_baseline};
  std::map<Variant, double> mean_train;
  for (int seed = 0; seed < 5; ++seed) {
    Regime regime;
    const Split s = make_split(regime, 100 + static_cast<std::uint64_t>(seed));
    for (Variant v : order) {
      Hyperparams h = regime.hyper;
      h.variant = v;
      h.seed = static_cast<std::uint64_t>(seed);
      const auto acc = evaluate(train_ensemble(s.train, s.labels, h), s.train, s.test, s.labels);
      mean_train[v] += acc.mean_train_correct / 5.0;
    }
  }
  int noiseless_full = 0;
  for (int seed = 0; seed < 5; ++seed) {
    Regime regime;
    regime.noise = 0.0;
    const Split s = make_split(regime, 200 + static_cast<std::uint64_t>(seed));
    Hyperparams h = regime.hyper;
    h.seed = static_cast<std::uint64_t>(seed);
    const auto acc = evaluate(train_ensemble(s.train, s.labels, h), s.train, s.test, s.labels);
    const bool all = std::all_of(acc.per_model.begin(), acc.per_model.end(),
                                 [&](const ModelAccuracy& m) { return m.train_correct == acc.n; });
    noiseless_full += all ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  const bool ordered = mean_train[Variant::dual] >= mean_train[Variant::temporal_only] &&
                       mean_train[Variant::temporal_only] >= mean_train[Variant::recurrent_baseline];
  const bool ok = ordered && noiseless_full == 5 && elapsed < 600.0;
  return {ok, "mean train correct /60: dual " + fmt(mean_train[Variant::dual], 4) + ", temporal-only " +
                  fmt(mean_train[Variant::temporal_only], 4) + ", recurrent " +
                  fmt(mean_train[Variant::recurrent_baseline], 4) + "; noiseless dual 60/60 in " +
                  std::to_string(noiseless_full) + "/5 seeds; " + fmt(elapsed) + " s"};
}

int rank_by_magnitude(const Vector& r, int feature) {
  int rank = 0;
  for (Eigen::Index j = 0; j < r.size(); ++j) rank += std::abs(r(j)) > std::abs(r(feature)) ? 1 : 0;
  return rank;
}

struct RecoveryCounts {
  std::vector<int> per_cluster;  // seeds where that cluster's planted feature is top-2
  int correlation_hits = 0;      // seeds where every cluster hits
  int heatmap_hits = 0;
};

std::string join_counts(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

// One dual ensemble per seed. The correlation rate is scored per cluster; the
// all-clusters count is reported alongside it.
RecoveryCounts recovery(bool shuffle_labels) {
  RecoveryCounts counts;
  counts.per_cluster.assign(static_cast<std::size_t>(Regime{}.k), 0);
  for (int seed = 0; seed < 10; ++seed) {
    Regime regime;
    Split s = make_split(regime, 300 + static_cast<std::uint64_t>(seed));
    if (shuffle_labels) {
      std::vector<int> clusters;
      for (const auto& id : s.train.ids) clusters.push_back(s.labels.cluster_of(id));
      std::mt19937_64 rng(7000 + static_cast<std::uint64_t>(seed));
      std::shuffle(clusters.begin(), clusters.end(), rng);
      for (std::size_t i = 0; i < s.train.ids.size(); ++i) s.labels.assignment[s.train.ids[i]] = clusters[i];
    }
    Hyperparams h = regime.hyper;
    h.seed = static_cast<std::uint64_t>(seed);
    const EnsembleModel ens = train_ensemble(s.train, s.labels, h);
    const AttentionSet att(ens, s.train);
    const auto profiles = cluster_correlation_profiles(att, s.labels);
    const auto heatmaps = feature_attention_heatmaps(att, s.labels);
    bool corr_all = true, heat_all = true;
    for (int c = 0; c < regime.k; ++c) {
      const int planted = s.truth.clusters[static_cast<std::size_t>(c)].features.front();
      const bool hit = rank_by_magnitude(profiles[static_cast<std::size_t>(c)].r, planted) <= 1;
      counts.per_cluster[static_cast<std::size_t>(c)] += hit ? 1 : 0;
      corr_all = corr_all && hit;
      Eigen::Index best = 0;
      heatmaps[static_cast<std::size_t>(c)].weights.colwise().mean().maxCoeff(&best);
      heat_all = heat_all && best == planted;
    }
    counts.correlation_hits += corr_all ? 1 : 0;
    counts.heatmap_hits += heat_all ? 1 : 0;
  }
  return counts;
}

Outcome minority_attention() {
  int lower = 0;
  std::string detail;
  for (int seed = 0; seed < 5; ++seed) {
    Regime regime;
    regime.k = 2;
    regime.sizes = {20, 40};
    const Split s = make_split(regime, 400 + static_cast<std::uint64_t>(seed));
    Hyperparams h = regime.hyper;
    h.seed = static_cast<std::uint64_t>(seed);
    const EnsembleModel ens = train_ensemble(s.train, s.labels, h);
    const AttentionSet att(ens, s.train);
    double pos = 0.0, neg = 0.0;
    int n_pos = 0, n_neg = 0;
    for (const auto& rec : attention_vs_feature_table(att, s.labels, 0)) {
      (rec.class_label == 1 ? pos : neg) += rec.mean_attention;
      (rec.class_label == 1 ? n_pos : n_neg) += 1;
    }
    pos /= n_pos;
    neg /= n_neg;
    lower += pos < neg ? 1 : 0;
    detail += " (" + fmt(pos) + " vs " + fmt(neg) + ")";
  }
  return {lower >= 4, "minority mean below majority in " + std::to_string(lower) + "/5 seeds:" + detail};
}

Outcome k2_contract() {
  SynthConfig sc;
  sc.k = 2;
  sc.n_per_cluster = 6;
  sc.t_min = 20;
  sc.t_max = 30;
  sc.seed = 11;
  auto gen = generate(sc, default_ground_truth(2, 12));
  const PaddedDataset pd = pad_and_mask(gen.dataset);
  Hyperparams h;
  h.epochs = 5;
  const EnsembleModel ens = train_ensemble(pd, gen.labels, h);
  const bool ok = ens.size() == 1 && ens.model_for_cluster(0) == 0 && ens.model_for_cluster(1) == 0;
  return {ok, "2-cluster labels produced " + std::to_string(ens.size()) + " model(s)"};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return out;
}

Outcome determinism(const std::string& cli, const std::string& fixture, const fs::path& work) {
  const fs::path a = work / "determinism_a", b = work / "determinism_b";
  fs::remove_all(a);
  fs::remove_all(b);
  for (const auto& out : {a, b}) {
    const std::string cmd = "\"" + cli + "\" run --config \"" + fixture + "\" --seed 7 --out \"" + out.string() +
                            "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed: " + cmd};
  }
  const auto ta = tree_contents(a), tb = tree_contents(b);
  const auto ma = nlohmann::json::parse(ta.at("manifest.json")), mb = nlohmann::json::parse(tb.at("manifest.json"));
  bool same_files = ta.size() == tb.size();
  int differing = 0;
  for (const auto& [path, bytes] : ta) {
    if (path == "manifest.json") continue;  // holds the stage timings
    const auto it = tb.find(path);
    if (it == tb.end() || it->second != bytes) ++differing;
  }
  // Every emitted file is listed with a digest that matches its bytes.
  bool listed = ma["files"].size() + 1 == ta.size();
  for (const auto& f : ma["files"]) {
    const auto it = ta.find(f["path"].get<std::string>());
    listed = listed && it != ta.end() && sha256_hex(it->second) == f["sha256"].get<std::string>();
  }
  const bool digests_equal = ma["files"] == mb["files"] && ma["config_hash"] == mb["config_hash"];
  const bool ok = same_files && differing == 0 && digests_equal && listed;
  return {ok, std::to_string(ta.size()) + " files per run, " + std::to_string(differing) +
                  " differing, manifest digests " + (digests_equal ? "equal" : "DIFFER") +
                  (listed ? ", inventory complete" : ", inventory INCOMPLETE")};
}

Outcome masking_soundness(const fs::path& work) {
  PipelineConfig cfg;
  SynthBlock synth;
  synth.config.n_per_cluster = 6;
  synth.config.t_min = 30;
  synth.config.t_max = 48;
  cfg.synth = synth;
  cfg.normalization = Normalization::none;
  cfg.hyper.epochs = 60;
  cfg.variants = {Variant::temporal_only, Variant::dual};
  cfg.seed = 3;

  const PreparedData base = prepare_data(cfg);
  cfg.output_dir = work / "masking_plain";
  fs::remove_all(cfg.output_dir);
  run_pipeline(cfg);
  cfg.t_cap = base.padded.t_pad + 30;
  cfg.output_dir = work / "masking_padded";
  fs::remove_all(cfg.output_dir);
  run_pipeline(cfg);

  // Probabilities of every trained model, with and without 30 extra padded
  // columns on every individual.
  double worst = 0.0;
  const PreparedData padded = prepare_data(cfg);
  for (Variant v : cfg.variants) {
    Hyperparams h = cfg.hyper;
    h.variant = v;
    h.seed = cfg.seed;
    const EnsembleModel ens = train_ensemble(base.train, base.labels, h);
    for (const auto& model : ens.models) {
      for (std::size_t i = 0; i < base.padded.size(); ++i) {
        Matrix wide = Matrix::Zero(base.padded.v(), base.padded.t_pad + 30);
        wide.leftCols(base.padded.t_pad) = base.padded.tensor[i];
        Mask mask = base.padded.mask[i];
        mask.resize(static_cast<std::size_t>(wide.cols()), false);
        const double p0 = predict(model, base.padded.tensor[i], base.padded.mask[i]).p;
        const double p1 = predict(model, wide, mask).p;
        const double p2 = predict(model, padded.padded.tensor[i], padded.padded.mask[i]).p;
        worst = std::max({worst, std::abs(p0 - p1), std::abs(p0 - p2)});
      }
    }
  }

  int csv_total = 0, csv_differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(work / "masking_plain")) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    const auto rel = fs::relative(e.path(), work / "masking_plain");
    if (rel.begin()->string() != "explain") continue;
    ++csv_total;
    const fs::path other = work / "masking_padded" / rel;
    if (!fs::exists(other) || read_file(other) != read_file(e.path())) ++csv_differing;
  }
  const bool ok = worst < 1e-9 && csv_total > 0 && csv_differing == 0;
  return {ok, "max |dp| = " + fmt(worst) + " (limit 1e-9); " + std::to_string(csv_differing) + " of " +
                  std::to_string(csv_total) + " explanation CSVs differ"};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli, fixture, work = "acceptance_work";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") cli = argv[i + 1];
    else if (flag == "--fixture") fixture = argv[i + 1];
    else if (flag == "--work") work = argv[i + 1];
  }
  if (cli.empty() || fixture.empty()) {
    std::cerr << "usage: " << argv[0] << " --cli <emaattn> --fixture <fixture.cfg> [--work <dir>]\n";
    return 2;
  }
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " " << name << ": " << o.detail << "  ["
              << fmt(seconds_since(start)) << " s]" << std::endl;
  };

  report(1, "gradient correctness", gradient_correctness);
  report(2, "attention invariants", attention_invariants);
  report(3, "accuracy ordering", table_ordering);
  RecoveryCounts real, null;
  report(4, "explanation recovery", [&] {
    real = recovery(false);
    null = recovery(true);
    const int worst_real = *std::min_element(real.per_cluster.begin(), real.per_cluster.end());
    const int worst_null = *std::max_element(null.per_cluster.begin(), null.per_cluster.end());
    const bool ok = worst_real >= 8 && worst_null <= 3;
    return Outcome{ok, "planted feature top-2 per cluster in " + join_counts(real.per_cluster) +
                           " of 10 seeds (need each >= 8), shuffled labels " + join_counts(null.per_cluster) +
                           " (need each <= 3); every cluster at once " + std::to_string(real.correlation_hits) +
                           "/10, shuffled " + std::to_string(null.correlation_hits) + "/10"};
  });
  report(5, "feature-attention recovery", [&] {
    return Outcome{real.heatmap_hits >= 8, "planted column is the heatmap maximum in every cluster for " +
                                               std::to_string(real.heatmap_hits) + "/10 seeds (need >= 8)"};
  });
  report(6, "minority attention", minority_attention);
  report(7, "two-cluster contract", k2_contract);
  report(8, "determinism", [&] { return determinism(cli, fixture, work); });
  report(9, "masking soundness", [&] { return masking_soundness(work); });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
