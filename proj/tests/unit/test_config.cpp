#include "emaattn/config.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace emaattn;
namespace fs = std::filesystem;

namespace {

PipelineConfig parse(const std::string& text, const fs::path& base = "/base") {
  std::istringstream in(text);
  return parse_config(in, base);
}

}  // namespace

TEST_CASE("defaults") {
  const auto cfg = parse("");
  CHECK(cfg.split == 0.7);
  CHECK(cfg.k == 3);
  CHECK(cfg.normalization == Normalization::min_max);
  CHECK(cfg.variants == std::vector<Variant>{Variant::recurrent_baseline, Variant::temporal_only, Variant::dual});
  CHECK_FALSE(cfg.synth.has_value());
  CHECK(cfg.hyper.d_k == 16);
  CHECK(cfg.hyper.d_f == 8);
}

TEST_CASE("the test fixture parses") {
  const auto cfg = load_config(fs::path(EMAATTN_FIXTURE_DIR) / "fixture.cfg");
  REQUIRE(cfg.synth.has_value());
  CHECK(cfg.synth->config.n_per_cluster == 6);
  CHECK(cfg.synth->config.t_min == 30);
  CHECK(cfg.synth->config.t_max == 48);
  CHECK(cfg.synth->kind == SignalKind::mean_shift);
  CHECK(cfg.synth->amplitude == 0.3);
  CHECK(cfg.normalization == Normalization::none);
  CHECK(cfg.hyper.epochs == 150);
  CHECK(cfg.hyper.weight_decay == 1.0);
  CHECK(cfg.output_dir == fs::path(EMAATTN_FIXTURE_DIR) / "fixture_out");
  CHECK(cfg.summaries_per_cluster == 1);
  validate_config(cfg);
}

TEST_CASE("every section") {
  const auto cfg = parse(
      "[data]\ndataset=d.csv\nlabels=/abs/l.csv\nk=4\nnormalization=z_score\nt_cap=300\n"
      "[model]\nd_k=8\nd_f=6\nhidden=12\nlr=0.005\nweight_decay=0.5\nepochs=20\nclass_weighting=balanced\n"
      "[pipeline]\nsplit=0.6\noutput_dir=out\nvariants=dual,temporal_only\nseed=9\n"
      "[explain]\naxis=given\ncorrelation=spearman\nscatter_feature=3\ninteraction_a=2\ninteraction_b=5\n"
      "summaries_per_cluster=2\n"
      "[plots]\nheatmaps=false\nscatter=0\n");
  CHECK(cfg.dataset == fs::path("/base/d.csv"));
  CHECK(cfg.labels == fs::path("/abs/l.csv"));
  CHECK(cfg.k == 4);
  CHECK(cfg.normalization == Normalization::z_score);
  CHECK(cfg.t_cap == 300);
  CHECK(cfg.hyper.d_k == 8);
  CHECK(cfg.hyper.d_f == 6);
  CHECK(cfg.hyper.hidden == 12);
  CHECK(cfg.hyper.lr == 0.005);
  CHECK(cfg.hyper.weight_decay == 0.5);
  CHECK(cfg.hyper.epochs == 20);
  CHECK(cfg.hyper.class_weighting == ClassWeighting::balanced);
  CHECK(cfg.split == 0.6);
  CHECK(cfg.output_dir == fs::path("/base/out"));
  CHECK(cfg.variants == std::vector<Variant>{Variant::dual, Variant::temporal_only});
  CHECK(cfg.seed == 9);
  CHECK(cfg.explain.axis == AveragingAxis::given);
  CHECK(cfg.explain.correlation == CorrelationKind::spearman);
  CHECK(cfg.scatter_feature == 3);
  CHECK(cfg.interaction_a == 2);
  CHECK(cfg.interaction_b == 5);
  CHECK(cfg.summaries_per_cluster == 2);
  CHECK_FALSE(cfg.plots.heatmaps);
  CHECK_FALSE(cfg.plots.scatter);
  CHECK(cfg.plots.correlation_bars);
}

TEST_CASE("synth block") {
  const auto cfg = parse(
      "[data]\nk=2\n[synth]\nenabled=true\ncluster_sizes=20, 40\nv=6\nt_min=10\nt_max=12\nlikert_levels=5\n"
      "noise_sd=0\nsignal=anti_correlated_pair\namplitude=0.2\nseed=77\n");
  REQUIRE(cfg.synth.has_value());
  CHECK(cfg.synth->config.cluster_sizes == std::vector<int>{20, 40});
  CHECK(cfg.synth->config.v == 6);
  CHECK(cfg.synth->config.likert_levels == 5);
  CHECK(cfg.synth->config.noise_sd == 0.0);
  CHECK(cfg.synth->kind == SignalKind::anti_correlated_pair);
  CHECK(cfg.synth->amplitude == 0.2);
  CHECK(cfg.synth->seed == 77u);
  CHECK_FALSE(parse("[synth]\nenabled=false\n").synth.has_value());
}

TEST_CASE("rejected inputs") {
  require_errc(Errc::config_error, [] { parse("[dta]\nk=3\n"); });
  require_errc(Errc::config_error, [] { parse("[model]\nepoch=3\n"); });
  require_errc(Errc::config_error, [] { parse("[model]\nepochs=many\n"); });
  require_errc(Errc::config_error, [] { parse("[pipeline]\nvariants=dual,lstm\n"); });
  require_errc(Errc::config_error, [] { parse("[data]\nnormalization=robust\n"); });
  require_errc(Errc::config_error, [] { parse("[synth]\nenabled=true\ncluster_sizes=3,x\n"); });
  require_errc(Errc::config_error, [] { parse("[explain]\naxis=sideways\n"); });
  require_errc(Errc::config_error, [] { parse("[data\nk=3\n"); });
  require_errc(Errc::config_error, [] { load_config("/nonexistent/run.cfg"); });
}

TEST_CASE("validation before compute") {
  auto synth = parse("[synth]\nenabled=true\n");
  validate_config(synth);
  synth.split = 1.0;
  require_errc(Errc::config_error, [&] { validate_config(synth); });
  synth.split = 0.7;
  synth.k = 1;
  require_errc(Errc::config_error, [&] { validate_config(synth); });
  synth.k = 3;
  synth.variants.clear();
  require_errc(Errc::config_error, [&] { validate_config(synth); });

  const fs::path dir = fs::temp_directory_path() / "emaattn_config_test";
  fs::create_directories(dir);
  std::ofstream(dir / "d.csv") << "individual_id,time_index,x\n";
  auto missing_labels = parse("[data]\ndataset=d.csv\n", dir);
  require_errc(Errc::config_error, [&] { validate_config(missing_labels); });
  auto kmeans = parse("[data]\ndataset=d.csv\nkmeans_labels=true\n", dir);
  validate_config(kmeans);
  auto missing_file = parse("[data]\ndataset=nope.csv\nlabels=l.csv\n", dir);
  require_errc(Errc::config_error, [&] { validate_config(missing_file); });
  fs::remove_all(dir);
}

TEST_CASE("canonical text tracks settings but not the output directory") {
  auto a = parse("[synth]\nenabled=true\n[pipeline]\noutput_dir=one\n");
  auto b = parse("[synth]\nenabled=true\n[pipeline]\noutput_dir=two\n");
  CHECK(canonical_config(a) == canonical_config(b));
  b.seed = 5;
  CHECK(canonical_config(a) != canonical_config(b));
  auto c = parse("[data]\nnormalization=none\n[synth]\nenabled=true\n");
  CHECK(canonical_config(c).find("data.normalization=none") != std::string::npos);
}
