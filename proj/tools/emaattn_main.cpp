#include "emaattn/checkpoint.hpp"
#include "emaattn/config.hpp"
#include "emaattn/error.hpp"
#include "emaattn/pipeline.hpp"
#include "emaattn/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace emaattn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::config: return kExitConfig;
    case ErrorCategory::data: return kExitData;
    case ErrorCategory::numeric: return kExitNumeric;
  }
  return 1;
}

struct RunArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_run_args(CLI::App* cmd, RunArgs& args) {
  cmd->add_option("--config", args.config, "pipeline configuration (INI)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out, "output directory (overrides config and EMAATTN_OUT)");
  cmd->add_option("--seed", args.seed, "global seed (overrides pipeline.seed)");
}

PipelineConfig resolve_config(const RunArgs& args) {
  PipelineConfig cfg = load_config(args.config);
  apply_environment(cfg);
  if (!args.out.empty()) cfg.output_dir = args.out;
  if (args.seed) cfg.seed = *args.seed;
  return cfg;
}

void print_summary(const RunManifest& manifest, const fs::path& out) {
  std::cout << "wrote " << manifest.files.size() + 1 << " files to " << out.string() << '\n';
  std::cout << "config hash " << manifest.config_hash << '\n';
}

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  write_file_atomic(path, content);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explain a clustering of multivariate time series with one-vs-rest attention models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  // synth
  SynthConfig synth;
  std::string synth_out;
  std::string signal = "mean_shift";
  double amplitude = 0.3;
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-signal dataset, labels and ground truth");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--k", synth.k, "number of clusters")->capture_default_str();
  synth_cmd->add_option("--n-per-cluster", synth.n_per_cluster, "individuals per cluster")->capture_default_str();
  synth_cmd->add_option("--v", synth.v, "features")->capture_default_str();
  synth_cmd->add_option("--t-min", synth.t_min, "shortest series")->capture_default_str();
  synth_cmd->add_option("--t-max", synth.t_max, "longest series")->capture_default_str();
  synth_cmd->add_option("--likert", synth.likert_levels, "quantisation levels")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise_sd, "baseline noise sd")->capture_default_str();
  synth_cmd->add_option("--signal", signal, "mean_shift | oscillation | anti_correlated_pair")->capture_default_str();
  synth_cmd->add_option("--amplitude", amplitude, "planted signal amplitude")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();

  RunArgs run_args, train_args, explain_args;
  auto* run_cmd = app.add_subcommand("run", "full pipeline: ingest, split, train, evaluate, explain, render");
  add_run_args(run_cmd, run_args);
  auto* train_cmd = app.add_subcommand("train", "train and evaluate every configured variant");
  add_run_args(train_cmd, train_args);
  auto* explain_cmd = app.add_subcommand("explain", "explain previously trained checkpoints");
  add_run_args(explain_cmd, explain_args);
  std::vector<std::string> checkpoints;
  explain_cmd->add_option("--models", checkpoints, "ensemble checkpoint files (models/<variant>.json)")
      ->required()
      ->check(CLI::ExistingFile);

  std::string gc_variant = "all";
  int gc_instances = 20;
  int gc_v = 12;
  std::vector<int> gc_t{20, 50};
  std::optional<double> gc_eps;
  double gc_scale = 0.5;
  double gc_tol = 1e-4;
  std::uint64_t gc_seed = 0;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  gc_cmd->add_option("--variant", gc_variant, "dual | temporal_only | recurrent_baseline | all")->capture_default_str();
  gc_cmd->add_option("--instances", gc_instances, "random problems per variant")->capture_default_str();
  gc_cmd->add_option("--v", gc_v, "features")->capture_default_str();
  gc_cmd->add_option("--t", gc_t, "series lengths, cycled")->capture_default_str();
  gc_cmd->add_option("--eps", gc_eps, "central-difference step (default: per-variant)");
  gc_cmd->add_option("--scale", gc_scale, "half-width of the uniform parameter draw")->capture_default_str();
  gc_cmd->add_option("--tol", gc_tol, "maximum accepted relative error")->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "instance seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) {
      const auto kind = parse_signal_kind(signal);
      const auto result = generate(synth, default_ground_truth(synth.k, synth.v, kind, amplitude));
      const fs::path out(synth_out);
      std::ostringstream data, labels;
      write_dataset(data, result.dataset);
      write_cluster_labels(labels, result.labels);
      write_text(out / "dataset.csv", data.str());
      write_text(out / "labels.csv", labels.str());
      write_text(out / "ground_truth.json", ground_truth_to_json(result.truth));
      std::cout << "wrote " << result.dataset.size() << " individuals to " << out.string() << '\n';
    } else if (run_cmd->parsed() || train_cmd->parsed()) {
      const bool full = run_cmd->parsed();
      const PipelineConfig cfg = resolve_config(full ? run_args : train_args);
      RunOptions options;
      options.explain = full;
      const RunManifest manifest = run_pipeline(cfg, options);
      print_summary(manifest, cfg.output_dir);
    } else if (explain_cmd->parsed()) {
      PipelineConfig cfg = resolve_config(explain_args);
      RunOptions options;
      options.train = false;
      cfg.variants.clear();
      for (const auto& path : checkpoints) {
        options.pretrained.push_back(load_ensemble(path));
        cfg.variants.push_back(options.pretrained.back().variant());
      }
      const RunManifest manifest = run_pipeline(cfg, options);
      print_summary(manifest, cfg.output_dir);
    } else if (gc_cmd->parsed()) {
      std::vector<Variant> variants;
      if (gc_variant == "all") {
        variants = {Variant::dual, Variant::temporal_only, Variant::recurrent_baseline};
      } else {
        variants = {parse_variant(gc_variant)};
      }
      bool ok = true;
      for (Variant v : variants) {
        const double eps = gc_eps.value_or(default_gradcheck_eps(v));
        const double err = gradcheck_random_instances(v, gc_v, gc_t, gc_instances, eps, gc_seed, gc_scale);
        const bool pass = err < gc_tol;
        ok = ok && pass;
        std::cout << to_string(v) << " max_rel_err=" << err << (pass ? " ok" : " FAIL") << '\n';
      }
      return ok ? 0 : kExitNumeric;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
