#include "emaattn/pipeline.hpp"

#include "emaattn/checkpoint.hpp"
#include "emaattn/error.hpp"
#include "emaattn/explain.hpp"
#include "emaattn/svg.hpp"
#include "emaattn/synth.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <tuple>
#include <type_traits>

#ifndef EMAATTN_VERSION
#define EMAATTN_VERSION "0.0.0"
#endif

namespace emaattn {
namespace {

namespace fs = std::filesystem;

// Collects every file the run writes so the manifest can list them.
class OutputTree {
 public:
  explicit OutputTree(fs::path root) : root_(std::move(root)) {}

  void write(const std::string& rel, const std::string& content) {
    const fs::path target = root_ / rel;
    fs::create_directories(target.parent_path());
    write_file_atomic(target, content);
    entries_.push_back({rel, sha256_hex(content), content.size()});
  }

  template <class F>
  void write_with(const std::string& rel, F&& emit) {
    std::ostringstream out;
    emit(out);
    write(rel, out.str());
  }

  std::vector<ManifestEntry> entries() const {
    auto sorted = entries_;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return sorted;
  }

 private:
  fs::path root_;
  std::vector<ManifestEntry> entries_;
};

class StageClock {
 public:
  explicit StageClock(RunManifest& manifest) : manifest_(manifest) {}

  template <class F>
  auto run(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      manifest_.timings.emplace_back(stage, dt.count());
    };
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record();
      } else {
        auto result = body();
        record();
        return result;
      }
    } catch (const Error& e) {
      throw Error(e.code(), stage + ": " + e.message());
    } catch (const fs::filesystem_error& e) {
      throw Error(Errc::io_error, stage + ": " + e.what());
    }
  }

 private:
  RunManifest& manifest_;
};

std::string to_text(const MtsDataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

std::string to_text(const ClusterLabels& labels) {
  std::ostringstream out;
  write_cluster_labels(out, labels);
  return out.str();
}

// File-name safe rendering of an individual id.
std::string slug(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

std::vector<std::string> summary_ids(const PreparedData& data, int per_cluster) {
  std::vector<std::string> ids;
  for (int c = 0; c < data.labels.k; ++c) {
    int taken = 0;
    for (const auto& id : data.train.ids) {
      if (taken >= per_cluster) break;
      if (data.labels.cluster_of(id) == c) {
        ids.push_back(id);
        ++taken;
      }
    }
  }
  return ids;
}

void write_explanations(OutputTree& out, const PipelineConfig& cfg, const PreparedData& data,
                        const EnsembleModel& ens) {
  const std::string dir = std::string("explain/") + to_string(ens.variant()) + "/";
  const auto& names = data.train.feature_names;
  const AttentionSet att(ens, data.train, cfg.explain);

  const auto profiles = cluster_correlation_profiles(att, data.labels);
  out.write_with(dir + "correlation_profiles.csv",
                 [&](std::ostream& os) { write_correlation_profiles_csv(os, profiles, names); });
  if (cfg.plots.correlation_bars) out.write(dir + "correlation_profiles.svg", render_correlation_bars(profiles, names));

  const auto scatter = attention_vs_feature_table(att, data.labels, cfg.scatter_feature);
  const std::string scatter_name = "attention_vs_" + slug(names.at(static_cast<std::size_t>(cfg.scatter_feature)));
  out.write_with(dir + scatter_name + ".csv", [&](std::ostream& os) { write_attention_feature_csv(os, scatter); });
  if (cfg.plots.scatter) {
    out.write(dir + scatter_name + ".svg",
              render_scatter(scatter, names[static_cast<std::size_t>(cfg.scatter_feature)]));
  }

  if (ens.variant() == Variant::dual) {
    for (const auto& hm : feature_attention_heatmaps(att, data.labels)) {
      const std::string base = dir + "feature_heatmap_cluster" + std::to_string(hm.cluster);
      out.write_with(base + ".csv", [&](std::ostream& os) { write_heatmap_csv(os, hm, names); });
      if (cfg.plots.heatmaps) out.write(base + ".svg", render_heatmap(hm, names));
    }
  }

  const auto interactions = interaction_table(att, data.labels, cfg.interaction_a, cfg.interaction_b);
  out.write_with(dir + "interaction_" + std::to_string(cfg.interaction_a) + "_" + std::to_string(cfg.interaction_b) +
                     ".csv",
                 [&](std::ostream& os) { write_interaction_csv(os, interactions); });

  const auto ids = summary_ids(data, cfg.summaries_per_cluster);
  for (const auto& id : ids) {
    const auto summary = individual_summary(att, data.labels, id);
    out.write_with(dir + "individual_" + slug(id) + "_summary.csv",
                   [&](std::ostream& os) { write_summary_csv(os, summary, names); });
    if (cfg.plots.summaries) out.write(dir + "individual_" + slug(id) + "_summary.svg", render_summary(summary, names));
  }
  if (!ids.empty()) {
    const auto tables = cross_model_comparison(att, ids.front(), cfg.interaction_a, cfg.interaction_b);
    out.write_with(dir + "cross_model_" + slug(ids.front()) + ".csv",
                   [&](std::ostream& os) { write_cross_model_csv(os, tables); });
  }
}

}  // namespace

const char* library_version() { return EMAATTN_VERSION; }

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io_error, "SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error(Errc::io_error, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::io_error, "cannot move " + tmp.string() + " into place");
  }
}

void apply_environment(PipelineConfig& cfg) {
  if (const char* out = std::getenv("EMAATTN_OUT"); out != nullptr && *out != '\0') cfg.output_dir = out;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config_hash"] = m.config_hash;
  j["versions"] = m.versions;
  auto& timings = j["timings_seconds"] = nlohmann::ordered_json::object();
  for (const auto& [stage, seconds] : m.timings) timings[stage] = seconds;
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : m.files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return j.dump(2) + "\n";
}

PreparedData prepare_data(const PipelineConfig& cfg) {
  PreparedData data;
  if (cfg.synth) {
    SynthConfig sc = cfg.synth->config;
    sc.k = cfg.k;
    sc.seed = cfg.synth->seed.value_or(cfg.seed);
    auto result = generate(sc, default_ground_truth(cfg.k, sc.v, cfg.synth->kind, cfg.synth->amplitude));
    data.raw = std::move(result.dataset);
    data.labels = std::move(result.labels);
    data.truth = std::move(result.truth);
  } else {
    data.raw = load_dataset(cfg.dataset);
  }
  data.padded = pad_and_mask(normalize_per_individual(data.raw, cfg.normalization), cfg.t_cap);
  if (!cfg.synth) {
    data.labels = cfg.kmeans_labels ? kmeans_labels(data.padded, cfg.k, cfg.seed)
                                    : load_cluster_labels(cfg.labels, cfg.k);
  }
  validate_labels(data.labels);
  check_labels_cover(data.labels, data.padded.ids);
  std::tie(data.train, data.test) = temporal_split(data.padded, cfg.split);
  return data;
}

RunManifest run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
  RunManifest manifest;
  StageClock clock(manifest);
  clock.run("config", [&] { validate_config(cfg); });
  manifest.config_hash = sha256_hex(canonical_config(cfg));
  manifest.versions = {{"emaattn", library_version()},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                     "." + std::to_string(EIGEN_MINOR_VERSION)},
                       {"checkpoint_format", std::to_string(kCheckpointVersion)}};

  OutputTree out(cfg.output_dir);
  const PreparedData data = clock.run("ingest", [&] { return prepare_data(cfg); });
  clock.run("write-data", [&] {
    if (cfg.synth) {
      out.write("data/dataset.csv", to_text(data.raw));
      out.write("data/ground_truth.json", ground_truth_to_json(*data.truth));
    }
    if (cfg.synth || cfg.kmeans_labels) out.write("data/labels.csv", to_text(data.labels));
  });

  std::vector<EnsembleModel> ensembles;
  if (options.train) {
    for (Variant v : cfg.variants) {
      Hyperparams h = cfg.hyper;
      h.variant = v;
      h.seed = cfg.seed;
      ensembles.push_back(clock.run(std::string("train:") + to_string(v),
                                    [&] { return train_ensemble(data.train, data.labels, h); }));
      out.write(std::string("models/") + to_string(v) + ".json", ensemble_to_json(ensembles.back()));
    }
  } else {
    ensembles = options.pretrained;
  }
  if (ensembles.empty()) throw Error(Errc::config_error, "no models to evaluate");

  clock.run("evaluate", [&] {
    AccuracyReport report;
    for (const auto& ens : ensembles) {
      if (ens.k != data.labels.k) throw Error(Errc::alignment_error, "model was trained for a different k");
      report.rows.push_back(evaluate(ens, data.train, data.test, data.labels));
    }
    out.write("report/accuracy.json", report_json(report));
    out.write("report/accuracy.txt", report_table(report));
  });

  if (options.explain) {
    clock.run("explain", [&] {
      out.write_with("explain/similarity_profile.csv", [&](std::ostream& os) {
        write_similarity_csv(os, cluster_similarity_profile(data.train, data.labels), data.labels.k);
      });
      for (const auto& ens : ensembles) {
        if (ens.variant() != Variant::recurrent_baseline) write_explanations(out, cfg, data, ens);
      }
    });
  }

  manifest.files = out.entries();
  try {
    write_file_atomic(cfg.output_dir / "manifest.json", manifest_json(manifest));
  } catch (const Error& e) {
    throw Error(e.code(), std::string("manifest: ") + e.message());
  }
  return manifest;
}

}  // namespace emaattn
