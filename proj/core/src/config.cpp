#include "emaattn/config.hpp"

#include "emaattn/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace emaattn {
namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"data", {"dataset", "labels", "k", "normalization", "t_cap", "kmeans_labels"}},
      {"synth",
       {"enabled", "n_per_cluster", "cluster_sizes", "v", "t_min", "t_max", "likert_levels", "noise_sd", "signal",
        "amplitude", "seed"}},
      {"model", {"d_k", "d_f", "hidden", "lr", "weight_decay", "epochs", "class_weighting"}},
      {"pipeline", {"split", "output_dir", "variants", "seed"}},
      {"explain", {"axis", "correlation", "scatter_feature", "interaction_a", "interaction_b", "summaries_per_cluster"}},
      {"plots", {"correlation_bars", "heatmaps", "scatter", "summaries"}},
  };
  return keys;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  template <class T>
  T get(const std::string& key, T fallback) const {
    const auto node = tree_.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node) return fallback;
    const auto value = node->get_value_optional<T>();
    if (!value) throw Error(Errc::config_error, "bad value for " + key + ": '" + node->data() + "'");
    return *value;
  }

  bool has(const std::string& key) const { return tree_.get_child_optional(pt::ptree::path_type(key, '.')).has_value(); }

  std::string text(const std::string& key, const std::string& fallback = {}) const {
    return get<std::string>(key, fallback);
  }

  // Parser functions throw Errc::invalid_argument on an unknown name; report
  // those against the key that carried them.
  template <class F>
  auto named(const std::string& key, const std::string& fallback, F parse) const {
    const std::string value = text(key, fallback);
    try {
      return parse(value);
    } catch (const Error&) {
      throw Error(Errc::config_error, "bad value for " + key + ": '" + value + "'");
    }
  }

 private:
  const pt::ptree& tree_;
};

void reject_unknown(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw Error(Errc::config_error, "unknown section [" + section + "]");
    for (const auto& [key, _] : body) {
      if (!it->second.count(key)) throw Error(Errc::config_error, "unknown key " + section + "." + key);
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(Errc::config_error, std::string("cannot parse config: ") + e.what());
  }
  reject_unknown(tree);
  const Reader r(tree);
  PipelineConfig cfg;

  cfg.dataset = resolve(base_dir, r.text("data.dataset"));
  cfg.labels = resolve(base_dir, r.text("data.labels"));
  cfg.k = r.get("data.k", cfg.k);
  cfg.normalization = r.named("data.normalization", "min_max", parse_normalization);
  if (r.has("data.t_cap")) cfg.t_cap = r.get("data.t_cap", 0);
  cfg.kmeans_labels = r.get("data.kmeans_labels", false);

  if (r.get("synth.enabled", false)) {
    SynthBlock s;
    s.config.k = cfg.k;
    s.config.n_per_cluster = r.get("synth.n_per_cluster", s.config.n_per_cluster);
    for (const auto& item : split_list(r.text("synth.cluster_sizes"))) {
      try {
        s.config.cluster_sizes.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw Error(Errc::config_error, "bad value in synth.cluster_sizes: '" + item + "'");
      }
    }
    s.config.v = r.get("synth.v", s.config.v);
    s.config.t_min = r.get("synth.t_min", s.config.t_min);
    s.config.t_max = r.get("synth.t_max", s.config.t_max);
    s.config.likert_levels = r.get("synth.likert_levels", s.config.likert_levels);
    s.config.noise_sd = r.get("synth.noise_sd", s.config.noise_sd);
    if (r.has("synth.seed")) s.seed = r.get<std::uint64_t>("synth.seed", 0);
    s.kind = r.named("synth.signal", "mean_shift", parse_signal_kind);
    s.amplitude = r.get("synth.amplitude", s.amplitude);
    cfg.synth = s;
  }

  cfg.hyper.d_k = r.get("model.d_k", cfg.hyper.d_k);
  cfg.hyper.d_f = r.get("model.d_f", cfg.hyper.d_f);
  cfg.hyper.hidden = r.get("model.hidden", cfg.hyper.hidden);
  cfg.hyper.lr = r.get("model.lr", cfg.hyper.lr);
  cfg.hyper.weight_decay = r.get("model.weight_decay", cfg.hyper.weight_decay);
  cfg.hyper.epochs = r.get("model.epochs", cfg.hyper.epochs);
  cfg.hyper.class_weighting = r.named("model.class_weighting", "none", parse_class_weighting);

  cfg.split = r.get("pipeline.split", cfg.split);
  cfg.output_dir = resolve(base_dir, r.text("pipeline.output_dir", cfg.output_dir.string()));
  if (r.has("pipeline.variants")) {
    cfg.variants.clear();
    for (const auto& name : split_list(r.text("pipeline.variants"))) {
      try {
        cfg.variants.push_back(parse_variant(name));
      } catch (const Error&) {
        throw Error(Errc::config_error, "unknown variant '" + name + "'");
      }
    }
  }
  cfg.seed = r.get<std::uint64_t>("pipeline.seed", cfg.seed);

  cfg.explain.axis = r.named("explain.axis", "received", parse_averaging_axis);
  cfg.explain.correlation = r.named("explain.correlation", "pearson", parse_correlation_kind);
  cfg.scatter_feature = r.get("explain.scatter_feature", cfg.scatter_feature);
  cfg.interaction_a = r.get("explain.interaction_a", cfg.interaction_a);
  cfg.interaction_b = r.get("explain.interaction_b", cfg.interaction_b);
  cfg.summaries_per_cluster = r.get("explain.summaries_per_cluster", cfg.summaries_per_cluster);

  cfg.plots.correlation_bars = r.get("plots.correlation_bars", true);
  cfg.plots.heatmaps = r.get("plots.heatmaps", true);
  cfg.plots.scatter = r.get("plots.scatter", true);
  cfg.plots.summaries = r.get("plots.summaries", true);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

void validate_config(const PipelineConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(Errc::config_error, msg); };
  if (!(cfg.split > 0.0 && cfg.split < 1.0)) fail("pipeline.split must lie in (0, 1)");
  if (cfg.k < 2) fail("data.k must be at least 2");
  if (cfg.variants.empty()) fail("pipeline.variants is empty");
  if (cfg.hyper.epochs < 1) fail("model.epochs must be positive");
  if (!(cfg.hyper.lr > 0.0)) fail("model.lr must be positive");
  if (!(cfg.hyper.weight_decay >= 0.0)) fail("model.weight_decay must be non-negative");
  if (cfg.hyper.d_k < 1 || cfg.hyper.d_f < 1 || cfg.hyper.hidden < 1) fail("model widths must be positive");
  if (cfg.summaries_per_cluster < 0) fail("explain.summaries_per_cluster must be non-negative");
  if (cfg.t_cap && *cfg.t_cap < 1) fail("data.t_cap must be positive");
  if (cfg.output_dir.empty()) fail("pipeline.output_dir is empty");
  if (cfg.synth) return;
  if (cfg.dataset.empty()) fail("data.dataset is required without an enabled [synth] section");
  if (!std::filesystem::is_regular_file(cfg.dataset)) fail("dataset not found: " + cfg.dataset.string());
  if (cfg.kmeans_labels) return;
  if (cfg.labels.empty()) fail("data.labels is required without [synth] or data.kmeans_labels");
  if (!std::filesystem::is_regular_file(cfg.labels)) fail("labels not found: " + cfg.labels.string());
}

std::string canonical_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "data.dataset=" << cfg.dataset.generic_string() << '\n'
      << "data.labels=" << cfg.labels.generic_string() << '\n'
      << "data.k=" << cfg.k << '\n'
      << "data.normalization="
      << (cfg.normalization == Normalization::min_max   ? "min_max"
          : cfg.normalization == Normalization::z_score ? "z_score"
                                                        : "none")
      << '\n'
      << "data.t_cap=" << (cfg.t_cap ? std::to_string(*cfg.t_cap) : "none") << '\n'
      << "data.kmeans_labels=" << cfg.kmeans_labels << '\n';
  if (cfg.synth) {
    const auto& s = cfg.synth->config;
    out << "synth.n_per_cluster=" << s.n_per_cluster << "\nsynth.cluster_sizes=";
    for (std::size_t i = 0; i < s.cluster_sizes.size(); ++i) out << (i ? "," : "") << s.cluster_sizes[i];
    out << "\nsynth.v=" << s.v << "\nsynth.t_min=" << s.t_min << "\nsynth.t_max=" << s.t_max
        << "\nsynth.likert_levels=" << s.likert_levels << "\nsynth.noise_sd=" << s.noise_sd
        << "\nsynth.seed=" << (cfg.synth->seed ? std::to_string(*cfg.synth->seed) : "pipeline")
        << "\nsynth.signal=" << to_string(cfg.synth->kind)
        << "\nsynth.amplitude=" << cfg.synth->amplitude << '\n';
  }
  out << "model.d_k=" << cfg.hyper.d_k << "\nmodel.d_f=" << cfg.hyper.d_f << "\nmodel.hidden=" << cfg.hyper.hidden
      << "\nmodel.lr=" << cfg.hyper.lr << "\nmodel.weight_decay=" << cfg.hyper.weight_decay << "\nmodel.epochs=" << cfg.hyper.epochs
      << "\nmodel.class_weighting=" << to_string(cfg.hyper.class_weighting) << "\npipeline.split=" << cfg.split
      << "\npipeline.variants=";
  for (std::size_t i = 0; i < cfg.variants.size(); ++i) out << (i ? "," : "") << to_string(cfg.variants[i]);
  out << "\npipeline.seed=" << cfg.seed
      << "\nexplain.axis=" << (cfg.explain.axis == AveragingAxis::received ? "received" : "given")
      << "\nexplain.correlation=" << (cfg.explain.correlation == CorrelationKind::pearson ? "pearson" : "spearman")
      << "\nexplain.scatter_feature=" << cfg.scatter_feature << "\nexplain.interaction_a=" << cfg.interaction_a
      << "\nexplain.interaction_b=" << cfg.interaction_b
      << "\nexplain.summaries_per_cluster=" << cfg.summaries_per_cluster
      << "\nplots=" << cfg.plots.correlation_bars << cfg.plots.heatmaps << cfg.plots.scatter << cfg.plots.summaries
      << '\n';
  return out.str();
}

}  // namespace emaattn
