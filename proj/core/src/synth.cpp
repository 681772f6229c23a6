#include "emaattn/synth.hpp"

#include "emaattn/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

namespace emaattn {

const char* to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::mean_shift: return "mean_shift";
    case SignalKind::oscillation: return "oscillation";
    case SignalKind::anti_correlated_pair: return "anti_correlated_pair";
  }
  return "mean_shift";
}

SignalKind parse_signal_kind(const std::string& name) {
  if (name == "mean_shift") return SignalKind::mean_shift;
  if (name == "oscillation") return SignalKind::oscillation;
  if (name == "anti_correlated_pair") return SignalKind::anti_correlated_pair;
  throw Error(Errc::config_error, "unknown signal kind '" + name + "'");
}

int SynthConfig::size_of(int cluster) const {
  if (cluster_sizes.empty()) return n_per_cluster;
  return cluster_sizes.at(static_cast<std::size_t>(cluster));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GroundTruthSpec default_ground_truth(int k, int v, SignalKind kind, double amplitude) {
  if (k < 2) throw Error(Errc::invalid_k, "default_ground_truth: k must be >= 2");
  if (v < 2) throw Error(Errc::invalid_argument, "default_ground_truth: v must be >= 2");
  GroundTruthSpec spec;
  const double lo = 0.05;
  const double hi = 0.65;
  const double width = (hi - lo) / k;
  for (int c = 0; c < k; ++c) {
    ClusterSignal sig;
    sig.kind = kind;
    sig.amplitude = amplitude;
    if (kind == SignalKind::anti_correlated_pair) {
      sig.features = {(2 * c) % v, (2 * c + 1) % v};
    } else {
      sig.features = {c % v};
    }
    sig.windows = {{lo + c * width, lo + (c + 1) * width}};
    spec.clusters.push_back(std::move(sig));
  }
  return spec;
}

namespace {

void check_inputs(const SynthConfig& cfg, const GroundTruthSpec& spec) {
  if (cfg.k < 2) throw Error(Errc::invalid_k, "synth: k must be >= 2");
  if (cfg.v < 2) throw Error(Errc::invalid_argument, "synth: v must be >= 2");
  if (cfg.t_min < 8 || cfg.t_max > 4096 || cfg.t_min > cfg.t_max) {
    throw Error(Errc::invalid_argument, "synth: t_range must satisfy 8 <= t_min <= t_max <= 4096");
  }
  if (cfg.likert_levels < 2) throw Error(Errc::invalid_argument, "synth: likert_levels must be >= 2");
  if (!(cfg.noise_sd >= 0.0)) throw Error(Errc::invalid_argument, "synth: noise_sd must be >= 0");
  if (!cfg.cluster_sizes.empty() && static_cast<int>(cfg.cluster_sizes.size()) != cfg.k) {
    throw Error(Errc::invalid_argument, "synth: cluster_sizes must have k entries");
  }
  for (int c = 0; c < cfg.k; ++c) {
    if (cfg.size_of(c) < 1) throw Error(Errc::invalid_argument, "synth: every cluster needs >= 1 member");
  }
  if (static_cast<int>(spec.clusters.size()) != cfg.k) {
    throw Error(Errc::spec_cluster_mismatch, "ground truth describes " + std::to_string(spec.clusters.size()) +
                                                 " clusters, config has k=" + std::to_string(cfg.k));
  }
  for (const auto& sig : spec.clusters) {
    if (sig.features.empty()) throw Error(Errc::spec_cluster_mismatch, "cluster signal without features");
    if (sig.kind == SignalKind::anti_correlated_pair && sig.features.size() < 2) {
      throw Error(Errc::spec_cluster_mismatch, "anti_correlated_pair needs two features");
    }
    for (int f : sig.features) {
      if (f < 0 || f >= cfg.v) throw Error(Errc::spec_cluster_mismatch, "signal feature index out of range");
    }
    if (sig.windows.empty()) throw Error(Errc::spec_cluster_mismatch, "cluster signal without windows");
    for (auto [s, e] : sig.windows) {
      if (!(s >= 0.0 && e <= 1.0 && s < e)) throw Error(Errc::spec_cluster_mismatch, "degenerate signal window");
    }
  }
}

Matrix baseline(const SynthConfig& cfg, int t_len, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innov = std::sqrt(1.0 - kBaselineAr * kBaselineAr);
  const double levels = cfg.likert_levels - 1;
  Matrix x(cfg.v, t_len);
  for (int f = 0; f < cfg.v; ++f) {
    double z = normal(rng);
    for (int t = 0; t < t_len; ++t) {
      if (t > 0) z = kBaselineAr * z + innov * normal(rng);
      const double raw = std::clamp(0.5 + cfg.noise_sd * z, 0.0, 1.0);
      x(f, t) = std::round(raw * levels) / levels;
    }
  }
  return x;
}

void inject(Matrix& x, const ClusterSignal& sig) {
  const int t_len = static_cast<int>(x.cols());
  for (auto [s, e] : sig.windows) {
    const int start = static_cast<int>(std::ceil(s * t_len));
    const int end = std::min(t_len, static_cast<int>(std::ceil(e * t_len)));
    for (int t = start; t < end; ++t) {
      switch (sig.kind) {
        case SignalKind::mean_shift:
          for (int f : sig.features) x(f, t) += sig.amplitude;
          break;
        case SignalKind::oscillation: {
          // one cycle per 8 time-points
          const double phase = 2.0 * std::numbers::pi * (t - start) / 8.0;
          for (int f : sig.features) x(f, t) += sig.amplitude * std::sin(phase);
          break;
        }
        case SignalKind::anti_correlated_pair:
          x(sig.features[0], t) -= sig.amplitude;
          x(sig.features[1], t) += sig.amplitude;
          break;
      }
    }
  }
  x = x.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

SynthResult generate(const SynthConfig& config, const GroundTruthSpec& spec) {
  check_inputs(config, spec);
  SynthResult out;
  out.truth = spec;
  out.labels.k = config.k;
  for (int f = 0; f < config.v; ++f) out.dataset.feature_names.push_back("f" + std::to_string(f));

  std::uint64_t index = 0;
  for (int c = 0; c < config.k; ++c) {
    for (int n = 0; n < config.size_of(c); ++n, ++index) {
      std::mt19937_64 rng(mix_seed(config.seed, index));
      std::uniform_int_distribution<int> length(config.t_min, config.t_max);
      const int t_len = length(rng);
      Matrix x = baseline(config, t_len, rng);
      inject(x, spec.clusters[static_cast<std::size_t>(c)]);

      char id[32];
      std::snprintf(id, sizeof id, "ind%04llu", static_cast<unsigned long long>(index));
      out.dataset.individuals.push_back({id, std::move(x)});
      out.labels.assignment.emplace(id, c);
    }
  }
  return out;
}

std::string ground_truth_to_json(const GroundTruthSpec& spec) {
  nlohmann::json doc;
  doc["clusters"] = nlohmann::json::array();
  for (const auto& sig : spec.clusters) {
    nlohmann::json w = nlohmann::json::array();
    for (auto [s, e] : sig.windows) w.push_back({s, e});
    doc["clusters"].push_back({{"discriminative_features", sig.features},
                               {"signal_windows", w},
                               {"signal_kind", to_string(sig.kind)},
                               {"amplitude", sig.amplitude}});
  }
  return doc.dump(2);
}

GroundTruthSpec ground_truth_from_json(const std::string& text) {
  GroundTruthSpec spec;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& c : doc.at("clusters")) {
      ClusterSignal sig;
      sig.features = c.at("discriminative_features").get<std::vector<int>>();
      for (const auto& w : c.at("signal_windows")) sig.windows.emplace_back(w.at(0).get<double>(), w.at(1).get<double>());
      sig.kind = parse_signal_kind(c.at("signal_kind").get<std::string>());
      sig.amplitude = c.value("amplitude", 0.3);
      spec.clusters.push_back(std::move(sig));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_error, std::string("ground truth json: ") + e.what());
  }
  return spec;
}

ClusterLabels kmeans_labels(const PaddedDataset& pd, int k, std::uint64_t seed) {
  if (k < 2) throw Error(Errc::invalid_k, "kmeans: k must be >= 2");
  const std::size_t n = pd.size();
  if (static_cast<std::size_t>(k) > n) {
    throw Error(Errc::k_too_large, "kmeans: k=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
  }
  std::vector<Vector> points;
  for (std::size_t i = 0; i < n; ++i) points.push_back(pd.observed(i).rowwise().mean());

  std::mt19937_64 rng(seed);
  std::vector<Vector> centers;
  std::vector<bool> chosen(n, false);
  {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t first = pick(rng);
    centers.push_back(points[first]);
    chosen[first] = true;
  }
  while (static_cast<int>(centers.size()) < k) {
    std::vector<double> d2(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = chosen[i] ? 0.0 : best;
      total += d2[i];
    }
    std::size_t next = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double target = u(rng);
      double acc = 0.0;
      next = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        acc += d2[i];
        next = i;
        if (acc >= target) break;
      }
    } else {
      // duplicates only: take the first unused point
      while (chosen[next]) ++next;
    }
    centers.push_back(points[next]);
    chosen[next] = true;
  }

  std::vector<int> assign(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points[i] - centers[0]).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points[i] - centers[static_cast<std::size_t>(c)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    // Re-seed empty clusters with the point farthest from its centroid.
    for (int c = 0; c < k; ++c) {
      if (std::find(assign.begin(), assign.end(), c) != assign.end()) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(assign[i]);
        if (std::count(assign.begin(), assign.end(), assign[i]) < 2) continue;
        const double d = (points[i] - centers[own]).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      assign[far] = c;
      changed = true;
    }
    for (int c = 0; c < k; ++c) {
      Vector sum = Vector::Zero(pd.v());
      int count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == c) {
          sum += points[i];
          ++count;
        }
      }
      centers[static_cast<std::size_t>(c)] = sum / count;
    }
    if (!changed) break;
  }

  ClusterLabels labels;
  labels.k = k;
  for (std::size_t i = 0; i < n; ++i) labels.assignment.emplace(pd.ids[i], assign[i]);
  return labels;
}

}  // namespace emaattn
