#include "emaattn/checkpoint.hpp"

#include "emaattn/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace emaattn {
namespace {

using json = nlohmann::ordered_json;

json model_node(const TrainedModel& m) {
  const auto& shape = m.params.shape();
  json j;
  j["variant"] = to_string(m.hyper.variant);
  j["positive_cluster"] = m.positive_cluster;
  j["hyperparams"] = {{"d_k", m.hyper.d_k},
                      {"d_f", m.hyper.d_f},
                      {"hidden", m.hyper.hidden},
                      {"lr", m.hyper.lr},
                      {"weight_decay", m.hyper.weight_decay},
                      {"epochs", m.hyper.epochs},
                      {"seed", m.hyper.seed},
                      {"class_weighting", to_string(m.hyper.class_weighting)}};
  j["v"] = shape.v;
  j["feature_names"] = m.feature_names;
  json blocks = json::object();
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const auto block = static_cast<Block>(b);
    const auto& info = m.params.info(block);
    if (info.size() == 0) continue;
    const auto vals = m.params.values().subspan(info.offset, info.size());
    blocks[block_name(block)] = {{"rows", info.rows},
                                 {"cols", info.cols},
                                 {"values", std::vector<double>(vals.begin(), vals.end())}};
  }
  j["blocks"] = std::move(blocks);
  j["loss_trace"] = m.loss_trace;
  return j;
}

TrainedModel model_from_node(const json& j) {
  TrainedModel m;
  const auto& h = j.at("hyperparams");
  m.hyper.variant = parse_variant(j.at("variant").get<std::string>());
  m.hyper.d_k = h.at("d_k").get<int>();
  m.hyper.d_f = h.at("d_f").get<int>();
  m.hyper.hidden = h.at("hidden").get<int>();
  m.hyper.lr = h.at("lr").get<double>();
  m.hyper.weight_decay = h.at("weight_decay").get<double>();
  m.hyper.epochs = h.at("epochs").get<int>();
  m.hyper.seed = h.at("seed").get<std::uint64_t>();
  m.hyper.class_weighting = parse_class_weighting(h.at("class_weighting").get<std::string>());
  m.positive_cluster = j.at("positive_cluster").get<int>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.loss_trace = j.at("loss_trace").get<std::vector<double>>();

  const int v = j.at("v").get<int>();
  m.params = ModelParams(m.hyper.shape(v));
  const auto& blocks = j.at("blocks");
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const auto block = static_cast<Block>(b);
    const auto& info = m.params.info(block);
    if (info.size() == 0) {
      if (blocks.contains(block_name(block))) {
        throw Error(Errc::checkpoint_error, std::string("unexpected block ") + block_name(block));
      }
      continue;
    }
    const auto& node = blocks.at(block_name(block));
    const auto vals = node.at("values").get<std::vector<double>>();
    if (node.at("rows").get<int>() != info.rows || node.at("cols").get<int>() != info.cols ||
        vals.size() != info.size()) {
      throw Error(Errc::checkpoint_error, std::string("block ") + block_name(block) + " has the wrong shape");
    }
    std::copy(vals.begin(), vals.end(), m.params.values().begin() + static_cast<std::ptrdiff_t>(info.offset));
  }
  return m;
}

json parse_checked(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::checkpoint_error, std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version") || j["format_version"] != kCheckpointVersion) {
    throw Error(Errc::checkpoint_error, "unsupported checkpoint version");
  }
  return j;
}

template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(Errc::checkpoint_error, std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["model"] = model_node(model);
  return j.dump(1) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  const json j = parse_checked(text);
  return guarded([&] { return model_from_node(j.at("model")); });
}

std::string ensemble_to_json(const EnsembleModel& ens) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["k"] = ens.k;
  j["models"] = json::array();
  for (const auto& m : ens.models) j["models"].push_back(model_node(m));
  return j.dump(1) + "\n";
}

EnsembleModel ensemble_from_json(const std::string& text) {
  const json j = parse_checked(text);
  return guarded([&] {
    EnsembleModel ens;
    ens.k = j.at("k").get<int>();
    for (const auto& node : j.at("models")) ens.models.push_back(model_from_node(node));
    if (ens.models.empty()) throw Error(Errc::checkpoint_error, "checkpoint holds no models");
    return ens;
  });
}

void save_ensemble(const std::filesystem::path& path, const EnsembleModel& ens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << ensemble_to_json(ens);
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

EnsembleModel load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ensemble_from_json(buf.str());
}

}  // namespace emaattn
