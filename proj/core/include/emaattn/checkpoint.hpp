#pragma once

// JSON checkpoints for trained models. Doubles use the shortest round-trip
// representation, so save followed by load is bit-exact.

#include "emaattn/ensemble.hpp"
#include "emaattn/model.hpp"

#include <filesystem>
#include <string>

namespace emaattn {

inline constexpr int kCheckpointVersion = 1;

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);  // throws Errc::checkpoint_error

std::string ensemble_to_json(const EnsembleModel& ens);
EnsembleModel ensemble_from_json(const std::string& text);

void save_ensemble(const std::filesystem::path& path, const EnsembleModel& ens);
EnsembleModel load_ensemble(const std::filesystem::path& path);

}  // namespace emaattn
