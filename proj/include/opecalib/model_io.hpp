#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "json.hpp"
#include "opecalib/provenance.hpp"
#include "opecalib/trajectory.hpp"

namespace opecalib {

// JSON container for fitted behaviour models: a "kind" tag (knn, approx_knn,
// softmax_linear, mlp), the hyperparameters including the seed, and either
// the learned parameters or the training pairs the model indexes. Loading
// rebuilds a model with identical predictions.
nlohmann::ordered_json model_to_json(const PolicyModel& model);
std::unique_ptr<PolicyModel> model_from_json(const nlohmann::json& j);

void save_model(const PolicyModel& model, const std::filesystem::path& path,
                const std::optional<Provenance>& provenance = std::nullopt);
std::unique_ptr<PolicyModel> load_model(const std::filesystem::path& path);

}  // namespace opecalib
