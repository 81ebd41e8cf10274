#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "convlr/baseline.hpp"
#include "convlr/metrics.hpp"
#include "convlr/network.hpp"
#include "convlr/simdata.hpp"
#include "convlr/training.hpp"
#include "json.hpp"

namespace convlr {

struct EvaluationConfig {
    std::vector<std::string> methods{"convlr", "grasp", "regrid"};
    std::vector<std::size_t> spokes{4, 8, 16, 32};
    std::vector<std::size_t> frame_counts{5};
    std::string split = "test";
    MetricOptions metrics{};
};

/// Everything a run needs, read from one JSON file with a format_version field.
struct ExperimentConfig {
    int format_version = 1;
    DatasetConfig dataset{};
    ModelConfig model{};
    TrainConfig training{};
    GraspConfig grasp{};
    EvaluationConfig evaluation{};

    /// Cross-section checks (sizes agree, spoke counts exist in the dataset, ...).
    void validate() const;
};

nlohmann::json dataset_config_to_json(const DatasetConfig& cfg);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);
nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json grasp_config_to_json(const GraspConfig& cfg);
GraspConfig grasp_config_from_json(const nlohmann::json& j);

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& cfg);

}  // namespace convlr
