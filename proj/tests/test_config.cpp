#include <gtest/gtest.h>

#include <fstream>

#include "convlr/config.hpp"
#include "support.hpp"

using namespace convlr;

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(ExperimentConfig{}.validate()); }

TEST(Config, JsonRoundTripPreservesEveryField) {
    ExperimentConfig c;
    c.dataset.image_size = 16;
    c.dataset.spokes = {4, 12};
    c.dataset.noise_std = 0.03;
    c.model.image_size = 16;
    c.model.channels = 6;
    c.model.shared_alpha = true;
    c.training.steps = 17;
    c.training.spokes = 12;
    c.training.mask_lstm = true;
    c.training.weights.perceptual = 0.5;
    c.grasp.lambda = 0.25;
    c.grasp.step_rule = StepRule::fixed;
    c.evaluation.methods = {"regrid"};
    c.evaluation.spokes = {4};
    c.evaluation.frame_counts = {3};
    c.evaluation.metrics.squared_nmse = true;
    const auto j = experiment_config_to_json(c);
    const auto back = experiment_config_from_json(j);
    EXPECT_EQ(experiment_config_to_json(back), j);
    EXPECT_EQ(back.training.spokes, 12u);
    EXPECT_EQ(back.grasp.step_rule, StepRule::fixed);
    EXPECT_TRUE(back.model.shared_alpha);

    const auto dir = oracle::scratch_dir("config");
    save_experiment_config(dir / "c.json", c);
    EXPECT_EQ(experiment_config_to_json(load_experiment_config(dir / "c.json")), j);
}

TEST(Config, MissingKeysKeepDefaults) {
    const auto c = experiment_config_from_json(nlohmann::json{{"format_version", 1}, {"training", {{"steps", 5}}}});
    EXPECT_EQ(c.training.steps, 5u);
    EXPECT_EQ(c.training.batch_size, TrainConfig{}.batch_size);
    EXPECT_EQ(c.model.channels, ModelConfig{}.channels);
}

TEST(Config, RejectsUnknownKeysAndVersions) {
    EXPECT_THROW(experiment_config_from_json(nlohmann::json{{"format_version", 1}, {"trainig", nlohmann::json::object()}}),
                 std::invalid_argument);
    EXPECT_THROW(experiment_config_from_json(nlohmann::json{{"training", {{"stepz", 5}}}}), std::invalid_argument);
    EXPECT_THROW(experiment_config_from_json(nlohmann::json{{"format_version", 2}}), std::invalid_argument);
    const auto dir = oracle::scratch_dir("config_bad");
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(load_experiment_config(dir / "bad.json"), std::invalid_argument);
    EXPECT_THROW(load_experiment_config(dir / "missing.json"), std::invalid_argument);
}

TEST(Config, CrossSectionChecks) {
    ExperimentConfig c;
    c.model.image_size = 16;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.training.spokes = 7;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.evaluation.frame_counts = {c.dataset.frames + 1};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = ExperimentConfig{};
    c.evaluation.methods = {"magic"};
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
