#include "convlr/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace convlr {

namespace {

using nlohmann::json;

// Reads keys out of one JSON object and complains about anything left over.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw std::invalid_argument("config: section '" + name_ + "' must be an object");
    }

    template <typename T>
    void read(const char* key, T& target) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            target = it->get<T>();
        } catch (const json::exception& e) {
            throw std::invalid_argument("config: " + name_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw std::invalid_argument("config: unknown key " + name_ + "." + it.key());
        }
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

}  // namespace

json dataset_config_to_json(const DatasetConfig& c) {
    return {{"image_size", c.image_size},
            {"frames", c.frames},
            {"n_train", c.n_train},
            {"n_val", c.n_val},
            {"n_test", c.n_test},
            {"train_seed_start", c.train_seed_start},
            {"val_seed_start", c.val_seed_start},
            {"test_seed_start", c.test_seed_start},
            {"spokes", c.spokes},
            {"n_readout", c.readout()},
            {"noise_std", c.noise_std},
            {"continue_angles", c.continue_angles},
            {"augment", c.augment},
            {"max_rotation_deg", c.augmentation.max_rotation_deg},
            {"max_shift_px", c.augmentation.max_shift_px},
            {"max_attempts", c.augmentation.max_attempts},
            {"feature_width", c.intervention.width},
            {"feature_intensity", c.intervention.intensity_scale},
            {"step_min", c.intervention.step_min},
            {"step_max", c.intervention.step_max},
            {"roi_margin", c.intervention.roi_margin}};
}

DatasetConfig dataset_config_from_json(const json& j) {
    DatasetConfig c;
    Section s(j, "dataset");
    s.read("image_size", c.image_size);
    s.read("frames", c.frames);
    s.read("n_train", c.n_train);
    s.read("n_val", c.n_val);
    s.read("n_test", c.n_test);
    s.read("train_seed_start", c.train_seed_start);
    s.read("val_seed_start", c.val_seed_start);
    s.read("test_seed_start", c.test_seed_start);
    s.read("spokes", c.spokes);
    s.read("n_readout", c.n_readout);
    s.read("noise_std", c.noise_std);
    s.read("continue_angles", c.continue_angles);
    s.read("augment", c.augment);
    s.read("max_rotation_deg", c.augmentation.max_rotation_deg);
    s.read("max_shift_px", c.augmentation.max_shift_px);
    s.read("max_attempts", c.augmentation.max_attempts);
    s.read("feature_width", c.intervention.width);
    s.read("feature_intensity", c.intervention.intensity_scale);
    s.read("step_min", c.intervention.step_min);
    s.read("step_max", c.intervention.step_max);
    s.read("roi_margin", c.intervention.roi_margin);
    s.finish();
    return c;
}

json model_config_to_json(const ModelConfig& c) {
    return {{"image_size", c.image_size},   {"channels", c.channels},       {"lstm_layers", c.lstm_layers},
            {"cnns_per_block", c.cnns_per_block}, {"blocks", c.blocks},     {"kernel", c.kernel},
            {"init_seed", c.init_seed},     {"alpha_init", c.alpha_init},   {"alpha_scale", c.alpha_scale},
            {"shared_alpha", c.shared_alpha}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    Section s(j, "model");
    s.read("image_size", c.image_size);
    s.read("channels", c.channels);
    s.read("lstm_layers", c.lstm_layers);
    s.read("cnns_per_block", c.cnns_per_block);
    s.read("blocks", c.blocks);
    s.read("kernel", c.kernel);
    s.read("init_seed", c.init_seed);
    s.read("alpha_init", c.alpha_init);
    s.read("alpha_scale", c.alpha_scale);
    s.read("shared_alpha", c.shared_alpha);
    s.finish();
    return c;
}

json train_config_to_json(const TrainConfig& c) {
    return {{"lr_generator", c.lr_generator},
            {"lr_discriminator", c.lr_discriminator},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"batch_size", c.batch_size},
            {"steps", c.steps},
            {"seed", c.seed},
            {"frames", c.frames},
            {"spokes", c.spokes},
            {"use_discriminator", c.use_discriminator},
            {"use_initializer", c.use_initializer},
            {"mask_lstm", c.mask_lstm},
            {"squared_imse", c.squared_imse},
            {"weight_image", c.weights.image},
            {"weight_frequency", c.weights.frequency},
            {"weight_perceptual", c.weights.perceptual},
            {"discriminator_channels", c.discriminator_channels},
            {"checkpoint_every", c.checkpoint_every},
            {"early_stop", c.early_stop},
            {"early_stop_window", c.early_stop_window},
            {"early_stop_tolerance", c.early_stop_tolerance},
            {"threads", c.threads}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    Section s(j, "training");
    s.read("lr_generator", c.lr_generator);
    s.read("lr_discriminator", c.lr_discriminator);
    s.read("beta1", c.beta1);
    s.read("beta2", c.beta2);
    s.read("adam_eps", c.adam_eps);
    s.read("batch_size", c.batch_size);
    s.read("steps", c.steps);
    s.read("seed", c.seed);
    s.read("frames", c.frames);
    s.read("spokes", c.spokes);
    s.read("use_discriminator", c.use_discriminator);
    s.read("use_initializer", c.use_initializer);
    s.read("mask_lstm", c.mask_lstm);
    s.read("squared_imse", c.squared_imse);
    s.read("weight_image", c.weights.image);
    s.read("weight_frequency", c.weights.frequency);
    s.read("weight_perceptual", c.weights.perceptual);
    s.read("discriminator_channels", c.discriminator_channels);
    s.read("checkpoint_every", c.checkpoint_every);
    s.read("early_stop", c.early_stop);
    s.read("early_stop_window", c.early_stop_window);
    s.read("early_stop_tolerance", c.early_stop_tolerance);
    s.read("threads", c.threads);
    s.finish();
    return c;
}

json grasp_config_to_json(const GraspConfig& c) {
    return {{"lambda", c.lambda},
            {"n_iter", c.n_iter},
            {"step_rule", c.step_rule == StepRule::fixed ? "fixed" : "backtracking"},
            {"backtrack_factor", c.backtrack_factor},
            {"max_backtracks", c.max_backtracks}};
}

GraspConfig grasp_config_from_json(const json& j) {
    GraspConfig c;
    Section s(j, "grasp");
    s.read("lambda", c.lambda);
    s.read("n_iter", c.n_iter);
    std::string rule = "backtracking";
    s.read("step_rule", rule);
    if (rule == "fixed") {
        c.step_rule = StepRule::fixed;
    } else if (rule == "backtracking") {
        c.step_rule = StepRule::backtracking;
    } else {
        throw std::invalid_argument("config: grasp.step_rule must be 'fixed' or 'backtracking'");
    }
    s.read("backtrack_factor", c.backtrack_factor);
    s.read("max_backtracks", c.max_backtracks);
    s.finish();
    return c;
}

namespace {

json evaluation_to_json(const EvaluationConfig& c) {
    return {{"methods", c.methods},
            {"spokes", c.spokes},
            {"frame_counts", c.frame_counts},
            {"split", c.split},
            {"ssim_c1", c.metrics.c1},
            {"ssim_c2", c.metrics.c2},
            {"windowed_ssim", c.metrics.windowed_ssim},
            {"ssim_window", c.metrics.ssim_window},
            {"squared_nmse", c.metrics.squared_nmse}};
}

EvaluationConfig evaluation_from_json(const json& j) {
    EvaluationConfig c;
    Section s(j, "evaluation");
    s.read("methods", c.methods);
    s.read("spokes", c.spokes);
    s.read("frame_counts", c.frame_counts);
    s.read("split", c.split);
    s.read("ssim_c1", c.metrics.c1);
    s.read("ssim_c2", c.metrics.c2);
    s.read("windowed_ssim", c.metrics.windowed_ssim);
    s.read("ssim_window", c.metrics.ssim_window);
    s.read("squared_nmse", c.metrics.squared_nmse);
    s.finish();
    return c;
}

}  // namespace

json experiment_config_to_json(const ExperimentConfig& c) {
    return {{"format_version", c.format_version},
            {"dataset", dataset_config_to_json(c.dataset)},
            {"model", model_config_to_json(c.model)},
            {"training", train_config_to_json(c.training)},
            {"grasp", grasp_config_to_json(c.grasp)},
            {"evaluation", evaluation_to_json(c.evaluation)}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig c;
    Section s(j, "config");
    s.read("format_version", c.format_version);
    if (c.format_version != 1) {
        throw std::invalid_argument("config: unsupported format_version " + std::to_string(c.format_version));
    }
    if (const auto* d = s.child("dataset")) c.dataset = dataset_config_from_json(*d);
    if (const auto* m = s.child("model")) c.model = model_config_from_json(*m);
    if (const auto* t = s.child("training")) c.training = train_config_from_json(*t);
    if (const auto* g = s.child("grasp")) c.grasp = grasp_config_from_json(*g);
    if (const auto* e = s.child("evaluation")) c.evaluation = evaluation_from_json(*e);
    s.finish();
    return c;
}

void ExperimentConfig::validate() const {
    dataset.validate();
    model.validate();
    training.validate();
    grasp.validate();
    evaluation.metrics.validate();
    if (model.image_size != dataset.image_size) {
        throw std::invalid_argument("config: model.image_size must equal dataset.image_size");
    }
    if (model.image_size % 8 != 0) {
        throw std::invalid_argument("config: image_size must be a multiple of 8 for the discriminator");
    }
    auto has_spokes = [this](std::size_t s) {
        return std::find(dataset.spokes.begin(), dataset.spokes.end(), s) != dataset.spokes.end();
    };
    if (!has_spokes(training.spokes)) {
        throw std::invalid_argument("config: training.spokes=" + std::to_string(training.spokes) +
                                    " is not among dataset.spokes");
    }
    if (training.frames > dataset.frames) {
        throw std::invalid_argument("config: training.frames exceeds dataset.frames");
    }
    if (evaluation.methods.empty() || evaluation.spokes.empty() || evaluation.frame_counts.empty()) {
        throw std::invalid_argument("config: evaluation methods, spokes and frame_counts must be non-empty");
    }
    for (const auto& m : evaluation.methods) {
        if (m != "convlr" && m != "grasp" && m != "regrid") {
            throw std::invalid_argument("config: unknown evaluation method '" + m + "'");
        }
    }
    for (auto s : evaluation.spokes) {
        if (!has_spokes(s)) {
            throw std::invalid_argument("config: evaluation spoke count " + std::to_string(s) +
                                        " is not among dataset.spokes");
        }
    }
    for (auto t : evaluation.frame_counts) {
        if (t == 0 || t > dataset.frames) {
            throw std::invalid_argument("config: evaluation frame count " + std::to_string(t) +
                                        " must lie in [1, dataset.frames]");
        }
    }
    if (evaluation.split != "train" && evaluation.split != "val" && evaluation.split != "test") {
        throw std::invalid_argument("config: evaluation.split must be train, val or test");
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    return experiment_config_from_json(j);
}

void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << experiment_config_to_json(cfg).dump(2) << "\n";
}

}  // namespace convlr
