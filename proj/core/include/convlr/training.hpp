#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "convlr/checkpoint.hpp"
#include "convlr/losses.hpp"
#include "convlr/network.hpp"
#include "convlr/simdata.hpp"

namespace convlr {

struct TrainConfig {
    double lr_generator = 1e-4;
    double lr_discriminator = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 4;
    std::size_t steps = 1000;
    std::uint64_t seed = 7;
    std::size_t frames = 5;  // T
    std::size_t spokes = 8;
    bool use_discriminator = true;
    bool use_initializer = true;
    bool mask_lstm = false;
    bool squared_imse = false;
    LossWeights weights{};
    std::size_t discriminator_channels = 8;
    std::size_t checkpoint_every = 0;  // 0: final checkpoint only
    bool early_stop = true;
    std::size_t early_stop_window = 100;
    double early_stop_tolerance = 1e-3;
    std::size_t threads = 0;  // 0: CONVLR_THREADS or 1

    void validate() const;
};

/// One training sequence with its fixed network inputs precomputed.
struct TrainingSample {
    std::string id;
    ad::Tensor reference;            // [2,H,W]
    std::vector<FrameInput> frames;  // T frames
    std::vector<ad::Tensor> targets; // T ground-truth frames, [2,H,W]
};

TrainingSample make_training_sample(const std::string& id, const FrameSequence& seq,
                                    const std::vector<KSpaceData>& kspace, std::size_t frames);

/// Loads `ids` from a dataset directory at the given spoke count and frame count.
std::vector<TrainingSample> load_training_samples(const std::filesystem::path& dataset_dir,
                                                  const std::vector<std::string>& ids, std::size_t spokes,
                                                  std::size_t frames, std::size_t threads = 1);

class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps);
    /// params[i] -= lr * mhat / (sqrt(vhat) + eps) with grads aligned to params.entries().
    void step(ParamSet& params, const std::vector<std::vector<double>>& grads);
    std::size_t steps_taken() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Generator loss parts for one sequence, averaged over frames. `d_params`
/// may be empty when the discriminator is disabled.
LossParts sequence_loss_parts(const TrainingSample& sample, const std::vector<ad::Tensor>& outputs,
                              const ParamSet* d_params, const DiscriminatorConfig& dcfg,
                              const PerceptualFeatures& features, bool squared_imse);

struct StepRecord {
    std::size_t step = 0;
    double total = 0.0;
    double imse = 0.0;
    double fmse = 0.0;
    double perceptual = 0.0;
    double gen = 0.0;
    double discriminator = 0.0;
};

struct TrainResult {
    ParamSet generator;
    ParamSet discriminator;
    ModelConfig model;  // with alpha_scale resolved
    std::vector<StepRecord> history;
    std::size_t steps_run = 0;
    bool early_stopped = false;
};

class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(std::size_t step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Alternating discriminator / generator updates over `samples`. When
/// `out_dir` is non-empty, writes train_log.jsonl, periodic checkpoints and
/// the final model.ckpt / model.json there.
TrainResult train(const std::vector<TrainingSample>& samples, ModelConfig model, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir = {});

/// Moving-average plateau test over the last two windows of `totals`.
bool plateaued(const std::vector<double>& totals, std::size_t window, double tolerance);

/// JSON sidecar written next to every checkpoint.
void write_checkpoint_sidecar(const std::filesystem::path& path, const ModelConfig& model, const TrainConfig& cfg,
                              std::size_t step);
/// Reads model config and training flags back from a sidecar.
void read_checkpoint_sidecar(const std::filesystem::path& path, ModelConfig& model, TrainConfig& cfg);

}  // namespace convlr
