#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "convlr/checkpoint.hpp"
#include "convlr/training.hpp"
#include "support.hpp"

using namespace convlr;
using ad::Tensor;

namespace {

TrainingSample sample_for(std::uint64_t seed, std::size_t n, std::size_t frames, std::size_t spokes) {
    const auto seq = generate_sequence(seed, n, frames);
    std::vector<KSpaceData> ksp;
    for (std::size_t t = 0; t < frames; ++t) {
        ksp.push_back(nudft_forward(seq.frames[t], golden_angle_trajectory(spokes, 2 * n, t * spokes)));
    }
    return make_training_sample("seq" + std::to_string(seed), seq, ksp, frames);
}

std::vector<TrainingSample> samples(std::size_t count, std::size_t n, std::size_t frames, std::size_t spokes) {
    std::vector<TrainingSample> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_for(500 + i, n, frames, spokes));
    return out;
}

ModelConfig small_model(std::size_t n, std::size_t channels) {
    ModelConfig m;
    m.image_size = n;
    m.channels = channels;
    m.lstm_layers = 1;
    m.cnns_per_block = 1;
    m.blocks = 2;
    return m;
}

TrainConfig short_run() {
    TrainConfig c;
    c.steps = 3;
    c.batch_size = 2;
    c.frames = 2;
    c.spokes = 4;
    c.early_stop = false;
    c.discriminator_channels = 2;
    c.threads = 1;
    return c;
}

}  // namespace

TEST(Adam, MatchesHandComputedUpdates) {
    ParamSet p;
    p.add("w", Tensor::parameter({2}, {1.0, -2.0}));
    Adam adam(0.1, 0.9, 0.999, 1e-8);
    const std::vector<std::vector<double>> g1{{0.5, -1.0}};
    adam.step(p, g1);
    // First step: mhat = g, vhat = g^2, so the move is lr * g / (|g| + eps).
    EXPECT_NEAR(p.get("w").values()[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p.get("w").values()[1], -2.0 + 0.1 * 1.0 / (1.0 + 1e-8), 1e-15);

    const std::vector<std::vector<double>> g2{{0.1, 0.0}};
    const double before = p.get("w").values()[0];
    adam.step(p, g2);
    const double m = (0.9 * 0.1 * 0.5 + 0.1 * 0.1) / (1 - 0.81);
    const double v = (0.999 * 0.001 * 0.25 + 0.001 * 0.01) / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p.get("w").values()[0], before - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-14);
    EXPECT_EQ(adam.steps_taken(), 2u);
    EXPECT_THROW(adam.step(p, {}), std::invalid_argument);
}

TEST(EarlyStop, PlateauNeedsTwoFullWindows) {
    EXPECT_FALSE(plateaued({1.0, 1.0, 1.0}, 2, 1e-3));
    EXPECT_TRUE(plateaued({1.0, 1.0, 1.0, 1.0}, 2, 1e-3));
    EXPECT_FALSE(plateaued({4.0, 4.0, 1.0, 1.0}, 2, 1e-3));
    EXPECT_TRUE(plateaued({4.0, 4.0, 5.0, 5.0}, 2, 1e-3));
    EXPECT_FALSE(plateaued({1.0, 1.0}, 0, 1e-3));
}

TEST(Training, SameSeedGivesBitwiseIdenticalCheckpoints) {
    const auto data = samples(3, 16, 2, 4);
    const auto cfg = short_run();
    const auto a = oracle::scratch_dir("train_a");
    const auto b = oracle::scratch_dir("train_b");
    const auto ra = train(data, small_model(16, 4), cfg, a);
    const auto rb = train(data, small_model(16, 4), cfg, b);
    EXPECT_TRUE(oracle::files_identical(a / "model.ckpt", b / "model.ckpt"));
    EXPECT_TRUE(oracle::files_identical(a / "model.disc.ckpt", b / "model.disc.ckpt"));
    ASSERT_EQ(ra.history.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ra.history[i].total, rb.history[i].total);
    EXPECT_TRUE(std::filesystem::exists(a / "train_log.jsonl"));
}

TEST(Training, ThreadCountDoesNotChangeResults) {
    const auto data = samples(3, 16, 2, 4);
    auto cfg = short_run();
    const auto one = train(data, small_model(16, 4), cfg);
    cfg.threads = 3;
    const auto three = train(data, small_model(16, 4), cfg);
    EXPECT_EQ(encode_checkpoint(one.generator), encode_checkpoint(three.generator));
}

TEST(Training, SidecarRoundTrip) {
    auto cfg = short_run();
    cfg.mask_lstm = true;
    cfg.use_initializer = false;
    cfg.squared_imse = true;
    auto model = small_model(16, 4);
    model.alpha_scale = 0.125;
    model.shared_alpha = true;
    const auto dir = oracle::scratch_dir("sidecar");
    write_checkpoint_sidecar(dir / "m.json", model, cfg, 42);
    ModelConfig m2;
    TrainConfig c2;
    read_checkpoint_sidecar(dir / "m.json", m2, c2);
    EXPECT_EQ(m2.image_size, 16u);
    EXPECT_EQ(m2.channels, 4u);
    EXPECT_EQ(m2.alpha_scale, 0.125);
    EXPECT_TRUE(m2.shared_alpha);
    EXPECT_TRUE(c2.mask_lstm);
    EXPECT_FALSE(c2.use_initializer);
    EXPECT_TRUE(c2.squared_imse);
    EXPECT_EQ(c2.frames, 2u);
}

TEST(Training, PeriodicCheckpointsAreWritten) {
    const auto data = samples(2, 16, 2, 4);
    auto cfg = short_run();
    cfg.checkpoint_every = 2;
    cfg.steps = 4;
    const auto dir = oracle::scratch_dir("periodic");
    train(data, small_model(16, 4), cfg, dir);
    EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_step000002.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_step000004.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "model.ckpt"));
}

TEST(Training, NonFiniteLossAborts) {
    auto data = samples(2, 16, 2, 4);
    for (auto& s : data) {
        s.targets[0] = Tensor::constant(s.targets[0].shape(),
                                        std::vector<double>(s.targets[0].size(), std::numeric_limits<double>::quiet_NaN()));
    }
    auto cfg = short_run();
    cfg.use_discriminator = false;
    const auto dir = oracle::scratch_dir("abort");
    try {
        train(data, small_model(16, 4), cfg, dir);
        FAIL() << "expected TrainingAborted";
    } catch (const TrainingAborted& e) {
        EXPECT_EQ(e.step(), 1u);
    }
    EXPECT_FALSE(std::filesystem::exists(dir / "model.ckpt"));
}

TEST(Training, DisabledDiscriminatorLeavesNoAdversarialTerm) {
    const auto data = samples(2, 16, 2, 4);
    auto cfg = short_run();
    cfg.use_discriminator = false;
    const auto r = train(data, small_model(16, 4), cfg);
    EXPECT_EQ(r.discriminator.size(), 0u);
    for (const auto& h : r.history) {
        EXPECT_EQ(h.gen, 0.0);
        EXPECT_EQ(h.discriminator, 0.0);
        EXPECT_NEAR(h.total, 60.0 * h.imse + 30.0 * h.fmse + 0.01 * h.perceptual, 1e-9 * h.total);
    }
}

TEST(Training, RejectsMismatchedSequences) {
    const auto data = samples(1, 16, 2, 4);
    auto cfg = short_run();
    cfg.frames = 3;
    EXPECT_THROW(train(data, small_model(16, 4), cfg), std::invalid_argument);
    EXPECT_THROW(train(data, small_model(32, 4), short_run()), std::invalid_argument);
    EXPECT_THROW(train({}, small_model(16, 4), short_run()), std::invalid_argument);
}

TEST(TrainingSlow, OverfitsTenSequences) {
    const auto data = samples(10, 32, 2, 8);
    auto cfg = short_run();
    cfg.steps = 300;
    cfg.batch_size = 2;
    cfg.spokes = 8;
    cfg.lr_generator = 1e-3;
    cfg.lr_discriminator = 1e-3;
    const auto r = train(data, small_model(32, 8), cfg);
    ASSERT_EQ(r.history.size(), 300u);
    auto mean_imse = [&](std::size_t from, std::size_t to) {
        double s = 0.0;
        for (std::size_t i = from; i < to; ++i) s += r.history[i].imse;
        return s / static_cast<double>(to - from);
    };
    const double early = mean_imse(0, 10);
    const double late = mean_imse(290, 300);
    EXPECT_LE(late, 0.5 * early) << "early " << early << " late " << late;
}
