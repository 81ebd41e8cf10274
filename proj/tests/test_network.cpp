#include <gtest/gtest.h>

#include <cmath>

#include "convlr/checkpoint.hpp"
#include "convlr/network.hpp"
#include "convlr/simdata.hpp"
#include "support.hpp"

using namespace convlr;
using ad::Tensor;

namespace {

ModelConfig tiny_model() {
    ModelConfig m;
    m.image_size = 8;
    m.channels = 2;
    m.lstm_layers = 1;
    m.cnns_per_block = 1;
    m.blocks = 2;
    m.alpha_scale = calibrate_alpha_scale(8, 4, 16);
    return m;
}

FrameInput tiny_frame(std::uint64_t seed, std::size_t t = 0) {
    const auto img = generate_reference_phantom(seed, 8);
    return prepare_frame(nudft_forward(img, golden_angle_trajectory(4, 16, 4 * t)), 8, 8);
}

Tensor random_param(ad::Shape shape, std::uint64_t seed, double scale = 1.0) {
    return Tensor::parameter(shape, oracle::random_values(ad::numel(shape), seed, scale));
}

double norm_values(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> residual(const FrameInput& f, const KSpaceData& y, std::span<const double> planes) {
    const auto ex = f.op->forward(from_two_channel(planes, 8, 8));
    std::vector<double> r;
    for (std::size_t m = 0; m < ex.size(); ++m) {
        r.push_back((ex[m] - y.samples[m]).real());
        r.push_back((ex[m] - y.samples[m]).imag());
    }
    return r;
}

}  // namespace

TEST(ConvLstmCell, ZeroParametersAndStatesGiveZero) {
    const std::size_t C = 3;
    GateParams g{Tensor::zeros({4 * C, 2, 3, 3}), Tensor::zeros({4 * C, C, 3, 3}), Tensor::zeros({4 * C})};
    const auto out = conv_lstm_cell(Tensor::constant({2, 4, 4}, oracle::random_values(32, 1)),
                                    {Tensor::zeros({C, 4, 4}), Tensor::zeros({C, 4, 4})}, g);
    for (double v : out.c.values()) EXPECT_EQ(v, 0.0);
    for (double v : out.h.values()) EXPECT_EQ(v, 0.0);
}

TEST(ConvLstmCell, SaturatedGatesKeepCellState) {
    const std::size_t C = 2;
    std::vector<double> bias(4 * C, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        bias[c] = -20.0;     // input gate closed
        bias[C + c] = 20.0;  // forget gate open
    }
    GateParams g{Tensor::constant({4 * C, 2, 3, 3}, oracle::random_values(4 * C * 18, 2, 0.1)),
                 Tensor::constant({4 * C, C, 3, 3}, oracle::random_values(4 * C * C * 9, 3, 0.1)),
                 Tensor::constant({4 * C}, bias)};
    const auto c_prev = oracle::random_values(C * 16, 4);
    const auto out = conv_lstm_cell(Tensor::constant({2, 4, 4}, oracle::random_values(32, 5)),
                                    {Tensor::constant({C, 4, 4}, c_prev), Tensor::constant({C, 4, 4}, oracle::random_values(C * 16, 6))},
                                    g);
    for (std::size_t i = 0; i < c_prev.size(); ++i) EXPECT_NEAR(out.c.values()[i], c_prev[i], 1e-8);
}

TEST(ConvLstmCell, GradientsPassFiniteDifferences) {
    const std::size_t C = 2;
    const ad::GraphBuilder f = [](const std::vector<Tensor>& l) {
        const auto s = conv_lstm_cell(l[0], {l[1], l[2]}, GateParams{l[3], l[4], l[5]});
        return ad::add(ad::sum_squares(s.c), ad::sum(s.h));
    };
    const auto r = ad::grad_check(f, {random_param({2, 4, 4}, 7), random_param({C, 4, 4}, 8), random_param({C, 4, 4}, 9),
                                      random_param({4 * C, 2, 3, 3}, 10, 0.3), random_param({4 * C, C, 3, 3}, 11, 0.3),
                                      random_param({4 * C}, 12)});
    EXPECT_LE(r.max_rel_error, 1e-4) << r.message;
}

TEST(ConvLstmCell, RejectsMismatchedGateWidth) {
    GateParams g{Tensor::zeros({6, 2, 3, 3}), Tensor::zeros({6, 2, 3, 3}), Tensor::zeros({6})};
    EXPECT_THROW(conv_lstm_cell(Tensor::zeros({2, 4, 4}), {Tensor::zeros({2, 4, 4}), Tensor::zeros({2, 4, 4})}, g),
                 std::invalid_argument);
}

TEST(Initializer, StateShapesMatchModel) {
    ModelConfig cfg;
    cfg.channels = 4;
    const auto p = init_convlr_params(cfg);
    const auto states = initializer_forward(image_tensor(generate_reference_phantom(1, 32)), p, cfg);
    ASSERT_EQ(states.size(), cfg.state_count());
    for (const auto& s : states) {
        EXPECT_EQ(s.c.shape(), (ad::Shape{4, 8, 8}));
        EXPECT_EQ(s.h.shape(), (ad::Shape{4, 8, 8}));
    }
}

TEST(Initializer, ZeroReferenceAndBiasesGiveZeroStates) {
    const auto cfg = tiny_model();
    const auto p = init_convlr_params(cfg);
    for (const auto& s : initializer_forward(image_tensor(ComplexImage(8, 8)), p, cfg)) {
        for (double v : s.c.values()) EXPECT_EQ(v, 0.0);
        for (double v : s.h.values()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Initializer, DifferentReferencesGiveDifferentStates) {
    const auto cfg = tiny_model();
    const auto p = init_convlr_params(cfg);
    const auto a = initializer_forward(image_tensor(generate_reference_phantom(1, 8)), p, cfg);
    const auto b = initializer_forward(image_tensor(generate_reference_phantom(2, 8)), p, cfg);
    double diff = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) diff += std::abs(norm_values(a[s].c.values()) - norm_values(b[s].c.values()));
    EXPECT_GT(diff, 1e-6);
}

TEST(Encoder, ShapeAndZeroResponse) {
    ModelConfig cfg;
    auto p = init_convlr_params(cfg);
    const auto z = encoder_forward(image_tensor(generate_reference_phantom(1, 32)), p, "b0.c0.", cfg);
    EXPECT_EQ(z.shape(), (ad::Shape{cfg.channels, 8, 8}));
    const auto zero = encoder_forward(Tensor::zeros({2, 32, 32}), p, "b0.c0.", cfg);
    for (double v : zero.values()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(encoder_forward(Tensor::zeros({2, 16, 16}), p, "b0.c0.", cfg), std::invalid_argument);
}

TEST(DeconvHead, ShapeAndZeroResponse) {
    ModelConfig cfg;
    auto p = init_convlr_params(cfg);
    const auto img = deconv_head(Tensor::zeros({cfg.channels, 8, 8}), p, "b0.c0.", cfg);
    EXPECT_EQ(img.shape(), (ad::Shape{2, 32, 32}));
    for (double v : img.values()) EXPECT_EQ(v, 0.0);
}

TEST(DcLayer, ZeroAlphaIsExactIdentity) {
    const auto f = tiny_frame(3);
    const auto x = Tensor::constant({2, 8, 8}, oracle::random_values(128, 1));
    const auto out = dc_soft_projection(x, f, Tensor::scalar(0.0));
    EXPECT_TRUE(std::equal(out.values().begin(), out.values().end(), x.values().begin()));
}

TEST(DcLayer, ConsistentInputIsFixedPoint) {
    const auto img = generate_reference_phantom(4, 8);
    const auto y = nudft_forward(img, golden_angle_trajectory(4, 16, 0));
    const auto f = prepare_frame(y, 8, 8);
    const auto x = image_tensor(img);
    const auto out = dc_soft_projection(x, f, Tensor::scalar(0.7 * calibrate_alpha_scale(8, 4, 16)));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out.values()[i], x.values()[i], 1e-12);
}

TEST(DcLayer, StepWithinInverseLipschitzReducesResidual) {
    const auto y = nudft_forward(generate_reference_phantom(5, 8), golden_angle_trajectory(4, 16, 0));
    const auto f = prepare_frame(y, 8, 8);
    const double alpha_max = 1.0 / oracle::power_iteration(*f.op);
    for (double frac : {0.1, 0.5, 1.0}) {
        const auto x = Tensor::constant({2, 8, 8}, oracle::random_values(128, 50));
        const auto out = dc_soft_projection(x, f, Tensor::scalar(frac * alpha_max));
        EXPECT_LE(norm_values(residual(f, y, out.values())), norm_values(residual(f, y, x.values())));
    }
}

TEST(RnnBlock, MaskedBlockIgnoresStates) {
    const auto cfg = tiny_model();
    const auto p = init_convlr_params(cfg);
    const auto f = tiny_frame(6);
    const auto x = Tensor::constant({2, 8, 8}, f.x_uni);
    std::vector<LstmState> s1 = zero_states(cfg), s2;
    for (const auto& s : s1) {
        s2.push_back({Tensor::constant(s.c.shape(), oracle::random_values(s.c.size(), 60)),
                      Tensor::constant(s.h.shape(), oracle::random_values(s.h.size(), 61))});
    }
    const auto a = rnn_block_forward(x, std::span(s1).first(1), f, p, cfg, 0, true);
    const auto b = rnn_block_forward(x, std::span(s2).first(1), f, p, cfg, 0, true);
    EXPECT_TRUE(std::equal(a.x.values().begin(), a.x.values().end(), b.x.values().begin()));
    const auto c = rnn_block_forward(x, std::span(s2).first(1), f, p, cfg, 0, false);
    EXPECT_FALSE(std::equal(a.x.values().begin(), a.x.values().end(), c.x.values().begin()));
}

TEST(RnnBlock, ZeroCnnKernelsReduceToDataConsistency) {
    const auto cfg = tiny_model();
    auto p = init_convlr_params(cfg);
    for (auto& e : p.entries()) {
        if (e.name.find("dec2") != std::string::npos) {
            for (auto& v : e.tensor.mutable_values()) v = 0.0;
        }
    }
    const auto f = tiny_frame(7);
    const auto x = Tensor::constant({2, 8, 8}, f.x_uni);
    const auto states = zero_states(cfg);
    const auto r = rnn_block_forward(x, std::span(states).first(1), f, p, cfg, 0, false);
    const auto dc = dc_soft_projection(x, f, block_alpha(p, cfg, 0));
    for (std::size_t i = 0; i < dc.size(); ++i) EXPECT_EQ(r.x.values()[i], dc.values()[i]);
}

TEST(RnnBlock, GradientsPassFiniteDifferences) {
    const auto cfg = tiny_model();
    const auto params = init_convlr_params(cfg);
    const auto f = tiny_frame(8);
    // Jitter away from zero biases so no probe sits on a ReLU kink.
    std::vector<Tensor> leaves;
    std::uint64_t salt = 200;
    for (const auto& e : params.entries()) {
        auto v = oracle::random_values(e.tensor.size(), salt++, 0.05);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += e.tensor.values()[i];
        leaves.push_back(Tensor::parameter(e.tensor.shape(), std::move(v)));
    }
    const auto names = params.entries();
    const auto readout_x = oracle::random_values(2 * 8 * 8, 70);
    const auto readout_h = oracle::random_values(cfg.channels * 2 * 2, 71);
    // Fixed incoming states keep the initializer out of the graph, as in the block's real use per frame.
    const auto states = initializer_forward(image_tensor(generate_reference_phantom(9, 8)), params, cfg);
    const ad::GraphBuilder build = [&](const std::vector<Tensor>& l) {
        ParamSet p;
        for (std::size_t i = 0; i < l.size(); ++i) p.add(names[i].name, l[i]);
        const auto r = rnn_block_forward(Tensor::constant({2, 8, 8}, f.x_uni), std::span(states).first(1), f, p, cfg, 0,
                                         false);
        // Linear read-outs keep the loss O(1) so central differences resolve small gradients.
        return ad::add(ad::dot(r.x, Tensor::constant({2, 8, 8}, readout_x)),
                       ad::dot(r.states[0].h, Tensor::constant(r.states[0].h.shape(), readout_h)));
    };
    const auto r = ad::grad_check(build, leaves, 1e-5, 64);
    EXPECT_LE(r.max_rel_error, 1e-4) << names[r.leaf].name << "[" << r.coordinate << "] analytic " << r.analytic
                                     << " numeric " << r.numeric;
}

TEST(Forward, OutputCountAndCausality) {
    const auto cfg = tiny_model();
    const auto p = init_convlr_params(cfg);
    const auto ref = generate_reference_phantom(10, 8);
    for (std::size_t T : {3u, 5u, 7u}) {
        std::vector<KSpaceData> y;
        for (std::size_t t = 0; t < T; ++t) {
            y.push_back(nudft_forward(generate_reference_phantom(10 + t, 8), golden_angle_trajectory(4, 16, 4 * t)));
        }
        const auto base = convlr_reconstruct(y, ref, p, cfg, {});
        ASSERT_EQ(base.size(), T);
        for (std::size_t t = 0; t + 1 < T; ++t) {
            auto perturbed = y;
            for (auto& s : perturbed[t + 1].samples) s += cplx(0.3, -0.2);
            const auto out = convlr_reconstruct(perturbed, ref, p, cfg, {});
            for (std::size_t u = 0; u <= t; ++u) EXPECT_EQ(out[u], base[u]) << "T=" << T << " t=" << t << " u=" << u;
            EXPECT_NE(out[t + 1], base[t + 1]);
        }
    }
}

TEST(Forward, StreamMatchesBatchForward) {
    const auto cfg = tiny_model();
    const auto p = init_convlr_params(cfg);
    const auto ref = generate_reference_phantom(11, 8);
    std::vector<KSpaceData> y;
    for (std::size_t t = 0; t < 4; ++t) {
        y.push_back(nudft_forward(generate_reference_phantom(20 + t, 8), golden_angle_trajectory(4, 16, 4 * t)));
    }
    for (bool mask : {false, true}) {
        for (bool init : {false, true}) {
            const ForwardOptions opts{mask, init};
            const auto batch = convlr_reconstruct(y, ref, p, cfg, opts);
            ConvLrStream stream(p, cfg, opts, ref);
            for (std::size_t t = 0; t < y.size(); ++t) EXPECT_EQ(stream.push(y[t]), batch[t]);
            EXPECT_EQ(stream.frames_seen(), y.size());
        }
    }
}

TEST(Forward, CheckpointRoundTripGivesIdenticalOutputs) {
    const auto cfg = tiny_model();
    const auto p = init_convlr_params(cfg);
    const auto dir = oracle::scratch_dir("network_ckpt");
    save_checkpoint(dir / "m.ckpt", p);
    const auto q = load_checkpoint(dir / "m.ckpt");
    const auto ref = generate_reference_phantom(12, 8);
    const std::vector<KSpaceData> y{nudft_forward(ref, golden_angle_trajectory(4, 16, 0))};
    EXPECT_EQ(convlr_reconstruct(y, ref, p, cfg, {}), convlr_reconstruct(y, ref, q, cfg, {}));
}

TEST(Model, ValidationAndParameterLayout) {
    ModelConfig cfg;
    cfg.image_size = 30;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig{};
    cfg.kernel = 4;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig{};
    cfg.shared_alpha = true;
    const auto p = init_convlr_params(cfg);
    EXPECT_TRUE(p.contains("alpha"));
    EXPECT_FALSE(p.contains("b0.alpha"));
    EXPECT_EQ(init_convlr_params(ModelConfig{}).get("b1.alpha").values()[0], ModelConfig{}.alpha_init);
}

TEST(Model, AlphaScaleIsInverseLargestEigenvalue) {
    NudftOperator op(golden_angle_trajectory(8, 32, 0), 16, 16);
    EXPECT_NEAR(calibrate_alpha_scale(16, 8, 32) * oracle::power_iteration(op), 1.0, 1e-6);
}
