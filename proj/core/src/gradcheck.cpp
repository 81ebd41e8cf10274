#include "convlr/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "convlr/losses.hpp"
#include "convlr/network.hpp"

namespace convlr {

namespace {

using ad::Shape;
using ad::Tensor;

Tensor random_leaf(std::mt19937_64& rng, Shape shape, double scale, double offset = 0.0) {
    std::normal_distribution<double> dist(0.0, scale);
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = offset + dist(rng);
    return Tensor::parameter(std::move(shape), std::move(v));
}

// Values bounded away from the kinks of leaky_relu / clamp.
Tensor kink_free_leaf(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<double> mag(0.05, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
    return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor positive_leaf(std::mt19937_64& rng, Shape shape) {
    std::uniform_real_distribution<double> d(0.3, 2.0);
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = d(rng);
    return Tensor::parameter(std::move(shape), std::move(v));
}

// Fixed random linear read-out so every output coordinate gets a distinct weight.
std::function<Tensor(const Tensor&)> projector(std::uint64_t seed) {
    return [seed](const Tensor& y) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist(0.0, 1.0);
        std::vector<double> w(y.size());
        for (auto& v : w) v = dist(rng);
        return ad::dot(y, Tensor::constant(y.shape(), std::move(w)));
    };
}

struct Suite {
    double tolerance, eps;
    std::vector<GradCheckCase> cases;

    void run(const std::string& name, const ad::GraphBuilder& builder, std::vector<Tensor> leaves) {
        GradCheckCase c;
        c.name = name;
        c.result = ad::grad_check(builder, std::move(leaves), eps);
        c.passed = c.result.finite && c.result.max_rel_error <= tolerance;
        cases.push_back(std::move(c));
    }
};

ModelConfig tiny_model(std::size_t blocks, std::size_t cnns, std::size_t layers) {
    ModelConfig cfg;
    cfg.image_size = 8;
    cfg.channels = 2;
    cfg.lstm_layers = layers;
    cfg.cnns_per_block = cnns;
    cfg.blocks = blocks;
    cfg.init_seed = 11;
    cfg.alpha_scale = calibrate_alpha_scale(8, 4, 16);
    return cfg;
}

// Parameter leaves perturbed away from their zero-initialized biases so every
// path carries signal.
std::vector<Tensor> jittered_leaves(const ParamSet& p, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 0.05);
    std::vector<Tensor> leaves;
    for (const auto& e : p.entries()) {
        const auto v = e.tensor.values();
        std::vector<double> copy(v.begin(), v.end());
        for (auto& x : copy) x += dist(rng);
        leaves.push_back(Tensor::parameter(e.tensor.shape(), std::move(copy)));
    }
    return leaves;
}

ParamSet rebuild(const ParamSet& names, const std::vector<Tensor>& leaves, std::size_t offset = 0) {
    ParamSet p;
    for (std::size_t i = 0; i < names.size(); ++i) p.add(names.entries()[i].name, leaves[offset + i]);
    return p;
}

FrameInput tiny_frame(std::mt19937_64& rng) {
    ComplexImage img(8, 8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : img.values()) v = cplx(u(rng), 0.2 * u(rng));
    const auto y = nudft_forward(img, golden_angle_trajectory(4, 16, 3));
    return prepare_frame(y, 8, 8);
}

}  // namespace

Tensor sabotaged_sigmoid(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
    return ad::make_op("sabotaged_sigmoid", x.shape(), out, {x}, [out](ad::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < out.size(); ++i) g[i] += 1.1 * n.grad[i] * out[i] * (1.0 - out[i]);
    });
}

std::vector<GradCheckCase> run_gradcheck_suite(double tolerance, double eps, bool sabotage) {
    Suite s{tolerance, eps, {}};
    std::mt19937_64 rng(2024);
    auto proj = projector(99);

    // ---- primitive ops
    s.run("conv2d stride1 pad1",
          [&](const std::vector<Tensor>& l) { return proj(ad::conv2d(l[0], l[1], l[2], 1, 1)); },
          {random_leaf(rng, {2, 6, 6}, 1.0), random_leaf(rng, {3, 2, 3, 3}, 0.5), random_leaf(rng, {3}, 0.5)});
    s.run("conv2d stride2 pad1",
          [&](const std::vector<Tensor>& l) { return proj(ad::conv2d(l[0], l[1], l[2], 2, 1)); },
          {random_leaf(rng, {2, 8, 8}, 1.0), random_leaf(rng, {3, 2, 3, 3}, 0.5), random_leaf(rng, {3}, 0.5)});
    s.run("conv_transpose2d stride2",
          [&](const std::vector<Tensor>& l) { return proj(ad::conv_transpose2d(l[0], l[1], l[2], 2, 1, 8, 8)); },
          {random_leaf(rng, {3, 4, 4}, 1.0), random_leaf(rng, {3, 2, 3, 3}, 0.5), random_leaf(rng, {2}, 0.5)});
    s.run("sigmoid", [&](const std::vector<Tensor>& l) { return proj(ad::sigmoid(l[0])); },
          {random_leaf(rng, {2, 3, 3}, 2.0)});
    s.run("tanh", [&](const std::vector<Tensor>& l) { return proj(ad::tanh(l[0])); },
          {random_leaf(rng, {2, 3, 3}, 2.0)});
    s.run("leaky_relu", [&](const std::vector<Tensor>& l) { return proj(ad::leaky_relu(l[0])); },
          {kink_free_leaf(rng, {2, 3, 3})});
    s.run("add/sub/hadamard",
          [&](const std::vector<Tensor>& l) { return proj(ad::hadamard(ad::add(l[0], l[1]), ad::sub(l[0], l[1]))); },
          {random_leaf(rng, {2, 3, 3}, 1.0), random_leaf(rng, {2, 3, 3}, 1.0)});
    s.run("scale/scale_by", [&](const std::vector<Tensor>& l) { return proj(ad::scale_by(ad::scale(l[0], 1.7), l[1])); },
          {random_leaf(rng, {2, 3, 3}, 1.0), random_leaf(rng, {1}, 1.0)});
    s.run("log", [&](const std::vector<Tensor>& l) { return proj(ad::log(l[0])); }, {positive_leaf(rng, {2, 3, 3})});
    s.run("sqrt", [&](const std::vector<Tensor>& l) { return proj(ad::sqrt(l[0])); }, {positive_leaf(rng, {2, 3, 3})});
    s.run("clamp", [&](const std::vector<Tensor>& l) { return proj(ad::clamp(l[0], -0.5, 0.5)); },
          {kink_free_leaf(rng, {2, 3, 3})});
    s.run("concat/slice",
          [&](const std::vector<Tensor>& l) {
              const auto c = ad::concat_channels({l[0], l[1]});
              return proj(ad::hadamard(ad::slice_channels(c, 1, 2), ad::slice_channels(c, 0, 2)));
          },
          {random_leaf(rng, {1, 3, 3}, 1.0), random_leaf(rng, {2, 3, 3}, 1.0)});
    s.run("sum/sum_squares",
          [&](const std::vector<Tensor>& l) { return ad::add(ad::sum(l[0]), ad::sum_squares(l[0])); },
          {random_leaf(rng, {2, 3, 3}, 1.0)});
    s.run("dot", [&](const std::vector<Tensor>& l) { return ad::dot(l[0], l[1]); },
          {random_leaf(rng, {2, 3, 3}, 1.0), random_leaf(rng, {2, 3, 3}, 1.0)});
    s.run("dft2 linear map", [&](const std::vector<Tensor>& l) { return proj(dft2(l[0])); },
          {random_leaf(rng, {2, 4, 6}, 1.0)});

    // ---- composed blocks
    {
        const auto cfg = tiny_model(1, 1, 1);
        const auto params = init_convlr_params(cfg);
        const auto frame = tiny_frame(rng);

        ParamSet enc;
        for (const char* n : {"b0.c0.enc1.w", "b0.c0.enc1.b", "b0.c0.enc2.w", "b0.c0.enc2.b"}) enc.add(n, params.get(n));
        auto leaves = jittered_leaves(enc, rng);
        leaves.push_back(random_leaf(rng, {2, 8, 8}, 1.0));
        s.run("encoder",
              [&](const std::vector<Tensor>& l) { return proj(encoder_forward(l.back(), rebuild(enc, l), "b0.c0.", cfg)); },
              leaves);

        ParamSet dec;
        for (const char* n : {"b0.c0.dec1.w", "b0.c0.dec1.b", "b0.c0.dec2.w", "b0.c0.dec2.b"}) dec.add(n, params.get(n));
        leaves = jittered_leaves(dec, rng);
        leaves.push_back(random_leaf(rng, {2, 2, 2}, 1.0));
        s.run("deconv head",
              [&](const std::vector<Tensor>& l) { return proj(deconv_head(l.back(), rebuild(dec, l), "b0.c0.", cfg)); },
              leaves);

        s.run("conv-lstm cell",
              [&](const std::vector<Tensor>& l) {
                  const auto st = conv_lstm_cell(l[0], {l[1], l[2]}, {l[3], l[4], l[5]});
                  return ad::add(proj(st.c), proj(st.h));
              },
              {random_leaf(rng, {2, 3, 3}, 1.0), random_leaf(rng, {2, 3, 3}, 1.0), random_leaf(rng, {2, 3, 3}, 0.5),
               random_leaf(rng, {8, 2, 3, 3}, 0.4), random_leaf(rng, {8, 2, 3, 3}, 0.4), random_leaf(rng, {8}, 0.4)});

        s.run("dc layer",
              [&](const std::vector<Tensor>& l) { return proj(dc_soft_projection(l[0], frame, l[1])); },
              {random_leaf(rng, {2, 8, 8}, 1.0), Tensor::parameter({1}, {0.5 * cfg.alpha_scale})});

        auto block_leaves = jittered_leaves(params, rng);
        const std::size_t np = block_leaves.size();
        block_leaves.push_back(random_leaf(rng, {2, 8, 8}, 1.0));
        block_leaves.push_back(random_leaf(rng, {2, 2, 2}, 0.5));
        block_leaves.push_back(random_leaf(rng, {2, 2, 2}, 0.5));
        s.run("rnn block",
              [&](const std::vector<Tensor>& l) {
                  const auto p = rebuild(params, l);
                  const LstmState st{l[np + 1], l[np + 2]};
                  const auto r = rnn_block_forward(l[np], std::span<const LstmState>(&st, 1), frame, p, cfg, 0, false);
                  return ad::add(proj(r.x), ad::add(proj(r.states[0].c), proj(r.states[0].h)));
              },
              block_leaves);

        auto init_leaves = jittered_leaves(params, rng);
        init_leaves.push_back(random_leaf(rng, {2, 8, 8}, 1.0));
        s.run("initializer",
              [&](const std::vector<Tensor>& l) {
                  const auto states = initializer_forward(l.back(), rebuild(params, l), cfg);
                  Tensor total = ad::add(proj(states[0].c), proj(states[0].h));
                  return total;
              },
              init_leaves);
    }
    {
        const auto cfg = tiny_model(2, 1, 1);
        const auto params = init_convlr_params(cfg);
        std::vector<FrameInput> frames{tiny_frame(rng), tiny_frame(rng)};
        auto leaves = jittered_leaves(params, rng);
        leaves.push_back(random_leaf(rng, {2, 8, 8}, 1.0));
        const PerceptualFeatures features(20240611, 4);
        // Targets near the current reconstruction keep the loss small relative to
        // its gradient (less roundoff) while the unsquared image term stays smooth
        // enough at this offset (little truncation error).
        std::vector<Tensor> targets;
        std::normal_distribution<double> noise(0.0, 0.0003);
        for (const auto& o : convlr_forward(frames, leaves.back(), rebuild(params, leaves), cfg, {})) {
            const auto v = o.values();
            std::vector<double> t(v.begin(), v.end());
            for (auto& x : t) x += noise(rng);
            targets.push_back(Tensor::constant(o.shape(), std::move(t)));
        }
        s.run("two-frame forward + generator loss",
              [&](const std::vector<Tensor>& l) {
                  const auto outs = convlr_forward(frames, l.back(), rebuild(params, l), cfg, {});
                  Tensor total;
                  for (std::size_t t = 0; t < outs.size(); ++t) {
                      const auto& o = outs[t];
                      const auto& target = targets[t];
                      LossParts parts{loss_imse(o, target), loss_fmse(o, target), loss_perceptual(o, target, features), {}};
                      const auto frame_loss = loss_total(parts, {});
                      total = total.defined() ? ad::add(total, frame_loss) : frame_loss;
                  }
                  return total;
              },
              leaves);
    }
    {
        const DiscriminatorConfig dcfg{8, 2, 5};
        const auto d = init_discriminator_params(dcfg);
        auto leaves = jittered_leaves(d, rng);
        leaves.push_back(random_leaf(rng, {2, 8, 8}, 1.0));
        s.run("discriminator",
              [&](const std::vector<Tensor>& l) { return ad::log(discriminator_forward(l.back(), rebuild(d, l), dcfg)); },
              leaves);
        s.run("generator adversarial loss",
              [&](const std::vector<Tensor>& l) { return loss_gen(discriminator_forward(l.back(), rebuild(d, l), dcfg)); },
              leaves);
        s.run("discriminator bce",
              [&](const std::vector<Tensor>& l) {
                  const auto p = rebuild(d, l);
                  return loss_discriminator(discriminator_forward(l.back(), p, dcfg),
                                            discriminator_forward(ad::scale(l.back(), 0.5), p, dcfg));
              },
              leaves);
    }
    {
        const PerceptualFeatures features(20240611, 4);
        const auto gt = random_leaf(rng, {2, 6, 6}, 1.0).detach();
        s.run("imse loss", [&](const std::vector<Tensor>& l) { return loss_imse(l[0], gt); },
              {random_leaf(rng, {2, 6, 6}, 1.0)});
        s.run("imse loss squared", [&](const std::vector<Tensor>& l) { return loss_imse(l[0], gt, true); },
              {random_leaf(rng, {2, 6, 6}, 1.0)});
        s.run("fmse loss", [&](const std::vector<Tensor>& l) { return loss_fmse(l[0], gt); },
              {random_leaf(rng, {2, 6, 6}, 1.0)});
        s.run("perceptual loss", [&](const std::vector<Tensor>& l) { return loss_perceptual(l[0], gt, features); },
              {random_leaf(rng, {2, 6, 6}, 1.0)});
    }

    if (sabotage) {
        s.run("sabotage fixture", [&](const std::vector<Tensor>& l) { return proj(sabotaged_sigmoid(l[0])); },
              {random_leaf(rng, {2, 3, 3}, 1.0)});
    }
    return s.cases;
}

}  // namespace convlr
