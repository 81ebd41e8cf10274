#include "convlr/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace convlr {

namespace {

std::string cnn_prefix(std::size_t block, std::size_t cnn) {
    return "b" + std::to_string(block) + ".c" + std::to_string(cnn) + ".";
}

ad::Tensor random_param(std::mt19937_64& rng, ad::Shape shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = dist(rng);
    return ad::Tensor::parameter(std::move(shape), std::move(v));
}

ad::Tensor filled_param(ad::Shape shape, double value) {
    std::vector<double> v(ad::numel(shape), value);
    return ad::Tensor::parameter(std::move(shape), std::move(v));
}

double he_std(std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

std::vector<double> apply_normal(const NudftOperator& op, std::span<const double> planes) {
    const auto img = from_two_channel(planes, op.width(), op.height());
    return to_two_channel(op.normal(img));
}

}  // namespace

void ModelConfig::validate() const {
    if (image_size == 0 || image_size % 4 != 0) throw std::invalid_argument("model: image_size must be a multiple of 4");
    if (channels == 0 || lstm_layers == 0 || cnns_per_block == 0 || blocks == 0) {
        throw std::invalid_argument("model: channels, lstm_layers, cnns_per_block and blocks must be >= 1");
    }
    if (kernel % 2 == 0) throw std::invalid_argument("model: kernel must be odd");
    if (!std::isfinite(alpha_init) || !std::isfinite(alpha_scale) || alpha_scale < 0.0) {
        throw std::invalid_argument("model: alpha_init/alpha_scale must be finite, alpha_scale >= 0");
    }
}

double calibrate_alpha_scale(std::size_t image_size, std::size_t n_spokes, std::size_t n_readout) {
    NudftOperator op(golden_angle_trajectory(n_spokes, n_readout, 0), image_size, image_size);
    const double lambda = estimate_max_eigenvalue(op, 40);
    if (!(lambda > 0.0)) throw std::runtime_error("calibrate_alpha_scale: degenerate operator");
    return 1.0 / lambda;
}

FrameInput prepare_frame(const KSpaceData& y, std::size_t width, std::size_t height) {
    if (!y.consistent()) throw std::invalid_argument("prepare_frame: samples do not match trajectory");
    FrameInput f;
    auto op = std::make_shared<NudftOperator>(y.trajectory, width, height);
    f.adjoint_data = to_two_channel(op->adjoint(y.samples));
    const auto w = density_compensation(y.trajectory, width, height);
    f.x_uni = to_two_channel(op->adjoint(y.samples, w));
    f.op = std::move(op);
    return f;
}

std::size_t state_index(const ModelConfig& cfg, std::size_t block, std::size_t cnn, std::size_t layer) noexcept {
    return (block * cfg.cnns_per_block + cnn) * cfg.lstm_layers + layer;
}

LstmState conv_lstm_cell(const ad::Tensor& x_in, const LstmState& prev, const GateParams& gates) {
    const std::size_t hidden = prev.h.dim(0);
    if (gates.wx.dim(0) != 4 * hidden || gates.wh.dim(0) != 4 * hidden) {
        throw std::invalid_argument("conv_lstm_cell: gate kernels must have 4*hidden output channels");
    }
    if (prev.c.shape() != prev.h.shape()) throw std::invalid_argument("conv_lstm_cell: c/h shape mismatch");
    const std::size_t pad = gates.wx.dim(2) / 2;
    const auto pre = ad::add(ad::conv2d(x_in, gates.wx, gates.bias, 1, pad), ad::conv2d(prev.h, gates.wh, {}, 1, pad));
    if (pre.shape() != ad::Shape{4 * hidden, prev.h.dim(1), prev.h.dim(2)}) {
        throw std::invalid_argument("conv_lstm_cell: input spatial dims differ from state dims");
    }
    const auto i = ad::sigmoid(ad::slice_channels(pre, 0, hidden));
    const auto f = ad::sigmoid(ad::slice_channels(pre, hidden, hidden));
    const auto o = ad::sigmoid(ad::slice_channels(pre, 2 * hidden, hidden));
    const auto g = ad::tanh(ad::slice_channels(pre, 3 * hidden, hidden));
    auto c = ad::add(ad::hadamard(f, prev.c), ad::hadamard(i, g));
    auto h = ad::hadamard(o, ad::tanh(c));
    return {std::move(c), std::move(h)};
}

ParamSet init_convlr_params(const ModelConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.init_seed);
    const std::size_t C = cfg.channels;
    const std::size_t k = cfg.kernel;
    const std::size_t kk = k * k;
    ParamSet p;

    p.add("init.conv1.w", random_param(rng, {C, 2, k, k}, he_std(2 * kk)));
    p.add("init.conv1.b", filled_param({C}, 0.0));
    p.add("init.conv2.w", random_param(rng, {C, C, k, k}, he_std(C * kk)));
    p.add("init.conv2.b", filled_param({C}, 0.0));
    p.add("init.out.w", random_param(rng, {2 * C * cfg.state_count(), C, k, k}, 0.5 / std::sqrt(double(C * kk))));
    p.add("init.out.b", filled_param({2 * C * cfg.state_count()}, 0.0));

    for (std::size_t b = 0; b < cfg.blocks; ++b) {
        for (std::size_t j = 0; j < cfg.cnns_per_block; ++j) {
            const auto pre = cnn_prefix(b, j);
            p.add(pre + "enc1.w", random_param(rng, {C, 2, k, k}, he_std(2 * kk)));
            p.add(pre + "enc1.b", filled_param({C}, 0.0));
            p.add(pre + "enc2.w", random_param(rng, {C, C, k, k}, he_std(C * kk)));
            p.add(pre + "enc2.b", filled_param({C}, 0.0));
            for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
                const auto lp = pre + "lstm" + std::to_string(l) + ".";
                const double s = 1.0 / std::sqrt(double(2 * C * kk));
                p.add(lp + "wx", random_param(rng, {4 * C, C, k, k}, s));
                p.add(lp + "wh", random_param(rng, {4 * C, C, k, k}, s));
                std::vector<double> bias(4 * C, 0.0);
                for (std::size_t c = C; c < 2 * C; ++c) bias[c] = 1.0;  // forget gate starts open
                p.add(lp + "b", ad::Tensor::parameter({4 * C}, std::move(bias)));
            }
            p.add(pre + "dec1.w", random_param(rng, {C, C, k, k}, he_std(C * kk)));
            p.add(pre + "dec1.b", filled_param({C}, 0.0));
            p.add(pre + "dec2.w", random_param(rng, {C, 2, k, k}, 0.1 * he_std(C * kk)));
            p.add(pre + "dec2.b", filled_param({2}, 0.0));
        }
        if (!cfg.shared_alpha) p.add("b" + std::to_string(b) + ".alpha", filled_param({1}, cfg.alpha_init));
    }
    if (cfg.shared_alpha) p.add("alpha", filled_param({1}, cfg.alpha_init));
    return p;
}

std::vector<LstmState> zero_states(const ModelConfig& cfg) {
    const std::size_t s = cfg.feature_size();
    std::vector<LstmState> states(cfg.state_count());
    for (auto& st : states) {
        st.c = ad::Tensor::zeros({cfg.channels, s, s});
        st.h = ad::Tensor::zeros({cfg.channels, s, s});
    }
    return states;
}

std::vector<LstmState> initializer_forward(const ad::Tensor& x_ref, const ParamSet& params, const ModelConfig& cfg) {
    const std::size_t n = cfg.image_size;
    if (x_ref.shape() != ad::Shape{2, n, n}) {
        throw std::invalid_argument("initializer_forward: reference must be [2," + std::to_string(n) + "," +
                                    std::to_string(n) + "], got " + ad::shape_string(x_ref.shape()));
    }
    const std::size_t pad = cfg.kernel / 2;
    auto z = ad::leaky_relu(ad::conv2d(x_ref, params.get("init.conv1.w"), params.get("init.conv1.b"), 2, pad));
    z = ad::leaky_relu(ad::conv2d(z, params.get("init.conv2.w"), params.get("init.conv2.b"), 2, pad));
    const auto out = ad::conv2d(z, params.get("init.out.w"), params.get("init.out.b"), 1, pad);
    const std::size_t C = cfg.channels;
    std::vector<LstmState> states(cfg.state_count());
    for (std::size_t s = 0; s < states.size(); ++s) {
        states[s].c = ad::slice_channels(out, 2 * s * C, C);
        states[s].h = ad::tanh(ad::slice_channels(out, (2 * s + 1) * C, C));
    }
    return states;
}

ad::Tensor encoder_forward(const ad::Tensor& x, const ParamSet& params, const std::string& prefix,
                           const ModelConfig& cfg) {
    const std::size_t n = cfg.image_size;
    if (x.shape() != ad::Shape{2, n, n}) {
        throw std::invalid_argument("encoder_forward: expected [2," + std::to_string(n) + "," + std::to_string(n) +
                                    "], got " + ad::shape_string(x.shape()));
    }
    const std::size_t pad = cfg.kernel / 2;
    auto z = ad::leaky_relu(ad::conv2d(x, params.get(prefix + "enc1.w"), params.get(prefix + "enc1.b"), 2, pad));
    return ad::leaky_relu(ad::conv2d(z, params.get(prefix + "enc2.w"), params.get(prefix + "enc2.b"), 2, pad));
}

ad::Tensor deconv_head(const ad::Tensor& features, const ParamSet& params, const std::string& prefix,
                       const ModelConfig& cfg) {
    const std::size_t n = cfg.image_size;
    const std::size_t s = cfg.feature_size();
    if (features.shape() != ad::Shape{cfg.channels, s, s}) {
        throw std::invalid_argument("deconv_head: features " + ad::shape_string(features.shape()) +
                                    " do not match the encoder geometry");
    }
    const std::size_t pad = cfg.kernel / 2;
    auto z = ad::leaky_relu(ad::conv_transpose2d(features, params.get(prefix + "dec1.w"),
                                                 params.get(prefix + "dec1.b"), 2, pad, n / 2, n / 2));
    return ad::conv_transpose2d(z, params.get(prefix + "dec2.w"), params.get(prefix + "dec2.b"), 2, pad, n, n);
}

ad::Tensor dc_soft_projection(const ad::Tensor& x_cnn, const FrameInput& frame, const ad::Tensor& alpha) {
    if (!frame.op) throw std::invalid_argument("dc_soft_projection: frame has no operator");
    const auto& op = *frame.op;
    if (x_cnn.shape() != ad::Shape{2, op.height(), op.width()}) {
        throw std::invalid_argument("dc_soft_projection: image " + ad::shape_string(x_cnn.shape()) +
                                    " does not match trajectory operator");
    }
    if (!std::isfinite(alpha.item())) throw std::invalid_argument("dc_soft_projection: non-finite alpha");
    auto op_ptr = frame.op;
    auto normal = [op_ptr](std::span<const double> v) { return apply_normal(*op_ptr, v); };
    const auto ehe = ad::linear_map("nudft_normal", x_cnn, x_cnn.shape(), normal, normal);
    const auto ehy = ad::Tensor::constant(x_cnn.shape(), frame.adjoint_data);
    return ad::sub(x_cnn, ad::scale_by(ad::sub(ehe, ehy), alpha));
}

ad::Tensor block_alpha(const ParamSet& params, const ModelConfig& cfg, std::size_t block) {
    const auto& factor = cfg.shared_alpha ? params.get("alpha") : params.get("b" + std::to_string(block) + ".alpha");
    return ad::scale(factor, cfg.alpha_scale);
}

BlockResult rnn_block_forward(const ad::Tensor& x_in, std::span<const LstmState> states, const FrameInput& frame,
                              const ParamSet& params, const ModelConfig& cfg, std::size_t block, bool mask_lstm) {
    const std::size_t per_block = cfg.cnns_per_block * cfg.lstm_layers;
    if (states.size() != per_block) {
        throw std::invalid_argument("rnn_block_forward: expected " + std::to_string(per_block) + " states, got " +
                                    std::to_string(states.size()));
    }
    BlockResult result;
    result.states.assign(states.begin(), states.end());
    ad::Tensor x = x_in;
    for (std::size_t j = 0; j < cfg.cnns_per_block; ++j) {
        const auto pre = cnn_prefix(block, j);
        ad::Tensor z = encoder_forward(x, params, pre, cfg);
        for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
            if (mask_lstm) continue;
            const auto lp = pre + "lstm" + std::to_string(l) + ".";
            GateParams gates{params.get(lp + "wx"), params.get(lp + "wh"), params.get(lp + "b")};
            auto& st = result.states[j * cfg.lstm_layers + l];
            st = conv_lstm_cell(z, st, gates);
            z = ad::add(z, st.h);
        }
        x = ad::add(x, deconv_head(z, params, pre, cfg));
    }
    result.x = dc_soft_projection(x, frame, block_alpha(params, cfg, block));
    return result;
}

std::vector<ad::Tensor> convlr_forward(std::span<const FrameInput> frames, const ad::Tensor& x_ref,
                                       const ParamSet& params, const ModelConfig& cfg, const ForwardOptions& opts) {
    if (frames.empty()) throw std::invalid_argument("convlr_forward: need at least one frame");
    auto states = opts.use_initializer ? initializer_forward(x_ref, params, cfg) : zero_states(cfg);
    const std::size_t per_block = cfg.cnns_per_block * cfg.lstm_layers;
    const std::size_t n = cfg.image_size;
    std::vector<ad::Tensor> outputs;
    outputs.reserve(frames.size());
    for (const auto& frame : frames) {
        if (frame.x_uni.size() != 2 * n * n) throw std::invalid_argument("convlr_forward: frame size mismatch");
        ad::Tensor x = ad::Tensor::constant({2, n, n}, frame.x_uni);
        for (std::size_t b = 0; b < cfg.blocks; ++b) {
            std::span<const LstmState> block_states(states.data() + b * per_block, per_block);
            auto r = rnn_block_forward(x, block_states, frame, params, cfg, b, opts.mask_lstm);
            std::copy(r.states.begin(), r.states.end(), states.begin() + static_cast<std::ptrdiff_t>(b * per_block));
            x = std::move(r.x);
        }
        outputs.push_back(std::move(x));
    }
    return outputs;
}

ad::Tensor image_tensor(const ComplexImage& image) {
    return ad::Tensor::constant({2, image.height(), image.width()}, to_two_channel(image));
}

ComplexImage tensor_image(const ad::Tensor& t) {
    if (t.shape().size() != 3 || t.dim(0) != 2) throw std::invalid_argument("tensor_image: expected [2,H,W]");
    return from_two_channel(t.values(), t.dim(2), t.dim(1));
}

std::vector<ComplexImage> convlr_reconstruct(std::span<const KSpaceData> y_frames, const ComplexImage& x_ref,
                                             const ParamSet& params, const ModelConfig& cfg,
                                             const ForwardOptions& opts) {
    std::vector<FrameInput> frames;
    frames.reserve(y_frames.size());
    for (const auto& y : y_frames) frames.push_back(prepare_frame(y, x_ref.width(), x_ref.height()));
    const auto outs = convlr_forward(frames, image_tensor(x_ref), params, cfg, opts);
    std::vector<ComplexImage> images;
    images.reserve(outs.size());
    for (const auto& o : outs) images.push_back(tensor_image(o));
    return images;
}

ConvLrStream::ConvLrStream(const ParamSet& params, const ModelConfig& cfg, const ForwardOptions& opts,
                           const ComplexImage& x_ref)
    : params_(params.clone()), cfg_(cfg), opts_(opts), width_(x_ref.width()), height_(x_ref.height()) {
    cfg_.validate();
    if (width_ != cfg_.image_size || height_ != cfg_.image_size) {
        throw std::invalid_argument("ConvLrStream: reference does not match model.image_size");
    }
    states_ = opts_.use_initializer ? initializer_forward(image_tensor(x_ref), params_, cfg_) : zero_states(cfg_);
    for (auto& s : states_) s = {s.c.detach(), s.h.detach()};
}

ComplexImage ConvLrStream::push(const KSpaceData& y) {
    const auto frame = prepare_frame(y, width_, height_);
    const std::size_t per_block = cfg_.cnns_per_block * cfg_.lstm_layers;
    ad::Tensor x = ad::Tensor::constant({2, height_, width_}, frame.x_uni);
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        std::span<const LstmState> block_states(states_.data() + b * per_block, per_block);
        auto r = rnn_block_forward(x, block_states, frame, params_, cfg_, b, opts_.mask_lstm);
        for (std::size_t i = 0; i < per_block; ++i) states_[b * per_block + i] = {r.states[i].c.detach(), r.states[i].h.detach()};
        x = r.x.detach();
    }
    ++frames_seen_;
    return tensor_image(x);
}

}  // namespace convlr
