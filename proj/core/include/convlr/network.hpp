#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convlr/autodiff.hpp"
#include "convlr/checkpoint.hpp"
#include "convlr/kspace.hpp"

namespace convlr {

struct ModelConfig {
    std::size_t image_size = 32;    // H = W, divisible by 4
    std::size_t channels = 32;      // hidden width of encoder, Conv-LSTM and head
    std::size_t lstm_layers = 2;    // Conv-LSTM layers per CNN
    std::size_t cnns_per_block = 2; // cascade CNNs ahead of each data-consistency layer
    std::size_t blocks = 2;         // RNN blocks per frame
    std::size_t kernel = 3;
    std::uint64_t init_seed = 1;
    double alpha_init = 0.5;        // alpha = alpha_init * alpha_scale at initialization
    double alpha_scale = 0.0;       // 1 / sigma_max(E)^2 for the training trajectory; 0 = uncalibrated
    bool shared_alpha = false;      // one step size for all blocks instead of one per block

    std::size_t state_count() const noexcept { return blocks * cnns_per_block * lstm_layers; }
    std::size_t feature_size() const noexcept { return image_size / 4; }
    void validate() const;
};

/// 1 / sigma_max(E)^2 for a golden-angle frame of the given geometry.
double calibrate_alpha_scale(std::size_t image_size, std::size_t n_spokes, std::size_t n_readout);

/// Per-frame inputs that stay fixed during training: the encoding operator,
/// E^H y and the density-compensated regridding x_uni, both as 2-channel planes.
struct FrameInput {
    std::shared_ptr<const NudftOperator> op;
    std::vector<double> adjoint_data;
    std::vector<double> x_uni;
};

FrameInput prepare_frame(const KSpaceData& y, std::size_t width, std::size_t height);

struct LstmState {
    ad::Tensor c;
    ad::Tensor h;
};

/// Index (block, cnn, layer) -> flat position in a state vector.
std::size_t state_index(const ModelConfig& cfg, std::size_t block, std::size_t cnn, std::size_t layer) noexcept;

struct GateParams {
    ad::Tensor wx;    // [4C, Cin, k, k], gate order i, f, o, g
    ad::Tensor wh;    // [4C, C, k, k]
    ad::Tensor bias;  // [4C]
};

/// Four-gate convolutional LSTM update; returns (c, h).
LstmState conv_lstm_cell(const ad::Tensor& x_in, const LstmState& prev, const GateParams& gates);

/// Builds the parameter set for `cfg` with deterministic initialization.
ParamSet init_convlr_params(const ModelConfig& cfg);

std::vector<LstmState> zero_states(const ModelConfig& cfg);
std::vector<LstmState> initializer_forward(const ad::Tensor& x_ref, const ParamSet& params, const ModelConfig& cfg);

/// Two stride-2 conv + leaky-relu stages: [2,H,W] -> [C,H/4,W/4].
ad::Tensor encoder_forward(const ad::Tensor& x, const ParamSet& params, const std::string& prefix,
                           const ModelConfig& cfg);
/// Two stride-2 transposed convs: [C,H/4,W/4] -> [2,H,W].
ad::Tensor deconv_head(const ad::Tensor& features, const ParamSet& params, const std::string& prefix,
                       const ModelConfig& cfg);

/// x - alpha * E^H (E x - y) on a 2-channel image.
ad::Tensor dc_soft_projection(const ad::Tensor& x_cnn, const FrameInput& frame, const ad::Tensor& alpha);

/// Effective step size of a block (alpha_scale * learnable factor).
ad::Tensor block_alpha(const ParamSet& params, const ModelConfig& cfg, std::size_t block);

struct BlockResult {
    ad::Tensor x;
    std::vector<LstmState> states;  // this block's states, cnn-major then layer
};

/// One RNN block: `cnns_per_block` residual CNNs (encoder, Conv-LSTM stack,
/// deconv head) followed by a data-consistency step. With mask_lstm the
/// Conv-LSTM contributions are zero and the states pass through unchanged.
BlockResult rnn_block_forward(const ad::Tensor& x_in, std::span<const LstmState> states, const FrameInput& frame,
                              const ParamSet& params, const ModelConfig& cfg, std::size_t block, bool mask_lstm);

struct ForwardOptions {
    bool mask_lstm = false;
    bool use_initializer = true;
};

/// Recurrent reconstruction of a frame sequence. Output t depends only on
/// frames 0..t and the reference.
std::vector<ad::Tensor> convlr_forward(std::span<const FrameInput> frames, const ad::Tensor& x_ref,
                                       const ParamSet& params, const ModelConfig& cfg, const ForwardOptions& opts);

/// Convenience wrapper over complex data: returns one image per frame.
std::vector<ComplexImage> convlr_reconstruct(std::span<const KSpaceData> y_frames, const ComplexImage& x_ref,
                                             const ParamSet& params, const ModelConfig& cfg,
                                             const ForwardOptions& opts);

/// Online inference: one frame in, one image out. States are carried
/// between calls and cut from the graph after every frame.
class ConvLrStream {
public:
    ConvLrStream(const ParamSet& params, const ModelConfig& cfg, const ForwardOptions& opts, const ComplexImage& x_ref);
    ComplexImage push(const KSpaceData& y);
    std::size_t frames_seen() const noexcept { return frames_seen_; }

private:
    ParamSet params_;
    ModelConfig cfg_;
    ForwardOptions opts_;
    std::size_t width_, height_;
    std::vector<LstmState> states_;
    std::size_t frames_seen_ = 0;
};

ad::Tensor image_tensor(const ComplexImage& image);
ComplexImage tensor_image(const ad::Tensor& t);

}  // namespace convlr
