#pragma once

#include <cstdint>

#include "convlr/autodiff.hpp"
#include "convlr/checkpoint.hpp"

namespace convlr {

struct LossWeights {
    double image = 60.0;       // weight on the normalized image-domain error
    double frequency = 30.0;   // weight on the k-space squared error
    double perceptual = 0.01;  // weight on the frozen-feature distance

    void validate() const;
};

/// ||x_rec - x_gt|| / ||x_gt|| (squared ratio when `squared` is set).
ad::Tensor loss_imse(const ad::Tensor& x_rec, const ad::Tensor& x_gt, bool squared = false);

/// ||DFT(x_rec) - DFT(x_gt)||^2 with an unnormalized 2-D DFT of the complex
/// image carried in the two channels.
ad::Tensor loss_fmse(const ad::Tensor& x_rec, const ad::Tensor& x_gt);

/// Unnormalized 2-D DFT of a [2,H,W] tensor as a differentiable linear map.
ad::Tensor dft2(const ad::Tensor& x);

/// Frozen three-layer convolutional feature extractor standing in for a
/// pretrained perceptual network. Kernels are drawn once from `seed`.
class PerceptualFeatures {
public:
    explicit PerceptualFeatures(std::uint64_t seed = 20240611, std::size_t width = 8);
    ad::Tensor operator()(const ad::Tensor& x) const;

private:
    ad::Tensor w1_, w2_, w3_;
};

ad::Tensor loss_perceptual(const ad::Tensor& x_rec, const ad::Tensor& x_gt, const PerceptualFeatures& features);

struct DiscriminatorConfig {
    std::size_t image_size = 32;  // divisible by 8
    std::size_t channels = 8;
    std::uint64_t init_seed = 2;
};

ParamSet init_discriminator_params(const DiscriminatorConfig& cfg);

/// Three stride-2 conv stages, a linear read-out to a logit, then sigmoid.
ad::Tensor discriminator_forward(const ad::Tensor& x, const ParamSet& d_params, const DiscriminatorConfig& cfg);

inline constexpr double kProbabilityClamp = 1e-7;

/// -log(D), D clamped to [1e-7, 1 - 1e-7].
ad::Tensor loss_gen(const ad::Tensor& d_of_rec);

/// Binary cross-entropy for the discriminator update (real -> 1, fake -> 0).
ad::Tensor loss_discriminator(const ad::Tensor& d_of_real, const ad::Tensor& d_of_fake);

struct LossParts {
    ad::Tensor imse;
    ad::Tensor fmse;
    ad::Tensor perceptual;
    ad::Tensor gen;  // undefined when the discriminator is disabled
};

/// image*L_img + frequency*L_freq + perceptual*L_perc (+ L_gen when present).
ad::Tensor loss_total(const LossParts& parts, const LossWeights& w);

}  // namespace convlr
