#include "convlr/losses.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace convlr {

void LossWeights::validate() const {
    if (!(image >= 0.0) || !(frequency >= 0.0) || !(perceptual >= 0.0)) {
        throw std::invalid_argument("loss weights must be non-negative");
    }
}

ad::Tensor loss_imse(const ad::Tensor& x_rec, const ad::Tensor& x_gt, bool squared) {
    if (x_rec.shape() != x_gt.shape()) throw std::invalid_argument("loss_imse: shape mismatch");
    double gt_sq = 0.0;
    for (double v : x_gt.values()) gt_sq += v * v;
    if (gt_sq == 0.0) throw std::invalid_argument("loss_imse: ground truth has zero norm");
    const auto err_sq = ad::sum_squares(ad::sub(x_rec, x_gt));
    if (squared) return ad::scale(err_sq, 1.0 / gt_sq);
    return ad::scale(ad::sqrt(err_sq), 1.0 / std::sqrt(gt_sq));
}

namespace {

// Separable 2-D DFT on [re plane, im plane]; sign = -1 forward, +1 adjoint.
std::vector<double> dft2_planes(std::span<const double> in, std::size_t h, std::size_t w, double sign) {
    const std::size_t n = h * w;
    std::vector<double> cw(w * w), sw(w * w), ch(h * h), sh(h * h);
    for (std::size_t a = 0; a < w; ++a) {
        for (std::size_t b = 0; b < w; ++b) {
            const double ph = sign * 2.0 * std::numbers::pi * static_cast<double>((a * b) % w) / static_cast<double>(w);
            cw[a * w + b] = std::cos(ph);
            sw[a * w + b] = std::sin(ph);
        }
    }
    for (std::size_t a = 0; a < h; ++a) {
        for (std::size_t b = 0; b < h; ++b) {
            const double ph = sign * 2.0 * std::numbers::pi * static_cast<double>((a * b) % h) / static_cast<double>(h);
            ch[a * h + b] = std::cos(ph);
            sh[a * h + b] = std::sin(ph);
        }
    }
    // Rows: T[y, u] = sum_x in[y, x] e(u x)
    std::vector<double> tr(n, 0.0), ti(n, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        const double* xr = in.data() + y * w;
        const double* xi = in.data() + n + y * w;
        for (std::size_t u = 0; u < w; ++u) {
            double ar = 0.0, ai = 0.0;
            for (std::size_t x = 0; x < w; ++x) {
                const double c = cw[u * w + x], s = sw[u * w + x];
                ar += xr[x] * c - xi[x] * s;
                ai += xr[x] * s + xi[x] * c;
            }
            tr[y * w + u] = ar;
            ti[y * w + u] = ai;
        }
    }
    // Columns: out[v, u] = sum_y T[y, u] e(v y)
    std::vector<double> out(2 * n, 0.0);
    for (std::size_t v = 0; v < h; ++v) {
        for (std::size_t y = 0; y < h; ++y) {
            const double c = ch[v * h + y], s = sh[v * h + y];
            for (std::size_t u = 0; u < w; ++u) {
                out[v * w + u] += tr[y * w + u] * c - ti[y * w + u] * s;
                out[n + v * w + u] += tr[y * w + u] * s + ti[y * w + u] * c;
            }
        }
    }
    return out;
}

}  // namespace

ad::Tensor dft2(const ad::Tensor& x) {
    if (x.shape().size() != 3 || x.dim(0) != 2) throw std::invalid_argument("dft2: expected [2,H,W]");
    const std::size_t h = x.dim(1), w = x.dim(2);
    return ad::linear_map(
        "dft2", x, x.shape(), [h, w](std::span<const double> v) { return dft2_planes(v, h, w, -1.0); },
        [h, w](std::span<const double> v) { return dft2_planes(v, h, w, +1.0); });
}

ad::Tensor loss_fmse(const ad::Tensor& x_rec, const ad::Tensor& x_gt) {
    if (x_rec.shape() != x_gt.shape()) throw std::invalid_argument("loss_fmse: shape mismatch");
    return ad::sum_squares(dft2(ad::sub(x_rec, x_gt)));
}

PerceptualFeatures::PerceptualFeatures(std::uint64_t seed, std::size_t width) {
    std::mt19937_64 rng(seed);
    auto draw = [&rng](ad::Shape shape) {
        const double fan_in = static_cast<double>(shape[1] * shape[2] * shape[3]);
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
        std::vector<double> v(ad::numel(shape));
        for (auto& x : v) x = dist(rng);
        return ad::Tensor::constant(std::move(shape), std::move(v));
    };
    w1_ = draw({width, 2, 3, 3});
    w2_ = draw({width, width, 3, 3});
    w3_ = draw({width, width, 3, 3});
}

ad::Tensor PerceptualFeatures::operator()(const ad::Tensor& x) const {
    auto z = ad::leaky_relu(ad::conv2d(x, w1_, {}, 1, 1));
    z = ad::leaky_relu(ad::conv2d(z, w2_, {}, 2, 1));
    return ad::leaky_relu(ad::conv2d(z, w3_, {}, 2, 1));
}

ad::Tensor loss_perceptual(const ad::Tensor& x_rec, const ad::Tensor& x_gt, const PerceptualFeatures& features) {
    if (x_rec.shape() != x_gt.shape()) throw std::invalid_argument("loss_perceptual: shape mismatch");
    return ad::sum_squares(ad::sub(features(x_rec), features(x_gt)));
}

ParamSet init_discriminator_params(const DiscriminatorConfig& cfg) {
    if (cfg.image_size == 0 || cfg.image_size % 8 != 0) {
        throw std::invalid_argument("discriminator: image_size must be a multiple of 8");
    }
    std::mt19937_64 rng(cfg.init_seed);
    const std::size_t c = cfg.channels;
    auto draw = [&rng](ad::Shape shape, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        std::vector<double> v(ad::numel(shape));
        for (auto& x : v) x = dist(rng);
        return ad::Tensor::parameter(std::move(shape), std::move(v));
    };
    const std::size_t s = cfg.image_size / 8;
    ParamSet p;
    p.add("d.conv1.w", draw({c, 2, 3, 3}, std::sqrt(2.0 / 18.0)));
    p.add("d.conv1.b", ad::Tensor::zeros({c}, true));
    p.add("d.conv2.w", draw({2 * c, c, 3, 3}, std::sqrt(2.0 / double(9 * c))));
    p.add("d.conv2.b", ad::Tensor::zeros({2 * c}, true));
    p.add("d.conv3.w", draw({2 * c, 2 * c, 3, 3}, std::sqrt(2.0 / double(18 * c))));
    p.add("d.conv3.b", ad::Tensor::zeros({2 * c}, true));
    p.add("d.fc.w", draw({2 * c, s, s}, 1.0 / std::sqrt(double(2 * c * s * s))));
    p.add("d.fc.b", ad::Tensor::zeros({1}, true));
    return p;
}

ad::Tensor discriminator_forward(const ad::Tensor& x, const ParamSet& d, const DiscriminatorConfig& cfg) {
    const std::size_t n = cfg.image_size;
    if (x.shape() != ad::Shape{2, n, n}) {
        throw std::invalid_argument("discriminator_forward: expected [2," + std::to_string(n) + "," +
                                    std::to_string(n) + "], got " + ad::shape_string(x.shape()));
    }
    auto z = ad::leaky_relu(ad::conv2d(x, d.get("d.conv1.w"), d.get("d.conv1.b"), 2, 1));
    z = ad::leaky_relu(ad::conv2d(z, d.get("d.conv2.w"), d.get("d.conv2.b"), 2, 1));
    z = ad::leaky_relu(ad::conv2d(z, d.get("d.conv3.w"), d.get("d.conv3.b"), 2, 1));
    const auto logit = ad::add(ad::dot(z, d.get("d.fc.w")), d.get("d.fc.b"));
    return ad::sigmoid(logit);
}

ad::Tensor loss_gen(const ad::Tensor& d_of_rec) {
    return ad::scale(ad::log(ad::clamp(d_of_rec, kProbabilityClamp, 1.0 - kProbabilityClamp)), -1.0);
}

ad::Tensor loss_discriminator(const ad::Tensor& d_of_real, const ad::Tensor& d_of_fake) {
    const auto real_term = ad::log(ad::clamp(d_of_real, kProbabilityClamp, 1.0 - kProbabilityClamp));
    const auto one = ad::Tensor::constant(d_of_fake.shape(), std::vector<double>(d_of_fake.size(), 1.0));
    const auto fake_term = ad::log(ad::clamp(ad::sub(one, d_of_fake), kProbabilityClamp, 1.0 - kProbabilityClamp));
    return ad::scale(ad::add(real_term, fake_term), -1.0);
}

ad::Tensor loss_total(const LossParts& parts, const LossWeights& w) {
    auto total = ad::add(ad::add(ad::scale(parts.imse, w.image), ad::scale(parts.fmse, w.frequency)),
                         ad::scale(parts.perceptual, w.perceptual));
    if (parts.gen.defined()) total = ad::add(total, parts.gen);
    return total;
}

}  // namespace convlr
