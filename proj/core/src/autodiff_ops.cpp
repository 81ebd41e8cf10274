#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "convlr/autodiff.hpp"

namespace convlr::ad {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    }
}

void accumulate(Node& parent, std::span<const double> g) {
    if (!parent.requires_grad) return;
    auto& pg = parent.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
}

struct ConvGeometry {
    std::size_t c_in, h_in, w_in;
    std::size_t c_out, h_out, w_out;
    std::size_t k, stride, pad;
};

// Valid output index range [lo, hi) for kernel tap `kk` along one axis.
inline void tap_range(std::size_t kk, std::size_t n_in, std::size_t n_out, std::size_t stride, std::size_t pad,
                      std::size_t& lo, std::size_t& hi) {
    // input index = o*stride + kk - pad must lie in [0, n_in)
    const long long s = static_cast<long long>(stride);
    const long long off = static_cast<long long>(kk) - static_cast<long long>(pad);
    const long long l = off < 0 ? (-off + s - 1) / s : 0;
    const long long last = static_cast<long long>(n_in) - 1 - off;
    const long long h = last < 0 ? 0 : std::min(last / s + 1, static_cast<long long>(n_out));
    lo = static_cast<std::size_t>(l);
    hi = static_cast<std::size_t>(std::max(h, l));
}

// out[co, oy, ox] += K[co, ci, ky, kx] * in[ci, oy*s + ky - p, ox*s + kx - p]
void conv_forward_raw(const ConvGeometry& g, const double* in, const double* kernel, double* out) {
    const std::size_t kk = g.k * g.k;
    for (std::size_t co = 0; co < g.c_out; ++co) {
        double* o = out + co * g.h_out * g.w_out;
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            const double* src = in + ci * g.h_in * g.w_in;
            const double* kp = kernel + (co * g.c_in + ci) * kk;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                std::size_t oy0, oy1;
                tap_range(ky, g.h_in, g.h_out, g.stride, g.pad, oy0, oy1);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const double w = kp[ky * g.k + kx];
                    if (w == 0.0) continue;
                    std::size_t ox0, ox1;
                    tap_range(kx, g.w_in, g.w_out, g.stride, g.pad, ox0, ox1);
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        const double* row = src + (oy * g.stride + ky - g.pad) * g.w_in;
                        double* orow = o + oy * g.w_out;
                        if (g.stride == 1) {
                            const double* r = row + kx - g.pad;
                            for (std::size_t ox = ox0; ox < ox1; ++ox) orow[ox] += w * r[ox];
                        } else {
                            for (std::size_t ox = ox0; ox < ox1; ++ox) orow[ox] += w * row[ox * g.stride + kx - g.pad];
                        }
                    }
                }
            }
        }
    }
}

// gin[ci, iy, ix] += K[co, ci, ky, kx] * gout[co, oy, ox]
void conv_backward_input_raw(const ConvGeometry& g, const double* gout, const double* kernel, double* gin) {
    const std::size_t kk = g.k * g.k;
    for (std::size_t co = 0; co < g.c_out; ++co) {
        const double* go = gout + co * g.h_out * g.w_out;
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            double* dst = gin + ci * g.h_in * g.w_in;
            const double* kp = kernel + (co * g.c_in + ci) * kk;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                std::size_t oy0, oy1;
                tap_range(ky, g.h_in, g.h_out, g.stride, g.pad, oy0, oy1);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const double w = kp[ky * g.k + kx];
                    if (w == 0.0) continue;
                    std::size_t ox0, ox1;
                    tap_range(kx, g.w_in, g.w_out, g.stride, g.pad, ox0, ox1);
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        double* row = dst + (oy * g.stride + ky - g.pad) * g.w_in;
                        const double* grow = go + oy * g.w_out;
                        if (g.stride == 1) {
                            double* r = row + kx - g.pad;
                            for (std::size_t ox = ox0; ox < ox1; ++ox) r[ox] += w * grow[ox];
                        } else {
                            for (std::size_t ox = ox0; ox < ox1; ++ox) row[ox * g.stride + kx - g.pad] += w * grow[ox];
                        }
                    }
                }
            }
        }
    }
}

// gK[co, ci, ky, kx] += sum_{oy,ox} gout[co, oy, ox] * in[ci, iy, ix]
void conv_backward_kernel_raw(const ConvGeometry& g, const double* in, const double* gout, double* gkernel) {
    const std::size_t kk = g.k * g.k;
    for (std::size_t co = 0; co < g.c_out; ++co) {
        const double* go = gout + co * g.h_out * g.w_out;
        for (std::size_t ci = 0; ci < g.c_in; ++ci) {
            const double* src = in + ci * g.h_in * g.w_in;
            double* gk = gkernel + (co * g.c_in + ci) * kk;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                std::size_t oy0, oy1;
                tap_range(ky, g.h_in, g.h_out, g.stride, g.pad, oy0, oy1);
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    std::size_t ox0, ox1;
                    tap_range(kx, g.w_in, g.w_out, g.stride, g.pad, ox0, ox1);
                    double acc = 0.0;
                    for (std::size_t oy = oy0; oy < oy1; ++oy) {
                        const double* row = src + (oy * g.stride + ky - g.pad) * g.w_in;
                        const double* grow = go + oy * g.w_out;
                        if (g.stride == 1) {
                            const double* r = row + kx - g.pad;
                            for (std::size_t ox = ox0; ox < ox1; ++ox) acc += grow[ox] * r[ox];
                        } else {
                            for (std::size_t ox = ox0; ox < ox1; ++ox) acc += grow[ox] * row[ox * g.stride + kx - g.pad];
                        }
                    }
                    gk[ky * g.k + kx] += acc;
                }
            }
        }
    }
}

void add_channel_bias(double* out, const double* bias, std::size_t channels, std::size_t plane) {
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] += bias[c];
    }
}

void bias_grad(const double* gout, double* gb, std::size_t channels, std::size_t plane) {
    for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += gout[c * plane + i];
        gb[c] += acc;
    }
}

void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
    if (bias.defined() && (bias.shape().size() != 1 || bias.dim(0) != channels)) {
        throw std::invalid_argument(std::string(op) + ": bias shape " + shape_string(bias.shape()) +
                                    " does not match " + std::to_string(channels) + " channels");
    }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw std::invalid_argument("conv: stride must be >= 1");
    if (in + 2 * padding < kernel) throw std::invalid_argument("conv: kernel larger than padded input");
    return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (is.size() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W], got " + shape_string(is));
    if (ks.size() != 4 || ks[2] != ks[3]) {
        throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,k,k], got " + shape_string(ks));
    }
    if (ks[2] % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd");
    if (ks[1] != is[0]) {
        throw std::invalid_argument("conv2d: kernel expects " + std::to_string(ks[1]) + " input channels, got " +
                                    std::to_string(is[0]));
    }
    check_bias(bias, ks[0], "conv2d");
    ConvGeometry g{is[0], is[1], is[2], ks[0], conv_output_size(is[1], ks[2], stride, padding),
                   conv_output_size(is[2], ks[2], stride, padding), ks[2], stride, padding};

    std::vector<double> out(g.c_out * g.h_out * g.w_out, 0.0);
    conv_forward_raw(g, input.values().data(), kernel.values().data(), out.data());
    if (bias.defined()) add_channel_bias(out.data(), bias.values().data(), g.c_out, g.h_out * g.w_out);

    return make_op("conv2d", {g.c_out, g.h_out, g.w_out}, std::move(out), {input, kernel, bias},
                   [g, input, kernel, bias](Node& self) {
                       const double* go = self.grad.data();
                       if (input.requires_grad()) {
                           conv_backward_input_raw(g, go, kernel.values().data(), input.node().ensure_grad().data());
                       }
                       if (kernel.requires_grad()) {
                           conv_backward_kernel_raw(g, input.values().data(), go, kernel.node().ensure_grad().data());
                       }
                       if (bias.defined() && bias.requires_grad()) {
                           bias_grad(go, bias.node().ensure_grad().data(), g.c_out, g.h_out * g.w_out);
                       }
                   });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t padding, std::size_t out_h, std::size_t out_w) {
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (is.size() != 3) throw std::invalid_argument("conv_transpose2d: input must be [C,h,w]");
    if (ks.size() != 4 || ks[2] != ks[3] || ks[2] % 2 == 0) {
        throw std::invalid_argument("conv_transpose2d: kernel must be [Ca,Cb,k,k] with odd k");
    }
    if (ks[0] != is[0]) throw std::invalid_argument("conv_transpose2d: kernel/input channel mismatch");
    // Geometry of the forward conv this op is the adjoint of: [Cb,out_h,out_w] -> [Ca,h,w].
    ConvGeometry g{ks[1], out_h, out_w, ks[0], is[1], is[2], ks[2], stride, padding};
    if (conv_output_size(out_h, g.k, stride, padding) != is[1] ||
        conv_output_size(out_w, g.k, stride, padding) != is[2]) {
        throw std::invalid_argument("conv_transpose2d: output size " + std::to_string(out_h) + "x" +
                                    std::to_string(out_w) + " inconsistent with input " + shape_string(is));
    }
    check_bias(bias, g.c_in, "conv_transpose2d");

    std::vector<double> out(g.c_in * out_h * out_w, 0.0);
    conv_backward_input_raw(g, input.values().data(), kernel.values().data(), out.data());
    if (bias.defined()) add_channel_bias(out.data(), bias.values().data(), g.c_in, out_h * out_w);

    return make_op("conv_transpose2d", {g.c_in, out_h, out_w}, std::move(out), {input, kernel, bias},
                   [g, input, kernel, bias](Node& self) {
                       const double* go = self.grad.data();
                       if (input.requires_grad()) {
                           conv_forward_raw(g, go, kernel.values().data(), input.node().ensure_grad().data());
                       }
                       if (kernel.requires_grad()) {
                           conv_backward_kernel_raw(g, go, input.values().data(), kernel.node().ensure_grad().data());
                       }
                       if (bias.defined() && bias.requires_grad()) {
                           bias_grad(go, bias.node().ensure_grad().data(), g.c_in, g.h_in * g.w_in);
                       }
                   });
}

// ---- pointwise -------------------------------------------------------------

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = v[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-v[i])) : std::exp(v[i]) / (1.0 + std::exp(v[i]));
    }
    return make_op("sigmoid", x.shape(), std::move(out), {x}, [x](Node& self) {
        auto& g = x.node().ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = self.value[i];
            g[i] += self.grad[i] * s * (1.0 - s);
        }
    });
}

Tensor tanh(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v[i]);
    return make_op("tanh", x.shape(), std::move(out), {x}, [x](Node& self) {
        auto& g = x.node().ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double t = self.value[i];
            g[i] += self.grad[i] * (1.0 - t * t);
        }
    });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : slope * v[i];
    return make_op("leaky_relu", x.shape(), std::move(out), {x}, [x, slope](Node& self) {
        auto& g = x.node().ensure_grad();
        const auto v = x.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (v[i] > 0.0 ? 1.0 : slope);
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_op("add", a.shape(), std::move(out), {a, b}, [a, b](Node& self) {
        accumulate(a.node(), self.grad);
        accumulate(b.node(), self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_op("sub", a.shape(), std::move(out), {a, b}, [a, b](Node& self) {
        accumulate(a.node(), self.grad);
        if (b.requires_grad()) {
            auto& g = b.node().ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    std::vector<double> out(a.size());
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return make_op("hadamard", a.shape(), std::move(out), {a, b}, [a, b](Node& self) {
        if (a.requires_grad()) {
            auto& g = a.node().ensure_grad();
            const auto bv = b.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
        }
        if (b.requires_grad()) {
            auto& g = b.node().ensure_grad();
            const auto av = a.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    std::vector<double> out(x.values().begin(), x.values().end());
    for (auto& v : out) v *= factor;
    return make_op("scale", x.shape(), std::move(out), {x}, [x, factor](Node& self) {
        auto& g = x.node().ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    if (s.size() != 1) throw std::invalid_argument("scale_by: factor must be a single-element tensor");
    const double f = s.values()[0];
    std::vector<double> out(x.values().begin(), x.values().end());
    for (auto& v : out) v *= f;
    return make_op("scale_by", x.shape(), std::move(out), {x, s}, [x, s](Node& self) {
        const double f = s.values()[0];
        if (x.requires_grad()) {
            auto& g = x.node().ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * f;
        }
        if (s.requires_grad()) {
            const auto xv = x.values();
            double acc = 0.0;
            for (std::size_t i = 0; i < xv.size(); ++i) acc += self.grad[i] * xv[i];
            s.node().ensure_grad()[0] += acc;
        }
    });
}

Tensor log(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(v[i]);
    return make_op("log", x.shape(), std::move(out), {x}, [x](Node& self) {
        auto& g = x.node().ensure_grad();
        const auto v = x.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / v[i];
    });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(v[i], lo, hi);
    return make_op("clamp", x.shape(), std::move(out), {x}, [x, lo, hi](Node& self) {
        auto& g = x.node().ensure_grad();
        const auto v = x.values();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (v[i] >= lo && v[i] <= hi) g[i] += self.grad[i];
        }
    });
}

Tensor sqrt(const Tensor& x) {
    std::vector<double> out(x.size());
    const auto v = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(v[i]);
    return make_op("sqrt", x.shape(), std::move(out), {x}, [x](Node& self) {
        auto& g = x.node().ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (self.value[i] > 0.0) g[i] += self.grad[i] * 0.5 / self.value[i];
        }
    });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: nothing to concatenate");
    Shape shape = parts.front().shape();
    if (shape.empty()) throw std::invalid_argument("concat_channels: scalar input");
    std::size_t channels = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1)) {
            throw std::invalid_argument("concat_channels: non-channel dims differ: " + shape_string(s) + " vs " +
                                        shape_string(shape));
        }
        channels += s[0];
    }
    shape[0] = channels;
    std::vector<double> out;
    out.reserve(numel(shape));
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return make_op("concat_channels", shape, std::move(out), parts, [parts](Node& self) {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const std::size_t n = p.size();
            accumulate(p.node(), std::span<const double>(self.grad).subspan(offset, n));
            offset += n;
        }
    });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
    const auto& s = x.shape();
    if (s.empty() || begin + count > s[0] || count == 0) {
        throw std::invalid_argument("slice_channels: range out of bounds for " + shape_string(s));
    }
    const std::size_t plane = x.size() / s[0];
    Shape out_shape = s;
    out_shape[0] = count;
    std::vector<double> out(x.values().begin() + static_cast<std::ptrdiff_t>(begin * plane),
                            x.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * plane));
    return make_op("slice_channels", out_shape, std::move(out), {x}, [x, begin, plane](Node& self) {
        auto& g = x.node().ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * plane + i] += self.grad[i];
    });
}

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    return make_op("sum", {1}, {acc}, {x}, [x](Node& self) {
        auto& g = x.node().ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor sum_squares(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.values()) acc += v * v;
    return make_op("sum_squares", {1}, {acc}, {x}, [x](Node& self) {
        auto& g = x.node().ensure_grad();
        const auto v = x.values();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * v[i] * self.grad[0];
    });
}

Tensor dot(const Tensor& x, const Tensor& w) {
    require_same_shape(x, w, "dot");
    double acc = 0.0;
    const auto xv = x.values();
    const auto wv = w.values();
    for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * wv[i];
    return make_op("dot", {1}, {acc}, {x, w}, [x, w](Node& self) {
        const double go = self.grad[0];
        if (x.requires_grad()) {
            auto& g = x.node().ensure_grad();
            const auto wv = w.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * wv[i];
        }
        if (w.requires_grad()) {
            auto& g = w.node().ensure_grad();
            const auto xv = x.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * xv[i];
        }
    });
}

Tensor linear_map(const char* name, const Tensor& x, Shape out_shape, LinearFn forward, LinearFn adjoint) {
    auto out = forward(x.values());
    if (out.size() != numel(out_shape)) {
        throw std::invalid_argument(std::string(name) + ": forward produced " + std::to_string(out.size()) +
                                    " values for shape " + shape_string(out_shape));
    }
    return make_op(name, std::move(out_shape), std::move(out), {x},
                   [x, adjoint = std::move(adjoint), name](Node& self) {
                       const auto back = adjoint(self.grad);
                       if (back.size() != x.size()) {
                           throw std::logic_error(std::string(name) + ": adjoint size mismatch");
                       }
                       accumulate(x.node(), back);
                   });
}

}  // namespace convlr::ad
