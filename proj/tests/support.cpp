#include "support.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

namespace convlr::oracle {

ComplexImage random_image(std::size_t width, std::size_t height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    ComplexImage img(width, height);
    for (auto& v : img.values()) v = {d(rng), d(rng)};
    return img;
}

std::vector<cplx> random_samples(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<cplx> v(n);
    for (auto& x : v) x = {d(rng), d(rng)};
    return v;
}

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

std::vector<cplx> direct_nudft(const ComplexImage& x, std::span<const std::array<double, 2>> coords) {
    const double cx = static_cast<double>(x.width() / 2);
    const double cy = static_cast<double>(x.height() / 2);
    std::vector<cplx> y(coords.size());
    for (std::size_t m = 0; m < coords.size(); ++m) {
        cplx acc = 0.0;
        for (std::size_t py = 0; py < x.height(); ++py) {
            for (std::size_t px = 0; px < x.width(); ++px) {
                const double phase = -2.0 * std::numbers::pi *
                                     (coords[m][0] * (static_cast<double>(px) - cx) +
                                      coords[m][1] * (static_cast<double>(py) - cy));
                acc += x.at(px, py) * std::polar(1.0, phase);
            }
        }
        y[m] = acc;
    }
    return y;
}

RadialTrajectory cartesian_trajectory(std::size_t width, std::size_t height) {
    RadialTrajectory t;
    t.n_readout = width;
    for (std::size_t v = 0; v < height; ++v) {
        for (std::size_t u = 0; u < width; ++u) {
            t.coords.push_back({(static_cast<double>(u) - static_cast<double>(width / 2)) / static_cast<double>(width),
                                (static_cast<double>(v) - static_cast<double>(height / 2)) / static_cast<double>(height)});
        }
    }
    t.spoke_angles.assign(height, 0.0);
    return t;
}

namespace {

// exp(-2 pi i (a*b mod n) / n) with the product reduced exactly in integers.
cplx twiddle(long a, long b, long n) {
    long r = (a * b) % n;
    if (r < 0) r += n;
    return std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n));
}

}  // namespace

std::vector<cplx> cartesian_dft(const ComplexImage& x) {
    const long w = static_cast<long>(x.width()), h = static_cast<long>(x.height());
    std::vector<cplx> y(x.size());
    for (long v = 0; v < h; ++v) {
        for (long u = 0; u < w; ++u) {
            cplx acc = 0.0;
            for (long py = 0; py < h; ++py) {
                for (long px = 0; px < w; ++px) {
                    acc += x.at(px, py) * twiddle(u - w / 2, px - w / 2, w) * twiddle(v - h / 2, py - h / 2, h);
                }
            }
            y[v * w + u] = acc;
        }
    }
    return y;
}

ComplexImage cartesian_dft_adjoint(std::span<const cplx> y, std::size_t width, std::size_t height) {
    const long w = static_cast<long>(width), h = static_cast<long>(height);
    ComplexImage x(width, height);
    for (long py = 0; py < h; ++py) {
        for (long px = 0; px < w; ++px) {
            cplx acc = 0.0;
            for (long v = 0; v < h; ++v) {
                for (long u = 0; u < w; ++u) {
                    acc += y[v * w + u] *
                           std::conj(twiddle(u - w / 2, px - w / 2, w) * twiddle(v - h / 2, py - h / 2, h));
                }
            }
            x.at(px, py) = acc;
        }
    }
    return x;
}

double power_iteration(const NudftOperator& op, int iterations, std::uint64_t seed) {
    ComplexImage v = random_image(op.width(), op.height(), seed);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const double n = norm2(v.values());
        for (auto& p : v.values()) p /= n;
        const auto ev = op.forward(v);
        lambda = norm2(ev) * norm2(ev);  // ||E v||^2 with ||v|| = 1
        v = op.adjoint(ev);
    }
    return lambda;
}

ComplexImage cg_least_squares(const NudftOperator& op, std::span<const cplx> y, int iterations) {
    ComplexImage x(op.width(), op.height());
    ComplexImage r = op.adjoint(y);
    ComplexImage p = r;
    double rr = norm2(r.values());
    rr *= rr;
    for (int k = 0; k < iterations && rr > 0.0; ++k) {
        const auto ap = op.normal(p);
        const double pap = inner(p.values(), ap.values()).real();
        const double a = rr / pap;
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        double rn = norm2(r.values());
        rn *= rn;
        const double beta = rn / rr;
        rr = rn;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    return x;
}

std::vector<double> direct_conv2d(std::span<const double> input, std::size_t cin, std::size_t h, std::size_t w,
                                  std::span<const double> kernel, std::size_t cout, std::size_t k,
                                  std::span<const double> bias, std::size_t stride, std::size_t pad) {
    const std::size_t oh = (h + 2 * pad - k) / stride + 1;
    const std::size_t ow = (w + 2 * pad - k) / stride + 1;
    std::vector<double> out(cout * oh * ow, 0.0);
    for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bias.empty() ? 0.0 : bias[o];
                for (std::size_t c = 0; c < cin; ++c) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                            acc += kernel[((o * cin + c) * k + ky) * k + kx] * input[(c * h + iy) * w + ix];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double norm2(std::span<const cplx> a) {
    double s = 0.0;
    for (const auto& v : a) s += std::norm(v);
    return std::sqrt(s);
}

double rel_error(std::span<const cplx> a, std::span<const cplx> b) {
    double e = 0.0, r = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        e += std::norm(a[i] - b[i]);
        r += std::norm(b[i]);
    }
    return std::sqrt(e / r);
}

double rel_error(const ComplexImage& a, const ComplexImage& b) { return rel_error(a.values(), b.values()); }

double central_difference(const ad::GraphBuilder& f, std::vector<ad::Tensor> leaves, std::size_t leaf,
                          std::size_t coord, double eps) {
    auto vals = leaves[leaf].mutable_values();
    const double orig = vals[coord];
    vals[coord] = orig + eps;
    const double plus = f(leaves).item();
    vals[coord] = orig - eps;
    const double minus = f(leaves).item();
    vals[coord] = orig;
    return (plus - minus) / (2.0 * eps);
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("convlr_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    const std::vector<char> da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::vector<char> db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return da == db;
}

bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::size_t count_a = 0, count_b = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        ++count_a;
        if (!files_identical(e.path(), b / std::filesystem::relative(e.path(), a))) return false;
    }
    for (const auto& e : std::filesystem::recursive_directory_iterator(b)) {
        if (e.is_regular_file()) ++count_b;
    }
    return count_a == count_b && count_a > 0;
}

}  // namespace convlr::oracle
