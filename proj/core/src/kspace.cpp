#include "convlr/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace convlr {

double golden_angle_degrees() noexcept { return 180.0 / std::numbers::phi; }

double readout_radius(std::size_t i, std::size_t n_readout) noexcept {
    return (static_cast<double>(i) - static_cast<double>(n_readout / 2)) / static_cast<double>(n_readout);
}

RadialTrajectory trajectory_from_angles(std::vector<double> spoke_angles, std::size_t n_readout,
                                        std::uint64_t start_index) {
    if (spoke_angles.empty()) throw std::invalid_argument("trajectory: need at least one spoke");
    if (n_readout < 2 || n_readout % 2 != 0) {
        throw std::invalid_argument("trajectory: n_readout must be even and >= 2");
    }
    RadialTrajectory traj;
    traj.n_readout = n_readout;
    traj.start_index = start_index;
    traj.coords.reserve(spoke_angles.size() * n_readout);
    for (double angle : spoke_angles) {
        if (!(angle >= 0.0 && angle < 180.0)) throw std::invalid_argument("trajectory: angle outside [0, 180)");
        const double theta = angle * std::numbers::pi / 180.0;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        for (std::size_t i = 0; i < n_readout; ++i) {
            const double r = readout_radius(i, n_readout);
            traj.coords.push_back({r * c, r * s});
        }
    }
    traj.spoke_angles = std::move(spoke_angles);
    return traj;
}

RadialTrajectory golden_angle_trajectory(std::size_t n_spokes, std::size_t n_readout,
                                         std::uint64_t start_index) {
    if (n_spokes == 0) throw std::invalid_argument("golden_angle_trajectory: n_spokes must be >= 1");
    const long double ga = 180.0L / std::numbers::phi_v<long double>;
    std::vector<double> angles(n_spokes);
    for (std::size_t j = 0; j < n_spokes; ++j) {
        const long double idx = static_cast<long double>(start_index + j);
        long double a = std::fmod(idx * ga, 180.0L);
        if (a < 0) a += 180.0L;
        double ad = static_cast<double>(a);
        if (ad >= 180.0) ad = 0.0;
        angles[j] = ad;
    }
    return trajectory_from_angles(std::move(angles), n_readout, start_index);
}

std::size_t nyquist_spoke_count(std::size_t image_size) noexcept {
    return static_cast<std::size_t>(std::ceil(std::numbers::pi / 2.0 * static_cast<double>(image_size)));
}

bool KSpaceData::all_finite() const noexcept {
    for (const auto& s : samples) {
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) return false;
    }
    return true;
}

NudftOperator::NudftOperator(RadialTrajectory trajectory, std::size_t width, std::size_t height)
    : trajectory_(std::move(trajectory)), width_(width), height_(height) {
    if (width_ == 0 || height_ == 0) throw std::invalid_argument("NudftOperator: empty image");
    const std::size_t m_count = trajectory_.n_samples();
    ex_re_.resize(m_count * width_);
    ex_im_.resize(m_count * width_);
    ey_re_.resize(m_count * height_);
    ey_im_.resize(m_count * height_);
    const double two_pi = 2.0 * std::numbers::pi;
    const double cx = static_cast<double>(width_ / 2);
    const double cy = static_cast<double>(height_ / 2);
    for (std::size_t m = 0; m < m_count; ++m) {
        const auto [kx, ky] = trajectory_.coords[m];
        for (std::size_t x = 0; x < width_; ++x) {
            const double phase = -two_pi * kx * (static_cast<double>(x) - cx);
            ex_re_[m * width_ + x] = std::cos(phase);
            ex_im_[m * width_ + x] = std::sin(phase);
        }
        for (std::size_t y = 0; y < height_; ++y) {
            const double phase = -two_pi * ky * (static_cast<double>(y) - cy);
            ey_re_[m * height_ + y] = std::cos(phase);
            ey_im_[m * height_ + y] = std::sin(phase);
        }
    }
}

std::vector<cplx> NudftOperator::forward(const ComplexImage& x) const {
    if (x.width() != width_ || x.height() != height_) {
        throw std::invalid_argument("nudft_forward: image dimensions do not match operator");
    }
    const std::size_t n = width_ * height_;
    std::vector<double> xr(n), xi(n);
    for (std::size_t p = 0; p < n; ++p) {
        xr[p] = x[p].real();
        xi[p] = x[p].imag();
    }
    const std::size_t m_count = n_samples();
    std::vector<cplx> out(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        const double* er = &ex_re_[m * width_];
        const double* ei = &ex_im_[m * width_];
        double acc_r = 0.0, acc_i = 0.0;
        for (std::size_t y = 0; y < height_; ++y) {
            const double* rr = &xr[y * width_];
            const double* ri = &xi[y * width_];
            double sr = 0.0, si = 0.0;
            for (std::size_t xx = 0; xx < width_; ++xx) {
                sr += er[xx] * rr[xx] - ei[xx] * ri[xx];
                si += er[xx] * ri[xx] + ei[xx] * rr[xx];
            }
            const double yr = ey_re_[m * height_ + y];
            const double yi = ey_im_[m * height_ + y];
            acc_r += yr * sr - yi * si;
            acc_i += yr * si + yi * sr;
        }
        out[m] = {acc_r, acc_i};
    }
    return out;
}

ComplexImage NudftOperator::adjoint(std::span<const cplx> y, std::span<const double> weights) const {
    const std::size_t m_count = n_samples();
    if (y.size() != m_count) throw std::invalid_argument("nudft_adjoint: sample count does not match trajectory");
    if (!weights.empty() && weights.size() != m_count) {
        throw std::invalid_argument("nudft_adjoint: weight count does not match trajectory");
    }
    const std::size_t n = width_ * height_;
    std::vector<double> outr(n, 0.0), outi(n, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
        const double w = weights.empty() ? 1.0 : weights[m];
        const double vr = w * y[m].real();
        const double vi = w * y[m].imag();
        if (vr == 0.0 && vi == 0.0) continue;
        const double* er = &ex_re_[m * width_];
        const double* ei = &ex_im_[m * width_];
        for (std::size_t yy = 0; yy < height_; ++yy) {
            // t = conj(ey) * v
            const double yr = ey_re_[m * height_ + yy];
            const double yi = ey_im_[m * height_ + yy];
            const double tr = yr * vr + yi * vi;
            const double ti = yr * vi - yi * vr;
            double* orow = &outr[yy * width_];
            double* oirow = &outi[yy * width_];
            for (std::size_t xx = 0; xx < width_; ++xx) {
                orow[xx] += tr * er[xx] + ti * ei[xx];
                oirow[xx] += ti * er[xx] - tr * ei[xx];
            }
        }
    }
    std::vector<cplx> values(n);
    for (std::size_t p = 0; p < n; ++p) values[p] = {outr[p], outi[p]};
    return ComplexImage(width_, height_, std::move(values));
}

ComplexImage NudftOperator::normal(const ComplexImage& x) const { return adjoint(forward(x)); }

KSpaceData nudft_forward(const ComplexImage& x, const RadialTrajectory& traj) {
    NudftOperator op(traj, x.width(), x.height());
    return KSpaceData{op.forward(x), traj};
}

ComplexImage nudft_adjoint(const KSpaceData& y, std::size_t width, std::size_t height,
                           std::optional<std::span<const double>> weights) {
    if (!y.consistent()) throw std::invalid_argument("nudft_adjoint: samples do not match trajectory");
    if (weights) {
        for (double w : *weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("nudft_adjoint: negative or NaN weight");
        }
    }
    NudftOperator op(y.trajectory, width, height);
    return op.adjoint(y.samples, weights.value_or(std::span<const double>{}));
}

std::vector<double> density_compensation(const RadialTrajectory& traj, std::size_t width,
                                         std::size_t height) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const std::size_t n_ro = traj.n_readout;
    const std::size_t n_spokes = traj.n_spokes();
    const double dr = 1.0 / static_cast<double>(n_ro);

    // Each spoke is two half-lines (theta and theta + pi). A half-line owns half
    // the angular gap to each neighbour, so uneven golden-angle spacing is weighted.
    std::vector<std::pair<double, std::size_t>> half_lines;
    half_lines.reserve(2 * n_spokes);
    for (std::size_t s = 0; s < n_spokes; ++s) {
        const double theta = std::fmod(traj.spoke_angles[s] * std::numbers::pi / 180.0, std::numbers::pi);
        const double a = theta < 0.0 ? theta + std::numbers::pi : theta;
        half_lines.push_back({a, 2 * s});
        half_lines.push_back({a + std::numbers::pi, 2 * s + 1});
    }
    std::sort(half_lines.begin(), half_lines.end());
    std::vector<double> span(2 * n_spokes);
    const std::size_t n_half = half_lines.size();
    for (std::size_t j = 0; j < n_half; ++j) {
        const double prev = half_lines[(j + n_half - 1) % n_half].first;
        const double next = half_lines[(j + 1) % n_half].first;
        const double here = half_lines[j].first;
        span[half_lines[j].second] =
            0.5 * (std::fmod(here - prev + two_pi, two_pi) + std::fmod(next - here + two_pi, two_pi));
    }

    std::vector<double> w(traj.n_samples());
    for (std::size_t s = 0; s < n_spokes; ++s) {
        for (std::size_t i = 0; i < n_ro; ++i) {
            const double r = readout_radius(i, n_ro);
            // Polar area element; the shared center sample splits the disc of radius dr/2.
            w[s * n_ro + i] = r == 0.0 ? std::numbers::pi * 0.25 * dr * dr / static_cast<double>(n_spokes)
                                       : std::abs(r) * dr * span[2 * s + (r > 0.0 ? 0 : 1)];
        }
    }

    // Unit least-squares gain on a smooth centered blob well inside the sampled disc.
    NudftOperator op(traj, width, height);
    ComplexImage blob(width, height);
    const double sigma = static_cast<double>(std::min(width, height)) / 8.0;
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            const double dx = static_cast<double>(x) - 0.5 * static_cast<double>(width);
            const double dy = static_cast<double>(y) - 0.5 * static_cast<double>(height);
            blob.at(x, y) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
    }
    const auto back = op.adjoint(op.forward(blob), w);
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < blob.size(); ++p) {
        num += (std::conj(back[p]) * blob[p]).real();
        den += std::norm(back[p]);
    }
    if (den > 0.0) {
        for (auto& v : w) v *= num / den;
    }
    return w;
}

ComplexImage regrid_reconstruct(const KSpaceData& y, std::size_t width, std::size_t height) {
    if (!y.consistent()) throw std::invalid_argument("regrid_reconstruct: samples do not match trajectory");
    const auto w = density_compensation(y.trajectory, width, height);
    NudftOperator op(y.trajectory, width, height);
    return op.adjoint(y.samples, w);
}

void add_complex_noise(KSpaceData& data, double stddev, std::uint64_t seed) {
    if (stddev < 0.0) throw std::invalid_argument("add_complex_noise: negative stddev");
    if (stddev == 0.0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& s : data.samples) s += cplx(dist(rng), dist(rng));
}

double estimate_max_eigenvalue(const NudftOperator& op, int iterations, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    ComplexImage v(op.width(), op.height());
    for (auto& p : v.values()) p = {dist(rng), dist(rng)};
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        double norm = 0.0;
        for (const auto& p : v.values()) norm += std::norm(p);
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (auto& p : v.values()) p /= norm;
        ComplexImage w = op.normal(v);
        double rayleigh = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) rayleigh += (std::conj(v[i]) * w[i]).real();
        lambda = rayleigh;
        v = std::move(w);
    }
    return lambda;
}

}  // namespace convlr
