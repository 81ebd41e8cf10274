#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "convlr/image.hpp"

namespace convlr {

/// Golden angle in degrees, 180 / phi.
double golden_angle_degrees() noexcept;

/// Per-spoke angles and per-sample k-space positions (cycles/pixel) for one
/// frame. Samples are stored spoke-major: sample (s, i) is coords[s * n_readout + i].
struct RadialTrajectory {
    std::vector<double> spoke_angles;  // degrees in [0, 180)
    std::size_t n_readout = 0;
    std::uint64_t start_index = 0;
    std::vector<std::array<double, 2>> coords;

    std::size_t n_spokes() const noexcept { return spoke_angles.size(); }
    std::size_t n_samples() const noexcept { return coords.size(); }

    friend bool operator==(const RadialTrajectory&, const RadialTrajectory&) = default;
};

/// Radius of readout sample i: (i - n/2) / n.
double readout_radius(std::size_t i, std::size_t n_readout) noexcept;

/// Rebuilds sample coordinates from an explicit angle list.
RadialTrajectory trajectory_from_angles(std::vector<double> spoke_angles, std::size_t n_readout,
                                        std::uint64_t start_index);

RadialTrajectory golden_angle_trajectory(std::size_t n_spokes, std::size_t n_readout,
                                         std::uint64_t start_index);

/// Spokes needed for Nyquist coverage of an N x N image: ceil(pi/2 * N).
std::size_t nyquist_spoke_count(std::size_t image_size) noexcept;

struct KSpaceData {
    std::vector<cplx> samples;
    RadialTrajectory trajectory;

    bool consistent() const noexcept { return samples.size() == trajectory.n_samples(); }
    bool all_finite() const noexcept;
};

/// Exact non-uniform DFT on a fixed trajectory and image size. Holds
/// separable per-sample phase tables so repeated applications (data
/// consistency, iterative solvers) avoid recomputing exponentials.
///
///   forward:  y[m] = sum_p x[p] exp(-2 pi i k_m . p)
///   adjoint:  x[p] = sum_m w_m y[m] exp(+2 pi i k_m . p)
class NudftOperator {
public:
    NudftOperator(RadialTrajectory trajectory, std::size_t width, std::size_t height);

    const RadialTrajectory& trajectory() const noexcept { return trajectory_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t n_samples() const noexcept { return trajectory_.n_samples(); }

    std::vector<cplx> forward(const ComplexImage& x) const;
    ComplexImage adjoint(std::span<const cplx> y, std::span<const double> weights = {}) const;

    /// E^H E x without the intermediate allocation churn of two calls.
    ComplexImage normal(const ComplexImage& x) const;

private:
    RadialTrajectory trajectory_;
    std::size_t width_;
    std::size_t height_;
    // Row-major [sample][pixel column] and [sample][pixel row], split re/im.
    std::vector<double> ex_re_, ex_im_, ey_re_, ey_im_;
};

KSpaceData nudft_forward(const ComplexImage& x, const RadialTrajectory& traj);
ComplexImage nudft_adjoint(const KSpaceData& y, std::size_t width, std::size_t height,
                           std::optional<std::span<const double>> weights = std::nullopt);

/// Polar area-element density compensation: |k| dr times the angular span each
/// half-spoke covers, scaled for unit gain on a smooth centered blob.
std::vector<double> density_compensation(const RadialTrajectory& traj, std::size_t width,
                                         std::size_t height);

/// E^H W y with W from density_compensation.
ComplexImage regrid_reconstruct(const KSpaceData& y, std::size_t width, std::size_t height);

/// Adds i.i.d. complex Gaussian noise of the given per-component standard deviation.
void add_complex_noise(KSpaceData& data, double stddev, std::uint64_t seed);

/// Power-iteration estimate of sigma_max(E)^2.
double estimate_max_eigenvalue(const NudftOperator& op, int iterations = 30, std::uint64_t seed = 7);

}  // namespace convlr
