#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "convlr/autodiff.hpp"
#include "convlr/image.hpp"
#include "convlr/kspace.hpp"

// Independent reference implementations used as test oracles. None of these
// share code paths with the library beyond the public operator interfaces.

namespace convlr::oracle {

ComplexImage random_image(std::size_t width, std::size_t height, std::uint64_t seed);
std::vector<cplx> random_samples(std::size_t n, std::uint64_t seed);
std::vector<double> random_values(std::size_t n, std::uint64_t seed, double scale = 1.0);

/// Direct double sum over pixels, y[m] = sum_p x[p] exp(-2 pi i k_m . (p - c)).
std::vector<cplx> direct_nudft(const ComplexImage& x, std::span<const std::array<double, 2>> coords);

/// Cartesian grid of centered integer frequencies, one sample per pixel.
RadialTrajectory cartesian_trajectory(std::size_t width, std::size_t height);

/// Ordinary 2-D DFT on centered indices with exact integer phase reduction.
std::vector<cplx> cartesian_dft(const ComplexImage& x);
/// Conjugate transpose of cartesian_dft.
ComplexImage cartesian_dft_adjoint(std::span<const cplx> y, std::size_t width, std::size_t height);

/// sigma_max(E)^2 by power iteration on E^H E from a seeded start.
double power_iteration(const NudftOperator& op, int iterations = 200, std::uint64_t seed = 99);

/// Conjugate gradient on the normal equations E^H E x = E^H y from x = 0.
ComplexImage cg_least_squares(const NudftOperator& op, std::span<const cplx> y, int iterations);

/// Direct-summation cross-correlation. input [cin,h,w], kernel [cout,cin,k,k].
std::vector<double> direct_conv2d(std::span<const double> input, std::size_t cin, std::size_t h, std::size_t w,
                                  std::span<const double> kernel, std::size_t cout, std::size_t k,
                                  std::span<const double> bias, std::size_t stride, std::size_t pad);

/// ||a - b|| / ||b|| on complex images.
double rel_error(const ComplexImage& a, const ComplexImage& b);
double rel_error(std::span<const cplx> a, std::span<const cplx> b);

cplx inner(std::span<const cplx> a, std::span<const cplx> b);  // sum conj(a) b
double norm2(std::span<const cplx> a);

/// Central finite-difference derivative of a scalar function of one leaf coordinate.
double central_difference(const ad::GraphBuilder& f, std::vector<ad::Tensor> leaves, std::size_t leaf,
                          std::size_t coord, double eps);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

bool files_identical(const std::filesystem::path& a, const std::filesystem::path& b);
/// Every regular file under a matches a file with the same relative path under b, byte for byte.
bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace convlr::oracle
