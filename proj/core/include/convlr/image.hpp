#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace convlr {

using cplx = std::complex<double>;

/// Row-major 2-D complex image. Pixel (x, y) lives at values[y * width + x].
///
/// The k-space operators use a centered index grid: pixel x maps to the
/// spatial coordinate x - width/2, so the "center pixel" is (width/2, height/2).
class ComplexImage {
public:
    ComplexImage() = default;
    ComplexImage(std::size_t width, std::size_t height);
    ComplexImage(std::size_t width, std::size_t height, std::vector<cplx> values);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    cplx& at(std::size_t x, std::size_t y) { return values_[y * width_ + x]; }
    const cplx& at(std::size_t x, std::size_t y) const { return values_[y * width_ + x]; }
    cplx& operator[](std::size_t i) { return values_[i]; }
    const cplx& operator[](std::size_t i) const { return values_[i]; }

    std::span<cplx> values() noexcept { return values_; }
    std::span<const cplx> values() const noexcept { return values_; }

    bool same_shape(const ComplexImage& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }
    bool all_finite() const noexcept;

    std::vector<double> magnitude() const;

    friend bool operator==(const ComplexImage&, const ComplexImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<cplx> values_;
};

/// Inclusive axis-aligned pixel box.
struct RoiBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;

    int width() const noexcept { return x1 - x0 + 1; }
    int height() const noexcept { return y1 - y0 + 1; }
    bool contains(int x, int y) const noexcept { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    bool inside(std::size_t w, std::size_t h) const noexcept {
        return x0 >= 0 && y0 >= 0 && x1 < static_cast<int>(w) && y1 < static_cast<int>(h) && x0 <= x1 && y0 <= y1;
    }
    friend bool operator==(const RoiBox&, const RoiBox&) = default;
};

/// Crops `roi` out of a real raster of the given width.
std::vector<double> crop(std::span<const double> raster, std::size_t width, const RoiBox& roi);

/// Interleaved 2-channel real view of a complex image: [re plane, im plane].
std::vector<double> to_two_channel(const ComplexImage& image);
ComplexImage from_two_channel(std::span<const double> planes, std::size_t width, std::size_t height);

}  // namespace convlr
