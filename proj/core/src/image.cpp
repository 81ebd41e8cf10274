#include "convlr/image.hpp"

#include <cmath>
#include <stdexcept>

namespace convlr {

ComplexImage::ComplexImage(std::size_t width, std::size_t height)
    : width_(width), height_(height), values_(width * height) {}

ComplexImage::ComplexImage(std::size_t width, std::size_t height, std::vector<cplx> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != width_ * height_) {
        throw std::invalid_argument("ComplexImage: value count does not match width*height");
    }
}

bool ComplexImage::all_finite() const noexcept {
    for (const auto& v : values_) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
}

std::vector<double> ComplexImage::magnitude() const {
    std::vector<double> out(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = std::abs(values_[i]);
    return out;
}

std::vector<double> crop(std::span<const double> raster, std::size_t width, const RoiBox& roi) {
    if (width == 0 || raster.size() % width != 0) {
        throw std::invalid_argument("crop: raster size is not a multiple of width");
    }
    const std::size_t height = raster.size() / width;
    if (!roi.inside(width, height)) throw std::out_of_range("crop: roi outside image bounds");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(roi.width() * roi.height()));
    for (int y = roi.y0; y <= roi.y1; ++y) {
        for (int x = roi.x0; x <= roi.x1; ++x) {
            out.push_back(raster[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)]);
        }
    }
    return out;
}

std::vector<double> to_two_channel(const ComplexImage& image) {
    const std::size_t n = image.size();
    std::vector<double> planes(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        planes[i] = image[i].real();
        planes[n + i] = image[i].imag();
    }
    return planes;
}

ComplexImage from_two_channel(std::span<const double> planes, std::size_t width, std::size_t height) {
    const std::size_t n = width * height;
    if (planes.size() != 2 * n) throw std::invalid_argument("from_two_channel: expected 2*width*height values");
    std::vector<cplx> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = {planes[i], planes[n + i]};
    return ComplexImage(width, height, std::move(values));
}

}  // namespace convlr
