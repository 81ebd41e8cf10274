#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "convlr/image.hpp"
#include "convlr/kspace.hpp"

namespace convlr {

// Flat little-endian formats.
//
//   KSP1: "KSP1" u32 n_spokes u32 n_readout u64 start_index
//         f64 angle[n_spokes] then f64 (re, im) per sample.
//   IMG1: "IMG1" u32 width u32 height u32 reserved(0)
//         f64 (re, im) per pixel, row-major.

std::vector<unsigned char> encode_kspace(const KSpaceData& data);
KSpaceData decode_kspace(const std::vector<unsigned char>& bytes);

std::vector<unsigned char> encode_image(const ComplexImage& image);
ComplexImage decode_image(const std::vector<unsigned char>& bytes);

void write_kspace(const std::filesystem::path& path, const KSpaceData& data);
KSpaceData read_kspace(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const ComplexImage& image);
ComplexImage read_image(const std::filesystem::path& path);

/// 8-bit binary PGM of the magnitude, scaled by `scale` then clamped to [0, 1].
void write_pgm(const std::filesystem::path& path, const ComplexImage& image, double scale = 1.0);

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

namespace detail {

class ByteWriter {
public:
    void raw(const void* data, std::size_t n);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    std::vector<unsigned char> take() { return std::move(buf_); }

private:
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}
    void raw(void* out, std::size_t n);
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail
}  // namespace convlr
