#include "convlr/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace convlr {
namespace detail {

namespace {
template <typename T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}
}  // namespace

void ByteWriter::raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
}
void ByteWriter::u32(std::uint32_t v) {
    v = to_little(v);
    raw(&v, sizeof v);
}
void ByteWriter::u64(std::uint64_t v) {
    v = to_little(v);
    raw(&v, sizeof v);
}
void ByteWriter::f64(double v) {
    auto bits = to_little(std::bit_cast<std::uint64_t>(v));
    raw(&bits, sizeof bits);
}

void ByteReader::raw(void* out, std::size_t n) {
    if (remaining() < n) throw std::runtime_error("binary decode: truncated input");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
}
std::uint32_t ByteReader::u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return to_little(v);
}
std::uint64_t ByteReader::u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return to_little(v);
}
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

}  // namespace detail

namespace {
void expect_magic(detail::ByteReader& r, const char* magic) {
    char m[4];
    r.raw(m, 4);
    if (std::memcmp(m, magic, 4) != 0) {
        throw std::runtime_error(std::string("binary decode: bad magic, expected ") + magic);
    }
}
}  // namespace

std::vector<unsigned char> encode_kspace(const KSpaceData& data) {
    if (!data.consistent()) throw std::invalid_argument("encode_kspace: samples do not match trajectory");
    const auto& t = data.trajectory;
    detail::ByteWriter w;
    w.raw("KSP1", 4);
    w.u32(static_cast<std::uint32_t>(t.n_spokes()));
    w.u32(static_cast<std::uint32_t>(t.n_readout));
    w.u64(t.start_index);
    for (double a : t.spoke_angles) w.f64(a);
    for (const auto& s : data.samples) {
        w.f64(s.real());
        w.f64(s.imag());
    }
    return w.take();
}

KSpaceData decode_kspace(const std::vector<unsigned char>& bytes) {
    detail::ByteReader r(bytes);
    expect_magic(r, "KSP1");
    const std::size_t n_spokes = r.u32();
    const std::size_t n_readout = r.u32();
    const std::uint64_t start = r.u64();
    const std::size_t n_samples = n_spokes * n_readout;
    if (r.remaining() != 8 * n_spokes + 16 * n_samples) {
        throw std::runtime_error("decode_kspace: payload size does not match header");
    }
    std::vector<double> angles(n_spokes);
    for (auto& a : angles) a = r.f64();
    KSpaceData out;
    out.trajectory = trajectory_from_angles(std::move(angles), n_readout, start);
    out.samples.resize(n_samples);
    for (auto& s : out.samples) {
        const double re = r.f64();
        const double im = r.f64();
        s = {re, im};
    }
    return out;
}

std::vector<unsigned char> encode_image(const ComplexImage& image) {
    detail::ByteWriter w;
    w.raw("IMG1", 4);
    w.u32(static_cast<std::uint32_t>(image.width()));
    w.u32(static_cast<std::uint32_t>(image.height()));
    w.u32(0);
    for (const auto& v : image.values()) {
        w.f64(v.real());
        w.f64(v.imag());
    }
    return w.take();
}

ComplexImage decode_image(const std::vector<unsigned char>& bytes) {
    detail::ByteReader r(bytes);
    expect_magic(r, "IMG1");
    const std::size_t width = r.u32();
    const std::size_t height = r.u32();
    (void)r.u32();
    if (r.remaining() != 16 * width * height) {
        throw std::runtime_error("decode_image: payload size does not match header");
    }
    std::vector<cplx> values(width * height);
    for (auto& v : values) {
        const double re = r.f64();
        const double im = r.f64();
        v = {re, im};
    }
    return ComplexImage(width, height, std::move(values));
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_kspace(const std::filesystem::path& path, const KSpaceData& data) {
    write_file_bytes(path, encode_kspace(data));
}
KSpaceData read_kspace(const std::filesystem::path& path) { return decode_kspace(read_file_bytes(path)); }

void write_image(const std::filesystem::path& path, const ComplexImage& image) {
    write_file_bytes(path, encode_image(image));
}
ComplexImage read_image(const std::filesystem::path& path) { return decode_image(read_file_bytes(path)); }

void write_pgm(const std::filesystem::path& path, const ComplexImage& image, double scale) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
    for (const auto& v : image.values()) {
        const double m = std::clamp(std::abs(v) * scale, 0.0, 1.0);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(m * 255.0))));
    }
}

}  // namespace convlr
