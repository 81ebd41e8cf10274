#include "convlr/checkpoint.hpp"

#include <stdexcept>

#include "convlr/binary_io.hpp"

namespace convlr {

ad::Tensor& ParamSet::add(std::string name, ad::Tensor tensor) {
    if (contains(name)) throw std::invalid_argument("ParamSet: duplicate parameter " + name);
    entries_.push_back({std::move(name), std::move(tensor)});
    return entries_.back().tensor;
}

const ad::Tensor& ParamSet::get(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw std::out_of_range("ParamSet: no parameter named " + name);
}

bool ParamSet::contains(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

std::size_t ParamSet::total_values() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

ParamSet ParamSet::clone() const {
    ParamSet out;
    out.entries_.reserve(entries_.size());
    for (const auto& e : entries_) {
        const auto v = e.tensor.values();
        auto t = e.tensor.requires_grad() ? ad::Tensor::parameter(e.tensor.shape(), {v.begin(), v.end()})
                                          : ad::Tensor::constant(e.tensor.shape(), {v.begin(), v.end()});
        out.entries_.push_back({e.name, std::move(t)});
    }
    return out;
}

void ParamSet::assign_values(const ParamSet& other) {
    if (other.entries_.size() != entries_.size()) throw std::invalid_argument("ParamSet: size mismatch");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        auto& dst = entries_[i];
        const auto& src = other.entries_[i];
        if (dst.name != src.name || dst.tensor.shape() != src.tensor.shape()) {
            throw std::invalid_argument("ParamSet: entry mismatch at " + dst.name);
        }
        auto d = dst.tensor.mutable_values();
        const auto s = src.tensor.values();
        std::copy(s.begin(), s.end(), d.begin());
    }
}

std::vector<ad::Tensor> ParamSet::tensors() const {
    std::vector<ad::Tensor> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor);
    return out;
}

std::vector<unsigned char> encode_checkpoint(const ParamSet& params) {
    detail::ByteWriter w;
    w.raw("CKPT", 4);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& e : params.entries()) {
        w.u32(static_cast<std::uint32_t>(e.name.size()));
        w.raw(e.name.data(), e.name.size());
        const auto& shape = e.tensor.shape();
        w.u32(static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) w.u64(d);
        for (double v : e.tensor.values()) w.f64(v);
    }
    return w.take();
}

ParamSet decode_checkpoint(const std::vector<unsigned char>& bytes) {
    detail::ByteReader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::string(magic, 4) != "CKPT") throw std::runtime_error("decode_checkpoint: bad magic");
    const std::uint32_t count = r.u32();
    ParamSet out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = r.u32();
        if (len > r.remaining()) throw std::runtime_error("decode_checkpoint: truncated name");
        std::string name(len, '\0');
        r.raw(name.data(), len);
        const std::uint32_t ndim = r.u32();
        ad::Shape shape(ndim);
        for (auto& d : shape) d = r.u64();
        const std::size_t n = ad::numel(shape);
        if (n * 8 > r.remaining()) throw std::runtime_error("decode_checkpoint: truncated payload for " + name);
        std::vector<double> values(n);
        for (auto& v : values) v = r.f64();
        out.add(std::move(name), ad::Tensor::parameter(std::move(shape), std::move(values)));
    }
    if (r.remaining() != 0) throw std::runtime_error("decode_checkpoint: trailing bytes");
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
    write_file_bytes(path, encode_checkpoint(params));
}

ParamSet load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace convlr
