#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "convlr/autodiff.hpp"

namespace convlr {

/// Ordered, named collection of learnable tensors.
class ParamSet {
public:
    struct Entry {
        std::string name;
        ad::Tensor tensor;
    };

    ad::Tensor& add(std::string name, ad::Tensor tensor);
    const ad::Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Entry>& entries() noexcept { return entries_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t total_values() const noexcept;

    /// Fresh leaves with copied values, so a worker can build its own graph.
    ParamSet clone() const;
    /// Copies values from `other` (names and shapes must match).
    void assign_values(const ParamSet& other);

    std::vector<ad::Tensor> tensors() const;

private:
    std::vector<Entry> entries_;
};

// CKPT: "CKPT" u32 count, then per entry
//   u32 name_len, name bytes, u32 ndim, u64 dims[ndim], f64 values[prod(dims)]
// All integers and floats little-endian.
std::vector<unsigned char> encode_checkpoint(const ParamSet& params);
ParamSet decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace convlr
