#pragma once

#include "cider/autodiff.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cider::ad {

struct NamedTensor {
    std::string name;
    Tensor<float> tensor;
};

/// "CKPT" container: magic, u32 version, u32 count, then per tensor
/// u32 name length, UTF-8 name, u32 rank, u32 dims[rank], float32 data.
/// All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

}  // namespace cider::ad
