#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cfx/numkit/tensor.hpp"

namespace cfx::nk {

// Checkpoint container layout (all integers little-endian):
//   "CFXM" | u32 version | u64 tensor count |
//   per tensor: u32 name bytes | UTF-8 name | u32 rank | u64 dims[rank] |
//               float32 payload[product(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

// Adds `prefix` to every name.
NamedTensors prefixed(const NamedTensors& tensors, const std::string& prefix);
// Keeps tensors whose name starts with `prefix`, stripping it.
NamedTensors with_prefix(const NamedTensors& tensors, const std::string& prefix);

}  // namespace cfx::nk
