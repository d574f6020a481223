#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mixcam/tensor.hpp"

namespace mixcam {

// Ordered named-tensor container backing the "MXCM" checkpoint format:
//   magic "MXCM" | version u32 | count u32 | per tensor:
//   name length u32 + UTF-8 name | rank u32 | extents u64[rank] | f64 payload
// All integers and doubles are little-endian. Optimizer state lives in the
// same container under the reserved "adam/" prefix, run metadata under
// "meta/".
struct NamedTensors {
  std::vector<std::pair<std::string, Tensor>> items;

  void put(std::string name, Tensor t);
  const Tensor* find(const std::string& name) const;
  Tensor require(const std::string& name) const;  // errors when missing
  bool contains(const std::string& name) const { return find(name) != nullptr; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

}  // namespace mixcam
