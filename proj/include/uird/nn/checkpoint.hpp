#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "uird/nn/layers.hpp"

namespace uird::nn {

// Named tensors plus string metadata. Serialized as a versioned
// little-endian binary container; doubles are stored bit-for-bit.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
  const std::string& meta(const std::string& key) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void export_parameters(const ParameterSet& params, Checkpoint& ckpt);
// Copies values by name; every parameter in the set must be present with an
// identical shape.
void import_parameters(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace uird::nn
