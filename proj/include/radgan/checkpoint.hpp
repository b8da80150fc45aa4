#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radgan/nn.hpp"

namespace radgan {

inline constexpr uint32_t kCheckpointVersion = 1;

// Single-file container: magic, version, a JSON header, then named tensors in
// sorted name order. Identical state always serializes to identical bytes.
struct Archive {
  nlohmann::json header;
  std::map<std::string, Tensor> tensors;
};

void write_archive(const std::string& path, const Archive& archive);
Archive read_archive(const std::string& path);

// Snapshot of named parameters and buffers into an archive's tensor map.
void store_tensors(Archive& archive, const std::vector<nn::NamedParam>& params);
void store_tensors(Archive& archive, const std::vector<nn::NamedBuffer>& buffers);

// Copies archive tensors into the targets. Every target must be present with
// a matching shape.
void restore_tensors(const Archive& archive, const std::vector<nn::NamedParam>& params);
void restore_tensors(const Archive& archive, const std::vector<nn::NamedBuffer>& buffers);

// Throws with both fingerprints when the header's fingerprint differs.
void require_fingerprint(const Archive& archive, const std::string& expected, const std::string& path);

}  // namespace radgan
