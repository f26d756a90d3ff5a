#pragma once

#include <string>
#include <utility>
#include <vector>

#include "evsr/network.hpp"
#include "evsr/tensor.hpp"

namespace evsr {

// On-disk model snapshot. Binary little-endian layout:
//   "E2SR" | u32 version (1) | u32 tensor count | tensors...
// each tensor: u32 name length | name bytes | u32 ndim | ndim x u32 dims |
// float32 payload. The architecture rides along as a pseudo-tensor named
// "arch" whose 8 entries hold the ArchConfig fields in declaration order, so
// a file fully describes the network it restores.
struct Checkpoint {
    ArchConfig arch;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

void save_checkpoint(const std::string& path, const ArchConfig& arch,
                     const std::vector<std::pair<std::string, Tensor<float>>>& tensors);
void save_checkpoint(const std::string& path, const SRNet<float>& model);

// Parses and validates a snapshot. Throws IoError naming the file on a bad
// magic, unsupported version, or truncation.
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into an existing model. Every model parameter
// must be present with a matching shape, and the stored architecture must
// equal the model's. Throws Error otherwise.
void load_into(const Checkpoint& checkpoint, SRNet<float>& model);

// Builds a model of the stored architecture and restores its weights.
SRNet<float> model_from_checkpoint(const Checkpoint& checkpoint);

} // namespace evsr
