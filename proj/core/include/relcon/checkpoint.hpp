#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relcon/tensor.hpp"

namespace relcon {

// Single-file checkpoint: one JSON header line (architecture hyperparameters
// plus a tensor manifest of name/shape/byte offset), a newline, then the raw
// little-endian float64 payloads in manifest order. Offsets are relative to
// the start of the payload section.

struct CheckpointEntry {
  std::string name;
  Tensor tensor;
};

struct Checkpoint {
  std::string hyper_json;  // serialized hyperparameter object
  std::vector<CheckpointEntry> entries;
};

void save_checkpoint(const std::string& path, const std::string& hyper_json,
                     const std::vector<CheckpointEntry>& entries);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace relcon
