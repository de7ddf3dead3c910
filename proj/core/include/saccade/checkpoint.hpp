// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "saccade/tensor.hpp"

namespace saccade {

// Ordered, named parameter set as stored in a checkpoint file.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

// Flat binary layout: 8-byte magic, u32 version, u64 parameter count, then one
// record per parameter (u32 name length, name bytes, u32 rank, u32 extents,
// float32 payload). All integers and floats little-endian. Round-trips
// bit-exactly.
void save_checkpoint(const std::string& path, const ParamList& params);

// Throws std::runtime_error on missing file, bad magic, version mismatch, or
// truncated payload.
ParamList load_checkpoint(const std::string& path);

}  // namespace saccade
