// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace saccade {

// 64-bit FNV-1a, the project-wide content hash.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);
std::string hash_file_hex(const std::string& path);  // throws when unreadable

// Reproducibility record written next to every run's outputs: the exact
// configuration, seeds, input hashes, and produced files, plus a content id
// over the serialized record itself.
struct Manifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string dataset_hash;     // empty when the run used no dataset
  std::string checkpoint_hash;  // empty when the run loaded no checkpoint
  std::vector<std::string> outputs;
  std::string content_id;       // filled by write_manifest
};

// Serializes as JSON; computes content_id over the record with the id field
// blank, then writes the finished file.
void write_manifest(Manifest& m, const std::string& path);

}  // namespace saccade
