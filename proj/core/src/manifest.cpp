// SPDX-License-Identifier: Apache-2.0
#include "saccade/manifest.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace saccade {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string hash_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash: cannot read " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

namespace {

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["dataset_hash"] = m.dataset_hash;
  j["checkpoint_hash"] = m.checkpoint_hash;
  j["outputs"] = m.outputs;
  j["content_id"] = m.content_id;
  return j;
}

}  // namespace

void write_manifest(Manifest& m, const std::string& path) {
  m.content_id.clear();
  const std::string body = to_json(m).dump(2);
  m.content_id = hex64(fnv1a(body.data(), body.size()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("manifest: cannot write " + path);
  out << to_json(m).dump(2) << "\n";
  if (!out) throw std::runtime_error("manifest: short write to " + path);
}

}  // namespace saccade
