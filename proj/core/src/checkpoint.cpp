// SPDX-License-Identifier: Apache-2.0

#include "saccade/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace saccade {

namespace {

constexpr char kMagic[8] = {'S', 'C', 'D', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  const std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamList& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  put_u32(os, kVersion);
  put_u64(os, params.size());
  for (const auto& [name, t] : params) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) put_u32(os, static_cast<std::uint32_t>(t.dim(d)));
    static_assert(sizeof(float) == 4);
    // float32 payload; the build targets little-endian hosts
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

ParamList load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic: " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t count = get_u64(is);
  ParamList params;
  params.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw std::runtime_error("checkpoint: implausible rank");
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(get_u32(is));
    Tensor t = Tensor::zeros(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!is) throw std::runtime_error("checkpoint: truncated payload in " + path);
    params.emplace_back(std::move(name), std::move(t));
  }
  return params;
}

}  // namespace saccade
