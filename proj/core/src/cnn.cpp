// SPDX-License-Identifier: Apache-2.0

#include "saccade/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace saccade {

namespace {

Tensor uniform_init(Shape shape, float limit, Rng& rng) {
  Tensor t = Tensor::zeros(shape, true);
  float* p = t.data();
  for (std::size_t i = 0; i < t.numel(); ++i) p[i] = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

ConvLayer make_conv(int in_c, int out_c, Rng& rng) {
  const float limit = std::sqrt(6.0f / (static_cast<float>(in_c) * 9.0f));
  ConvLayer l;
  l.w = uniform_init({out_c, in_c, 3, 3}, limit, rng);
  l.b = Tensor::zeros({out_c}, true);
  return l;
}

Tensor make_dense_w(int in_d, int out_d, Rng& rng) {
  const float limit = std::sqrt(6.0f / static_cast<float>(in_d));
  return uniform_init({in_d, out_d}, limit, rng);
}

ad::GruParams make_gru(int in_d, int hidden, Rng& rng) {
  ad::GruParams p;
  p.wz = make_dense_w(in_d, hidden, rng);
  p.uz = make_dense_w(hidden, hidden, rng);
  p.bz = Tensor::zeros({hidden}, true);
  p.wr = make_dense_w(in_d, hidden, rng);
  p.ur = make_dense_w(hidden, hidden, rng);
  p.br = Tensor::zeros({hidden}, true);
  p.wc = make_dense_w(in_d, hidden, rng);
  p.uc = make_dense_w(hidden, hidden, rng);
  p.bc = Tensor::zeros({hidden}, true);
  return p;
}

std::vector<Tensor> ConvStack::forward_all(Tape& tape, Tensor x) const {
  std::vector<Tensor> maps;
  maps.reserve(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = ad::relu(tape, ad::conv2d(tape, x, layers[i].w, layers[i].b));
    maps.push_back(x);
    if (std::find(pool_after.begin(), pool_after.end(), static_cast<int>(i)) != pool_after.end())
      x = ad::maxpool2(tape, x);
  }
  return maps;
}

Tensor ConvStack::forward(Tape& tape, Tensor x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = ad::relu(tape, ad::conv2d(tape, x, layers[i].w, layers[i].b));
    if (std::find(pool_after.begin(), pool_after.end(), static_cast<int>(i)) != pool_after.end())
      x = ad::maxpool2(tape, x);
  }
  return x;
}

void ConvStack::collect(const std::string& prefix, ParamList& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back(prefix + "." + std::to_string(i) + ".w", layers[i].w);
    out.emplace_back(prefix + "." + std::to_string(i) + ".b", layers[i].b);
  }
}

ConvStack make_stack(int in_c, const std::vector<int>& channels,
                     const std::vector<int>& pool_after, Rng& rng) {
  check(!channels.empty(), "make_stack: need at least one conv layer");
  ConvStack s;
  s.pool_after = pool_after;
  int c = in_c;
  for (int k : channels) {
    check(k > 0, "make_stack: channel counts must be positive");
    s.layers.push_back(make_conv(c, k, rng));
    c = k;
  }
  return s;
}

void collect_gru(const ad::GruParams& p, const std::string& prefix, ParamList& out) {
  out.emplace_back(prefix + ".wz", p.wz);
  out.emplace_back(prefix + ".uz", p.uz);
  out.emplace_back(prefix + ".bz", p.bz);
  out.emplace_back(prefix + ".wr", p.wr);
  out.emplace_back(prefix + ".ur", p.ur);
  out.emplace_back(prefix + ".br", p.br);
  out.emplace_back(prefix + ".wc", p.wc);
  out.emplace_back(prefix + ".uc", p.uc);
  out.emplace_back(prefix + ".bc", p.bc);
}

void load_params(const ParamList& dst, const ParamList& saved) {
  std::unordered_map<std::string, Tensor> by_name;
  for (const auto& [name, t] : saved) by_name.emplace(name, t);
  for (const auto& [name, t] : dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("load_params: missing parameter " + name);
    check(it->second.shape() == t.shape(), "load_params: shape mismatch for " + name + ", have " +
                                               shape_str(it->second.shape()) + " want " +
                                               shape_str(t.shape()));
    Tensor target = t;  // shared handle; writes through to the model parameter
    std::memcpy(target.data(), it->second.data(), sizeof(float) * t.numel());
  }
}

}  // namespace saccade
