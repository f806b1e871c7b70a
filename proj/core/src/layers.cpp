#include "walnet/layers.hpp"

#include <cmath>

#include "walnet/errors.hpp"

namespace walnet::nn {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor ParameterStore::add(std::string name, std::vector<int> dims, Init init, int fan_in,
                           Rng& rng) {
  if (find(name)) throw InternalError("duplicate parameter name " + name);
  Tensor t = Tensor::zeros(std::move(dims), true);
  if (init != Init::zeros) {
    const double gain = init == Init::he_normal ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / std::max(fan_in, 1));
    for (Real& v : t.mutable_values()) v = rng.normal(0.0, stddev);
  }
  params_.push_back({std::move(name), t});
  return t;
}

const NamedParameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

std::uint64_t ParameterStore::architecture_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a(p.name.data(), p.name.size(), h);
    for (int d : p.tensor.dims()) h = fnv1a(&d, sizeof d, h);
    const char sep = ';';
    h = fnv1a(&sep, 1, h);
  }
  return h;
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name, int in_ch, int out_ch, int kernel,
               Conv2dSpec spec, Rng& rng, bool with_bias, Init init)
    : spec_(spec) {
  const int fan_in = in_ch * kernel * kernel;
  weight_ = store.add(name + ".weight", {out_ch, in_ch, kernel, kernel}, init, fan_in, rng);
  if (with_bias) bias_ = store.add(name + ".bias", {out_ch}, Init::zeros, fan_in, rng);
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng,
               Init init) {
  weight_ = store.add(name + ".weight", {out, in}, init, in, rng);
  bias_ = store.add(name + ".bias", {out}, Init::zeros, in, rng);
}

}  // namespace walnet::nn
