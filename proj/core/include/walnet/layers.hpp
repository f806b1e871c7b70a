#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "walnet/ops.hpp"
#include "walnet/rng.hpp"
#include "walnet/tensor.hpp"

namespace walnet::nn {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

enum class Init { he_normal, lecun_normal, zeros };

/// Owns every trainable tensor of a model in registration order.
class ParameterStore {
 public:
  Tensor add(std::string name, std::vector<int> dims, Init init, int fan_in, Rng& rng);

  const std::vector<NamedParameter>& params() const { return params_; }
  std::vector<NamedParameter>& params() { return params_; }
  const NamedParameter* find(const std::string& name) const;

  std::size_t total_size() const;
  void zero_grad();

  /// FNV-1a over parameter names and shapes; equal for identical architectures.
  std::uint64_t architecture_hash() const;

 private:
  std::vector<NamedParameter> params_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, int in_ch, int out_ch, int kernel,
         Conv2dSpec spec, Rng& rng, bool with_bias = true, Init init = Init::he_normal);

  Tensor operator()(const Tensor& x) const { return conv2d(x, weight_, bias_, spec_); }

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
  Conv2dSpec spec_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng,
         Init init = Init::lecun_normal);

  Tensor operator()(const Tensor& x) const { return linear(x, weight_, bias_); }

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace walnet::nn
