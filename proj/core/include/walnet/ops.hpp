#pragma once

#include <vector>

#include "walnet/imaging.hpp"
#include "walnet/tensor.hpp"

namespace walnet::nn {

struct Conv2dSpec {
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

/// Output side length of a convolution along one axis.
int conv_out_size(int in, int kernel, const Conv2dSpec& spec);

/// x [I,H,W], weight [O,I,kh,kw], bias [O] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dSpec& spec);

/// x [N], weight [O,N], bias [O] or undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);

/// x [C,H,W] times a single-channel map [1,H,W] broadcast over channels.
Tensor mul_map(const Tensor& x, const Tensor& map);

/// x [C,H,W] times a per-channel weight [C].
Tensor mul_channels(const Tensor& x, const Tensor& weights);

Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, int begin, int count);

/// [C,H,W] -> [C]
Tensor global_avg_pool(const Tensor& x);

/// Channel-wise half-pixel bilinear resize of [C,H,W].
Tensor resize(const Tensor& x, int out_rows, int out_cols);

/// Spatial crop of [C,H,W] to a half-open box.
Tensor crop(const Tensor& x, const imaging::BBox& box);

/// Element-wise mean of same-shaped tensors.
Tensor mean_of(const std::vector<Tensor>& parts);

/// Softmax across `radix` groups of a [radix*C] vector, per channel.
Tensor radix_softmax(const Tensor& x, int radix);

/// Numerically stable log-softmax of a vector.
Tensor log_softmax(const Tensor& x);

/// Same values, new shape of equal element count.
Tensor reshape(const Tensor& x, std::vector<int> dims);

/// Sum of all entries as a [1] tensor.
Tensor sum(const Tensor& x);

/// Single-channel [1,H,W] tensor from a map.
Tensor from_map(const imaging::ScalarMap& map, bool requires_grad = false);
/// Channel `ch` of a [C,H,W] tensor as a map (values only).
imaging::ScalarMap to_map(const Tensor& x, int ch = 0);

}  // namespace walnet::nn
