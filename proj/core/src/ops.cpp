#include "walnet/ops.hpp"

// Small products otherwise take a coefficient path whose vector/scalar split
// follows buffer addresses, which makes results differ between runs.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "walnet/errors.hpp"

namespace walnet::nn {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw InternalError(std::string(op) + ": " + what);
}

void require_chw(const Tensor& x, const char* op) {
  require(x.defined() && x.rank() == 3, op, "expected [C,H,W], got " +
                                                (x.defined() ? shape_string(x.dims()) : "undefined"));
}

std::vector<Real>* grad_of(const std::shared_ptr<Node>& parent) {
  return parent->requires_grad ? &parent->grad_buffer() : nullptr;
}

}  // namespace

int conv_out_size(int in, int kernel, const Conv2dSpec& spec) {
  return (in + 2 * spec.pad - spec.dilation * (kernel - 1) - 1) / spec.stride + 1;
}

// ---------------------------------------------------------------------------
// Convolution via im2col + GEMM

namespace {

struct ConvGeometry {
  int in_ch, in_h, in_w, k_h, k_w, out_h, out_w;
  Conv2dSpec spec;
  bool pointwise() const {
    return k_h == 1 && k_w == 1 && spec.stride == 1 && spec.pad == 0;
  }
};

void im2col(const Real* x, const ConvGeometry& g, Real* col) {
  const int out_area = g.out_h * g.out_w;
  for (int ic = 0; ic < g.in_ch; ++ic) {
    const Real* plane = x + static_cast<std::size_t>(ic) * g.in_h * g.in_w;
    for (int ki = 0; ki < g.k_h; ++ki) {
      for (int kj = 0; kj < g.k_w; ++kj) {
        Real* row = col + static_cast<std::size_t>((ic * g.k_h + ki) * g.k_w + kj) * out_area;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.spec.stride - g.spec.pad + ki * g.spec.dilation;
          Real* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const Real* src = plane + iy * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.spec.stride - g.spec.pad + kj * g.spec.dilation;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const Real* col, const ConvGeometry& g, Real* dx) {
  const int out_area = g.out_h * g.out_w;
  for (int ic = 0; ic < g.in_ch; ++ic) {
    Real* plane = dx + static_cast<std::size_t>(ic) * g.in_h * g.in_w;
    for (int ki = 0; ki < g.k_h; ++ki) {
      for (int kj = 0; kj < g.k_w; ++kj) {
        const Real* row = col + static_cast<std::size_t>((ic * g.k_h + ki) * g.k_w + kj) * out_area;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.spec.stride - g.spec.pad + ki * g.spec.dilation;
          if (iy < 0 || iy >= g.in_h) continue;
          const Real* src = row + oy * g.out_w;
          Real* dst = plane + iy * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.spec.stride - g.spec.pad + kj * g.spec.dilation;
            if (ix >= 0 && ix < g.in_w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv2dSpec& spec) {
  require_chw(x, "conv2d");
  require(weight.defined() && weight.rank() == 4, "conv2d", "weight must be [O,I,kh,kw]");
  require(weight.dim(1) == x.dim(0), "conv2d",
          "input has " + std::to_string(x.dim(0)) + " channels, weight expects " +
              std::to_string(weight.dim(1)));
  require(spec.stride >= 1 && spec.dilation >= 1 && spec.pad >= 0, "conv2d", "bad spec");

  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), weight.dim(2), weight.dim(3), 0, 0, spec};
  g.out_h = conv_out_size(g.in_h, g.k_h, spec);
  g.out_w = conv_out_size(g.in_w, g.k_w, spec);
  require(g.out_h >= 1 && g.out_w >= 1, "conv2d", "output would be empty");
  const int out_ch = weight.dim(0);
  const int patch = g.in_ch * g.k_h * g.k_w;
  const int out_area = g.out_h * g.out_w;
  if (bias.defined()) require(bias.numel() == static_cast<std::size_t>(out_ch), "conv2d", "bias size");

  std::vector<Real> col;
  const Real* col_ptr = x.values().data();
  if (!g.pointwise()) {
    col.resize(static_cast<std::size_t>(patch) * out_area);
    im2col(x.values().data(), g, col.data());
    col_ptr = col.data();
  }

  std::vector<Real> out(static_cast<std::size_t>(out_ch) * out_area);
  {
    ConstMapMat w(weight.values().data(), out_ch, patch);
    ConstMapMat c(col_ptr, patch, out_area);
    MapMat o(out.data(), out_ch, out_area);
    o.noalias() = w * c;
    if (bias.defined()) {
      for (int oc = 0; oc < out_ch; ++oc) o.row(oc).array() += bias.values()[oc];
    }
  }

  const bool need_graph = grad_enabled() &&
      (x.requires_grad() || weight.requires_grad() || (bias.defined() && bias.requires_grad()));
  if (!need_graph) col.clear();

  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return detail::make_result(
      {out_ch, g.out_h, g.out_w}, std::move(out), std::move(parents),
      [g, out_ch, patch, out_area, has_bias, col = std::move(col)](Node& self) {
        const auto& px = self.parents[0];
        const auto& pw = self.parents[1];
        ConstMapMat go(self.grad.data(), out_ch, out_area);
        const Real* col_ptr = g.pointwise() ? px->value.data() : col.data();
        ConstMapMat c(col_ptr, patch, out_area);
        if (auto* gw = grad_of(pw)) {
          MapMat dw(gw->data(), out_ch, patch);
          dw.noalias() += go * c.transpose();
        }
        if (has_bias) {
          if (auto* gb = grad_of(self.parents[2])) {
            for (int oc = 0; oc < out_ch; ++oc) {
              const Real* row = self.grad.data() + static_cast<std::size_t>(oc) * out_area;
              Real acc = 0;
              for (int q = 0; q < out_area; ++q) acc += row[q];
              (*gb)[oc] += acc;
            }
          }
        }
        if (auto* gx = grad_of(px)) {
          ConstMapMat w(pw->value.data(), out_ch, patch);
          if (g.pointwise()) {
            MapMat dx(gx->data(), patch, out_area);
            dx.noalias() += w.transpose() * go;
          } else {
            RowMat dcol = w.transpose() * go;
            col2im_add(dcol.data(), g, gx->data());
          }
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(weight.defined() && weight.rank() == 2, "linear", "weight must be [O,N]");
  require(x.numel() == static_cast<std::size_t>(weight.dim(1)), "linear",
          "input size " + std::to_string(x.numel()) + " vs weight " + shape_string(weight.dims()));
  const int o = weight.dim(0);
  const int n = weight.dim(1);
  std::vector<Real> out(o);
  {
    ConstMapMat w(weight.values().data(), o, n);
    Eigen::Map<const Eigen::VectorXd> v(x.values().data(), n);
    Eigen::Map<Eigen::VectorXd> r(out.data(), o);
    r.noalias() = w * v;
    if (bias.defined()) {
      for (int i = 0; i < o; ++i) out[i] += bias.values()[i];
    }
  }
  std::vector<Tensor> parents{x, weight};
  const bool has_bias = bias.defined();
  if (has_bias) parents.push_back(bias);
  return detail::make_result({o}, std::move(out), std::move(parents), [o, n, has_bias](Node& self) {
    const auto& px = self.parents[0];
    const auto& pw = self.parents[1];
    Eigen::Map<const Eigen::VectorXd> go(self.grad.data(), o);
    if (auto* gw = grad_of(pw)) {
      MapMat dw(gw->data(), o, n);
      Eigen::Map<const Eigen::VectorXd> v(px->value.data(), n);
      dw.noalias() += go * v.transpose();
    }
    if (has_bias) {
      if (auto* gb = grad_of(self.parents[2])) {
        for (int i = 0; i < o; ++i) (*gb)[i] += go[i];
      }
    }
    if (auto* gx = grad_of(px)) {
      ConstMapMat w(pw->value.data(), o, n);
      Eigen::Map<Eigen::VectorXd> dx(gx->data(), n);
      dx.noalias() += w.transpose() * go;
    }
  });
}

// ---------------------------------------------------------------------------
// Element-wise

Tensor relu(const Tensor& x) {
  std::vector<Real> out(x.values().begin(), x.values().end());
  for (Real& v : out) v = v > 0.0 ? v : 0.0;
  return detail::make_result(x.dims(), std::move(out), {x}, [](Node& self) {
    auto* gx = grad_of(self.parents[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      if (self.value[i] > 0.0) (*gx)[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<Real> out(x.numel());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Real v = in[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const Real e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return detail::make_result(x.dims(), std::move(out), {x}, [](Node& self) {
    auto* gx = grad_of(self.parents[0]);
    if (!gx) return;
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const Real s = self.value[i];
      (*gx)[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.dims() == b.dims(), "add", shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make_result(a.dims(), std::move(out), {a, b}, [](Node& self) {
    for (const auto& p : self.parents) {
      if (auto* g = grad_of(p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.dims() == b.dims(), "mul", shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  std::vector<Real> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_result(a.dims(), std::move(out), {a, b}, [](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (auto* g = grad_of(pa)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * pb->value[i];
    }
    if (auto* g = grad_of(pb)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * pa->value[i];
    }
  });
}

Tensor scale(const Tensor& x, Real factor) {
  std::vector<Real> out(x.values().begin(), x.values().end());
  for (Real& v : out) v *= factor;
  return detail::make_result(x.dims(), std::move(out), {x}, [factor](Node& self) {
    if (auto* g = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor mul_map(const Tensor& x, const Tensor& map) {
  require_chw(x, "mul_map");
  require_chw(map, "mul_map");
  require(map.dim(0) == 1 && map.dim(1) == x.dim(1) && map.dim(2) == x.dim(2), "mul_map",
          shape_string(x.dims()) + " vs map " + shape_string(map.dims()));
  const int ch = x.dim(0);
  const std::size_t area = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<Real> out(x.numel());
  for (int c = 0; c < ch; ++c) {
    for (std::size_t i = 0; i < area; ++i) out[c * area + i] = x.values()[c * area + i] * map.values()[i];
  }
  return detail::make_result(x.dims(), std::move(out), {x, map}, [ch, area](Node& self) {
    const auto& px = self.parents[0];
    const auto& pm = self.parents[1];
    if (auto* g = grad_of(px)) {
      for (int c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < area; ++i) (*g)[c * area + i] += self.grad[c * area + i] * pm->value[i];
      }
    }
    if (auto* g = grad_of(pm)) {
      for (int c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < area; ++i) (*g)[i] += self.grad[c * area + i] * px->value[c * area + i];
      }
    }
  });
}

Tensor mul_channels(const Tensor& x, const Tensor& weights) {
  require_chw(x, "mul_channels");
  require(weights.numel() == static_cast<std::size_t>(x.dim(0)), "mul_channels", "weight count");
  const int ch = x.dim(0);
  const std::size_t area = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<Real> out(x.numel());
  for (int c = 0; c < ch; ++c) {
    const Real w = weights.values()[c];
    for (std::size_t i = 0; i < area; ++i) out[c * area + i] = x.values()[c * area + i] * w;
  }
  return detail::make_result(x.dims(), std::move(out), {x, weights}, [ch, area](Node& self) {
    const auto& px = self.parents[0];
    const auto& pw = self.parents[1];
    if (auto* g = grad_of(px)) {
      for (int c = 0; c < ch; ++c) {
        for (std::size_t i = 0; i < area; ++i) (*g)[c * area + i] += self.grad[c * area + i] * pw->value[c];
      }
    }
    if (auto* g = grad_of(pw)) {
      for (int c = 0; c < ch; ++c) {
        Real acc = 0.0;
        for (std::size_t i = 0; i < area; ++i) acc += self.grad[c * area + i] * px->value[c * area + i];
        (*g)[c] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Structural

Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels", "no inputs");
  const int h = parts[0].dim(1);
  const int w = parts[0].dim(2);
  int total = 0;
  for (const auto& p : parts) {
    require_chw(p, "concat_channels");
    require(p.dim(1) == h && p.dim(2) == w, "concat_channels", "spatial mismatch");
    total += p.dim(0);
  }
  std::vector<Real> out;
  out.reserve(static_cast<std::size_t>(total) * h * w);
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return detail::make_result({total, h, w}, std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (const auto& p : self.parents) {
      if (auto* g = grad_of(p)) {
        for (std::size_t i = 0; i < p->value.size(); ++i) (*g)[i] += self.grad[offset + i];
      }
      offset += p->value.size();
    }
  });
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  require_chw(x, "slice_channels");
  require(begin >= 0 && count >= 1 && begin + count <= x.dim(0), "slice_channels", "range");
  const std::size_t area = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  const std::size_t offset = begin * area;
  std::vector<Real> out(x.values().begin() + offset, x.values().begin() + offset + count * area);
  return detail::make_result({count, x.dim(1), x.dim(2)}, std::move(out), {x}, [offset](Node& self) {
    if (auto* g = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[offset + i] += self.grad[i];
    }
  });
}

Tensor global_avg_pool(const Tensor& x) {
  require_chw(x, "global_avg_pool");
  const int ch = x.dim(0);
  const std::size_t area = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<Real> out(ch, 0.0);
  for (int c = 0; c < ch; ++c) {
    Real acc = 0.0;
    for (std::size_t i = 0; i < area; ++i) acc += x.values()[c * area + i];
    out[c] = acc / static_cast<Real>(area);
  }
  return detail::make_result({ch}, std::move(out), {x}, [ch, area](Node& self) {
    if (auto* g = grad_of(self.parents[0])) {
      for (int c = 0; c < ch; ++c) {
        const Real v = self.grad[c] / static_cast<Real>(area);
        for (std::size_t i = 0; i < area; ++i) (*g)[c * area + i] += v;
      }
    }
  });
}

Tensor resize(const Tensor& x, int out_rows, int out_cols) {
  require_chw(x, "resize");
  if (out_rows < 1 || out_cols < 1) throw ParameterError("resize: target size must be positive");
  const int ch = x.dim(0);
  const int in_rows = x.dim(1);
  const int in_cols = x.dim(2);
  if (in_rows == out_rows && in_cols == out_cols) return x;
  auto ra = imaging::BilinearAxis::build(in_rows, out_rows);
  auto ca = imaging::BilinearAxis::build(in_cols, out_cols);
  const std::size_t in_area = static_cast<std::size_t>(in_rows) * in_cols;
  const std::size_t out_area = static_cast<std::size_t>(out_rows) * out_cols;
  std::vector<Real> out(ch * out_area);
  for (int c = 0; c < ch; ++c) {
    imaging::resize_plane(x.values().subspan(c * in_area, in_area), in_rows, in_cols,
                          std::span<Real>(out).subspan(c * out_area, out_area), ra, ca);
  }
  return detail::make_result(
      {ch, out_rows, out_cols}, std::move(out), {x},
      [ch, in_cols, in_area, out_rows, out_cols, out_area, ra = std::move(ra),
       ca = std::move(ca)](Node& self) {
        auto* g = grad_of(self.parents[0]);
        if (!g) return;
        for (int c = 0; c < ch; ++c) {
          Real* dst = g->data() + c * in_area;
          const Real* src = self.grad.data() + c * out_area;
          for (int r = 0; r < out_rows; ++r) {
            const int y0 = ra.lo[r], y1 = ra.hi[r];
            const Real wy = ra.frac[r];
            for (int col = 0; col < out_cols; ++col) {
              const int x0 = ca.lo[col], x1 = ca.hi[col];
              const Real wx = ca.frac[col];
              const Real v = src[r * out_cols + col];
              dst[y0 * in_cols + x0] += v * (1 - wy) * (1 - wx);
              dst[y0 * in_cols + x1] += v * (1 - wy) * wx;
              dst[y1 * in_cols + x0] += v * wy * (1 - wx);
              dst[y1 * in_cols + x1] += v * wy * wx;
            }
          }
        }
      });
}

Tensor crop(const Tensor& x, const imaging::BBox& box) {
  require_chw(x, "crop");
  require(box.valid_within(x.dim(1), x.dim(2)), "crop", "box outside feature map");
  const int ch = x.dim(0);
  const int in_rows = x.dim(1);
  const int in_cols = x.dim(2);
  if (box == imaging::BBox::full(in_rows, in_cols)) return x;
  const int h = box.height();
  const int w = box.width();
  std::vector<Real> out(static_cast<std::size_t>(ch) * h * w);
  for (int c = 0; c < ch; ++c) {
    for (int r = 0; r < h; ++r) {
      const Real* src = x.values().data() + (static_cast<std::size_t>(c) * in_rows + box.row0 + r) * in_cols + box.col0;
      std::copy(src, src + w, out.data() + (static_cast<std::size_t>(c) * h + r) * w);
    }
  }
  return detail::make_result({ch, h, w}, std::move(out), {x}, [ch, in_rows, in_cols, box](Node& self) {
    auto* g = grad_of(self.parents[0]);
    if (!g) return;
    const int h = box.height();
    const int w = box.width();
    for (int c = 0; c < ch; ++c) {
      for (int r = 0; r < h; ++r) {
        Real* dst = g->data() + (static_cast<std::size_t>(c) * in_rows + box.row0 + r) * in_cols + box.col0;
        const Real* src = self.grad.data() + (static_cast<std::size_t>(c) * h + r) * w;
        for (int k = 0; k < w; ++k) dst[k] += src[k];
      }
    }
  });
}

Tensor mean_of(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "mean_of", "no inputs");
  const auto& dims = parts[0].dims();
  std::vector<Real> out(parts[0].numel(), 0.0);
  for (const auto& p : parts) {
    require(p.dims() == dims, "mean_of", "shape mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.values()[i];
  }
  const Real inv = 1.0 / static_cast<Real>(parts.size());
  for (Real& v : out) v *= inv;
  return detail::make_result(dims, std::move(out), parts, [inv](Node& self) {
    for (const auto& p : self.parents) {
      if (auto* g = grad_of(p)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * inv;
      }
    }
  });
}

Tensor radix_softmax(const Tensor& x, int radix) {
  require(radix >= 1 && x.numel() % radix == 0, "radix_softmax", "size not divisible by radix");
  const std::size_t ch = x.numel() / radix;
  std::vector<Real> out(x.numel());
  for (std::size_t c = 0; c < ch; ++c) {
    Real mx = -INFINITY;
    for (int r = 0; r < radix; ++r) mx = std::max(mx, x.values()[r * ch + c]);
    Real z = 0.0;
    for (int r = 0; r < radix; ++r) {
      out[r * ch + c] = std::exp(x.values()[r * ch + c] - mx);
      z += out[r * ch + c];
    }
    for (int r = 0; r < radix; ++r) out[r * ch + c] /= z;
  }
  return detail::make_result(x.dims(), std::move(out), {x}, [radix, ch](Node& self) {
    auto* g = grad_of(self.parents[0]);
    if (!g) return;
    for (std::size_t c = 0; c < ch; ++c) {
      Real dot = 0.0;
      for (int r = 0; r < radix; ++r) dot += self.grad[r * ch + c] * self.value[r * ch + c];
      for (int r = 0; r < radix; ++r) {
        const std::size_t i = r * ch + c;
        (*g)[i] += self.value[i] * (self.grad[i] - dot);
      }
    }
  });
}

Tensor log_softmax(const Tensor& x) {
  const std::size_t n = x.numel();
  Real mx = -INFINITY;
  for (Real v : x.values()) mx = std::max(mx, v);
  Real z = 0.0;
  for (Real v : x.values()) z += std::exp(v - mx);
  const Real lse = mx + std::log(z);
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x.values()[i] - lse;
  return detail::make_result(x.dims(), std::move(out), {x}, [n](Node& self) {
    auto* g = grad_of(self.parents[0]);
    if (!g) return;
    Real total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += self.grad[i];
    for (std::size_t i = 0; i < n; ++i) (*g)[i] += self.grad[i] - std::exp(self.value[i]) * total;
  });
}

Tensor reshape(const Tensor& x, std::vector<int> dims) {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  require(n == x.numel(), "reshape", shape_string(x.dims()) + " -> " + shape_string(dims));
  std::vector<Real> out(x.values().begin(), x.values().end());
  return detail::make_result(std::move(dims), std::move(out), {x}, [](Node& self) {
    if (auto* g = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor sum(const Tensor& x) {
  Real acc = 0.0;
  for (Real v : x.values()) acc += v;
  return detail::make_result({1}, {acc}, {x}, [](Node& self) {
    if (auto* g = grad_of(self.parents[0])) {
      for (Real& v : *g) v += self.grad[0];
    }
  });
}

Tensor from_map(const imaging::ScalarMap& map, bool requires_grad) {
  return Tensor::from({1, map.rows(), map.cols()}, map.storage(), requires_grad);
}

imaging::ScalarMap to_map(const Tensor& x, int ch) {
  require_chw(x, "to_map");
  const int rows = x.dim(1);
  const int cols = x.dim(2);
  const std::size_t area = static_cast<std::size_t>(rows) * cols;
  auto v = x.values().subspan(ch * area, area);
  return imaging::ScalarMap(rows, cols, std::vector<Real>(v.begin(), v.end()));
}

}  // namespace walnet::nn
