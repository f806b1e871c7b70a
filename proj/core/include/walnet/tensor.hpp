#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace walnet::nn {

using Real = double;

struct Node {
  std::vector<int> dims;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::size_t numel() const { return value.size(); }
  /// Grad buffer, allocated (zeroed) on first use.
  std::vector<Real>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

/// Shared handle to a node of the reverse-mode tape.
///
/// Feature maps are [C, H, W], vectors are [N], conv weights [O, I, kh, kw].
/// A tensor built from parents that need gradients records a backward
/// closure; everything else is a plain value.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(std::vector<int> dims, bool requires_grad = false);
  static Tensor full(std::vector<int> dims, Real value, bool requires_grad = false);
  static Tensor from(std::vector<int> dims, std::vector<Real> values, bool requires_grad = false);
  static Tensor scalar(Real value) { return from({1}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& dims() const { return node_->dims; }
  int dim(std::size_t i) const { return node_->dims.at(i); }
  std::size_t rank() const { return node_->dims.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const Real> values() const { return node_->value; }
  std::span<Real> mutable_values() { return node_->value; }
  Real item() const;

  /// Empty span when no gradient has been accumulated.
  std::span<const Real> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }
  bool requires_grad() const { return node_->requires_grad; }

  /// Value copy with no history.
  Tensor detach() const;

  /// Runs reverse accumulation from this scalar with seed 1.
  void backward() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

  /// True when this tensor's history contains `other` (used by tests to
  /// prove a value is a constant of the graph).
  bool depends_on(const Tensor& other) const;

 private:
  std::shared_ptr<Node> node_;
};

std::string shape_string(const std::vector<int>& dims);

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {
/// Builds an op result. The backward closure is attached only when grad mode
/// is on and some parent requires a gradient.
Tensor make_result(std::vector<int> dims, std::vector<Real> value,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward);
}  // namespace detail

}  // namespace walnet::nn
