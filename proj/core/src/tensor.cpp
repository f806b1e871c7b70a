#include "walnet/tensor.hpp"

#include <numeric>
#include <unordered_set>

#include "walnet/errors.hpp"

namespace walnet::nn {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t product(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw InternalError("tensor dimension must be positive: " + shape_string(dims));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

}  // namespace

std::string shape_string(const std::vector<int>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Tensor::zeros(std::vector<int> dims, bool requires_grad) {
  return full(std::move(dims), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> dims, Real value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value.assign(product(dims), value);
  node->dims = std::move(dims);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(std::vector<int> dims, std::vector<Real> values, bool requires_grad) {
  if (product(dims) != values.size()) {
    throw InternalError("Tensor::from: " + std::to_string(values.size()) +
                        " values for shape " + shape_string(dims));
  }
  auto node = std::make_shared<Node>();
  node->dims = std::move(dims);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Real Tensor::item() const {
  if (numel() != 1) throw InternalError("Tensor::item on shape " + shape_string(dims()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(node_->dims, node_->value, false); }

void Tensor::backward() const {
  if (numel() != 1) throw InternalError("backward() needs a scalar, got " + shape_string(dims()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  // Interior grads are scratch; leaves (parameters) keep theirs.
  for (Node* n : order) {
    if (n->backward_fn) std::vector<Real>().swap(n->grad);
  }
}

bool Tensor::depends_on(const Tensor& other) const {
  std::unordered_set<const Node*> visited;
  std::vector<const Node*> stack{node_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n == other.node()) return true;
    if (!visited.insert(n).second) continue;
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  return false;
}

namespace detail {

Tensor make_result(std::vector<int> dims, std::vector<Real> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->dims = std::move(dims);
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.shared());
      node->backward_fn = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace walnet::nn
