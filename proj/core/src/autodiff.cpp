#include "voxssl/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>

namespace voxssl {

void DiffNode::accumulate(const Tensor& g) {
  if (!has_grad) {
    grad = Tensor::zeros(value.shape());
    has_grad = true;
  }
  double* dst = grad.data();
  const double* src = g.data();
  const std::size_t n = grad.size();
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

Var Var::leaf(Tensor value, bool requires_grad, std::string name) {
  auto node = std::make_shared<DiffNode>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->name = std::move(name);
  return Var(std::move(node));
}

Tensor Var::grad() const {
  if (node_->has_grad) return node_->grad;
  return Tensor::zeros(node_->value.shape());
}

void backward(const Var& root) {
  if (!root.defined()) throw std::logic_error("backward: undefined Var");
  DiffNode* r = root.node().get();
  if (r->value.size() != 1) {
    throw std::logic_error("backward: root must be scalar, got " + r->value.shape_str());
  }
  if (r->has_grad) throw std::logic_error("backward: already called on this graph");
  if (!r->requires_grad) return;

  // Iterative post-order DFS over the grad-requiring subgraph.
  std::vector<DiffNode*> order;
  std::unordered_set<DiffNode*> visited;
  std::vector<std::pair<DiffNode*, std::size_t>> stack;
  stack.emplace_back(r, 0);
  visited.insert(r);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      DiffNode* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  r->accumulate(Tensor::scalar(1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    DiffNode* node = *it;
    if (node->backward_fn && node->has_grad) node->backward_fn(node->grad);
  }
}

}  // namespace voxssl
