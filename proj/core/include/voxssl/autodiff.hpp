#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "voxssl/tensor.hpp"

namespace voxssl {

/// One node of the reverse-mode autodiff graph. The graph is a DAG built by
/// the op functions in ops.hpp; parents are the op inputs.
struct DiffNode {
  Tensor value;
  Tensor grad;              // allocated on first accumulation
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<DiffNode>> parents;
  /// Propagates this node's grad into its parents. Empty for leaves and for
  /// nodes built from inputs that do not require grad.
  std::function<void(const Tensor& upstream)> backward_fn;
  std::string name;

  /// Adds g into this node's grad buffer (allocating zeros first).
  void accumulate(const Tensor& g);
};

/// Value-semantics handle to a DiffNode.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<DiffNode> node) : node_(std::move(node)) {}

  static Var leaf(Tensor value, bool requires_grad, std::string name = "");

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const std::vector<std::size_t>& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const { return node_->value.item(); }

  /// Grad accumulated by backward(); zeros if this node never received one.
  Tensor grad() const;

  /// A fresh constant leaf holding the same value; gradient flow stops here.
  Var detach() const { return leaf(node_->value, false); }

  const std::shared_ptr<DiffNode>& node() const { return node_; }

 private:
  std::shared_ptr<DiffNode> node_;
};

/// Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1, walks the
/// graph in reverse topological order, accumulates into every grad-requiring
/// node exactly once per edge. May be called once per forward build; a second
/// call on the same root throws std::logic_error.
void backward(const Var& root);

}  // namespace voxssl
