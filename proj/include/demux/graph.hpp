#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "demux/tensor.hpp"

namespace demux::ad {

enum class OpTag {
  Leaf,
  Add,
  Sub,
  Hadamard,
  MatMul,
  ScalarMul,
  Neg,
  Exp,
  Log,
  Tanh,
  Sigmoid,
  Relu,
  Softmax,
  Sum,
  Mean,
  Square,
  Abs,
  Clamp,
  Concat,
  Slice,
  IndicatorGe0,
  IndicatorLt0,
};

std::string_view op_name(OpTag tag);

/// Non-tensor arguments of an op. Only the fields an op reads matter.
struct OpAttrs {
  double scalar = 0.0;    // scalar_mul
  double lo = 0.0;        // clamp
  double hi = 0.0;        // clamp
  std::size_t axis = 0;   // softmax, concat, slice
  std::size_t begin = 0;  // slice
  std::size_t end = 0;    // slice
};

class Graph;

/// Result of Graph::backward: d(root)/d(leaf) for every parameter leaf.
class Gradients {
 public:
  /// Gradient for a parameter leaf; a zero tensor if the root does not depend on it.
  Tensor of(const Tensor& leaf) const;

 private:
  friend class Graph;
  std::uint64_t graph_ = 0;
  std::vector<std::shared_ptr<const std::vector<double>>> adjoints_;
  std::vector<Shape> shapes_;
  std::vector<bool> is_parameter_;
};

/// Define-by-run computation graph. Nodes are appended in evaluation order, so
/// the node list is always topologically sorted; backward walks it in reverse.
///
/// Binary element-wise ops broadcast numpy-style over trailing dimensions.
/// Subgradient convention: relu'(0) = 0, clamp' = 0 on and outside the
/// boundary, indicators have zero derivative everywhere.
class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Record a leaf that receives no gradient.
  Tensor constant(const Tensor& value);
  /// Record a leaf whose gradient backward() reports.
  Tensor parameter(const Tensor& value);

  Tensor forward_op(OpTag tag, std::span<const Tensor> inputs, const OpAttrs& attrs = {});
  Tensor forward_op(OpTag tag, std::initializer_list<Tensor> inputs, const OpAttrs& attrs = {});

  Tensor add(const Tensor& a, const Tensor& b) { return forward_op(OpTag::Add, {a, b}); }
  Tensor sub(const Tensor& a, const Tensor& b) { return forward_op(OpTag::Sub, {a, b}); }
  Tensor hadamard(const Tensor& a, const Tensor& b) { return forward_op(OpTag::Hadamard, {a, b}); }
  Tensor matmul(const Tensor& a, const Tensor& b) { return forward_op(OpTag::MatMul, {a, b}); }
  Tensor scalar_mul(const Tensor& a, double s);
  Tensor neg(const Tensor& a) { return forward_op(OpTag::Neg, {a}); }
  Tensor exp(const Tensor& a) { return forward_op(OpTag::Exp, {a}); }
  Tensor log(const Tensor& a) { return forward_op(OpTag::Log, {a}); }
  Tensor tanh(const Tensor& a) { return forward_op(OpTag::Tanh, {a}); }
  Tensor sigmoid(const Tensor& a) { return forward_op(OpTag::Sigmoid, {a}); }
  Tensor relu(const Tensor& a) { return forward_op(OpTag::Relu, {a}); }
  Tensor softmax(const Tensor& a, std::size_t axis);
  Tensor sum(const Tensor& a) { return forward_op(OpTag::Sum, {a}); }
  Tensor mean(const Tensor& a) { return forward_op(OpTag::Mean, {a}); }
  Tensor square(const Tensor& a) { return forward_op(OpTag::Square, {a}); }
  Tensor abs(const Tensor& a) { return forward_op(OpTag::Abs, {a}); }
  Tensor clamp(const Tensor& a, double lo, double hi);
  Tensor concat(std::span<const Tensor> parts, std::size_t axis);
  Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
  Tensor indicator_ge0(const Tensor& a) { return forward_op(OpTag::IndicatorGe0, {a}); }
  Tensor indicator_lt0(const Tensor& a) { return forward_op(OpTag::IndicatorLt0, {a}); }

  /// Reverse-mode sweep from a one-element root.
  Gradients backward(const Tensor& root) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    OpTag tag = OpTag::Leaf;
    std::vector<std::size_t> inputs;
    OpAttrs attrs;
    Shape shape;
    std::shared_ptr<const std::vector<double>> value;
    bool is_parameter = false;
  };

  std::size_t resolve(const Tensor& t);
  Tensor push(Node node);
  void backward_node(const Node& node, const std::vector<double>& out_adj,
                     std::vector<std::vector<double>>& adjoints) const;

  std::uint64_t id_;
  std::vector<Node> nodes_;
};

}  // namespace demux::ad
