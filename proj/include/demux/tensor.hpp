#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace demux::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Handle of a node inside a specific Graph instance.
struct NodeRef {
  std::uint64_t graph = 0;
  std::size_t index = 0;
};

/// Dense row-major array of doubles. Immutable once created; copies share
/// storage. A tensor produced by a Graph remembers which node it came from.
class Tensor {
 public:
  /// A scalar zero with shape {1}.
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_->size(); }
  std::span<const double> values() const noexcept { return *data_; }
  std::vector<double> to_vector() const { return *data_; }

  double operator[](std::size_t i) const { return (*data_)[i]; }
  /// Element (r, c) of a rank-2 tensor.
  double at(std::size_t r, std::size_t c) const;
  /// The single value of a one-element tensor.
  double item() const;

  const std::optional<NodeRef>& node() const noexcept { return node_; }
  /// The same values, detached from any graph.
  Tensor detached() const;

 private:
  friend class Graph;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data, NodeRef node);

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  std::optional<NodeRef> node_;
};

}  // namespace demux::ad
