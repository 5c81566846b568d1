#include "demux/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "demux/errors.hpp"

namespace demux::ad {
namespace {

std::atomic<std::uint64_t> next_graph_id{1};

// exp() of anything above this overflows a double.
constexpr double kExpLimit = 709.0;

bool is_unary(OpTag tag) {
  switch (tag) {
    case OpTag::ScalarMul:
    case OpTag::Neg:
    case OpTag::Exp:
    case OpTag::Log:
    case OpTag::Tanh:
    case OpTag::Sigmoid:
    case OpTag::Relu:
    case OpTag::Softmax:
    case OpTag::Sum:
    case OpTag::Mean:
    case OpTag::Square:
    case OpTag::Abs:
    case OpTag::Clamp:
    case OpTag::Slice:
    case OpTag::IndicatorGe0:
    case OpTag::IndicatorLt0:
      return true;
    default:
      return false;
  }
}

std::string describe(OpTag tag, const std::vector<const Shape*>& shapes) {
  std::string s(op_name(tag));
  s += '(';
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i) s += ", ";
    s += to_string(*shapes[i]);
  }
  s += ')';
  return s;
}

// Index maps from an output element to the contributing element of each
// operand. An empty map means the operand already has the output shape.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_index;
  std::vector<std::size_t> b_index;
};

std::vector<std::size_t> broadcast_index(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t d = rank; d-- > offset;) {
    const auto dim = in[d - offset];
    stride[d] = (dim == 1) ? 0 : s;
    s *= dim;
  }
  const std::size_t n = numel(out);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    index[i] = pos;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      pos += stride[d];
      if (counter[d] < out[d]) break;
      pos -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

Broadcast plan_broadcast(OpTag tag, const Shape& a, const Shape& b) {
  Broadcast plan;
  if (a == b) {
    plan.out = a;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + describe(tag, {&a, &b}));
    }
    plan.out[i] = std::max(da, db);
  }
  if (a != plan.out) plan.a_index = broadcast_index(a, plan.out);
  if (b != plan.out) plan.b_index = broadcast_index(b, plan.out);
  return plan;
}

struct MatMulDims {
  std::size_t m, k, n;
  Shape out;
};

MatMulDims plan_matmul(const Shape& a, const Shape& b) {
  if (a.empty() || b.empty() || a.size() > 2 || b.size() > 2) {
    throw ShapeError("matmul supports rank 1 or 2 operands, got " + describe(OpTag::MatMul, {&a, &b}));
  }
  MatMulDims d{};
  d.m = a.size() == 2 ? a[0] : 1;
  d.k = a.back();
  const std::size_t kb = b[0];
  d.n = b.size() == 2 ? b[1] : 1;
  if (d.k != kb) throw ShapeError("inner dimensions differ in " + describe(OpTag::MatMul, {&a, &b}));
  if (a.size() == 2) d.out.push_back(d.m);
  if (b.size() == 2) d.out.push_back(d.n);
  if (d.out.empty()) d.out.push_back(1);
  return d;
}

// (outer, axis length, inner) decomposition around one axis.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string_view op_name(OpTag tag) {
  switch (tag) {
    case OpTag::Leaf: return "leaf";
    case OpTag::Add: return "add";
    case OpTag::Sub: return "sub";
    case OpTag::Hadamard: return "hadamard";
    case OpTag::MatMul: return "matmul";
    case OpTag::ScalarMul: return "scalar_mul";
    case OpTag::Neg: return "neg";
    case OpTag::Exp: return "exp";
    case OpTag::Log: return "log";
    case OpTag::Tanh: return "tanh";
    case OpTag::Sigmoid: return "sigmoid";
    case OpTag::Relu: return "relu";
    case OpTag::Softmax: return "softmax";
    case OpTag::Sum: return "sum";
    case OpTag::Mean: return "mean";
    case OpTag::Square: return "square";
    case OpTag::Abs: return "abs";
    case OpTag::Clamp: return "clamp";
    case OpTag::Concat: return "concat";
    case OpTag::Slice: return "slice";
    case OpTag::IndicatorGe0: return "indicator_ge0";
    case OpTag::IndicatorLt0: return "indicator_lt0";
  }
  return "unknown";
}

Tensor Gradients::of(const Tensor& leaf) const {
  const auto& ref = leaf.node();
  if (!ref || ref->graph != graph_ || ref->index >= adjoints_.size()) {
    throw Error("gradient requested for a tensor that is not a leaf of this graph");
  }
  if (!is_parameter_[ref->index]) {
    throw Error("gradient requested for a leaf that is not a parameter");
  }
  const auto& adj = adjoints_[ref->index];
  if (!adj) return Tensor::zeros(shapes_[ref->index]);
  return Tensor(shapes_[ref->index], *adj);
}

Graph::Graph() : id_(next_graph_id.fetch_add(1)) {}

Tensor Graph::push(Node node) {
  const std::size_t index = nodes_.size();
  Shape shape = node.shape;
  auto value = node.value;
  nodes_.push_back(std::move(node));
  return Tensor(std::move(shape), std::move(value), NodeRef{id_, index});
}

std::size_t Graph::resolve(const Tensor& t) {
  if (const auto& ref = t.node()) {
    if (ref->graph != id_) throw Error("tensor belongs to a different graph");
    return ref->index;
  }
  return constant(t).node()->index;
}

Tensor Graph::constant(const Tensor& value) {
  Node n;
  n.shape = value.shape();
  n.value = value.data_;
  return push(std::move(n));
}

Tensor Graph::parameter(const Tensor& value) {
  Node n;
  n.shape = value.shape();
  n.value = value.data_;
  n.is_parameter = true;
  return push(std::move(n));
}

Tensor Graph::scalar_mul(const Tensor& a, double s) {
  OpAttrs at;
  at.scalar = s;
  return forward_op(OpTag::ScalarMul, {a}, at);
}

Tensor Graph::softmax(const Tensor& a, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return forward_op(OpTag::Softmax, {a}, at);
}

Tensor Graph::clamp(const Tensor& a, double lo, double hi) {
  OpAttrs at;
  at.lo = lo;
  at.hi = hi;
  return forward_op(OpTag::Clamp, {a}, at);
}

Tensor Graph::concat(std::span<const Tensor> parts, std::size_t axis) {
  OpAttrs at;
  at.axis = axis;
  return forward_op(OpTag::Concat, parts, at);
}

Tensor Graph::slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  OpAttrs at;
  at.axis = axis;
  at.begin = begin;
  at.end = end;
  return forward_op(OpTag::Slice, {a}, at);
}

Tensor Graph::forward_op(OpTag tag, std::initializer_list<Tensor> inputs, const OpAttrs& attrs) {
  return forward_op(tag, std::span<const Tensor>(inputs.begin(), inputs.size()), attrs);
}

Tensor Graph::forward_op(OpTag tag, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  if (tag == OpTag::Leaf) throw Error("leaves are created with constant() or parameter()");
  const std::size_t arity = inputs.size();
  if (is_unary(tag) && arity != 1) {
    throw Error(std::string(op_name(tag)) + " takes one input, got " + std::to_string(arity));
  }
  if (tag == OpTag::Concat && arity == 0) throw Error("concat needs at least one input");
  if (!is_unary(tag) && tag != OpTag::Concat && arity != 2) {
    throw Error(std::string(op_name(tag)) + " takes two inputs, got " + std::to_string(arity));
  }

  Node node;
  node.tag = tag;
  node.attrs = attrs;
  node.inputs.reserve(arity);
  for (const auto& t : inputs) node.inputs.push_back(resolve(t));

  const auto& a = nodes_[node.inputs[0]];
  const auto& av = *a.value;
  std::vector<double> out;

  switch (tag) {
    case OpTag::Add:
    case OpTag::Sub:
    case OpTag::Hadamard: {
      const auto& b = nodes_[node.inputs[1]];
      const auto& bv = *b.value;
      const auto plan = plan_broadcast(tag, a.shape, b.shape);
      const std::size_t n = numel(plan.out);
      out.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = av[plan.a_index.empty() ? i : plan.a_index[i]];
        const double y = bv[plan.b_index.empty() ? i : plan.b_index[i]];
        out[i] = tag == OpTag::Add ? x + y : tag == OpTag::Sub ? x - y : x * y;
      }
      node.shape = plan.out;
      break;
    }
    case OpTag::MatMul: {
      const auto& b = nodes_[node.inputs[1]];
      const auto& bv = *b.value;
      const auto d = plan_matmul(a.shape, b.shape);
      out.assign(d.m * d.n, 0.0);
      for (std::size_t i = 0; i < d.m; ++i) {
        double* row = out.data() + i * d.n;
        for (std::size_t p = 0; p < d.k; ++p) {
          const double aip = av[i * d.k + p];
          if (aip == 0.0) continue;
          const double* brow = bv.data() + p * d.n;
          for (std::size_t j = 0; j < d.n; ++j) row[j] += aip * brow[j];
        }
      }
      node.shape = d.out;
      break;
    }
    case OpTag::ScalarMul:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = attrs.scalar * av[i];
      node.shape = a.shape;
      break;
    case OpTag::Neg:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = -av[i];
      node.shape = a.shape;
      break;
    case OpTag::Exp:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) {
        if (!(av[i] <= kExpLimit)) {
          throw DomainError("exp input " + std::to_string(av[i]) + " overflows (shape " + to_string(a.shape) + ")");
        }
        out[i] = std::exp(av[i]);
      }
      node.shape = a.shape;
      break;
    case OpTag::Log:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) {
        if (!(av[i] > 0.0) || !std::isfinite(av[i])) {
          throw DomainError("log of non-positive or non-finite value " + std::to_string(av[i]) + " (shape " +
                            to_string(a.shape) + ")");
        }
        out[i] = std::log(av[i]);
      }
      node.shape = a.shape;
      break;
    case OpTag::Tanh:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::tanh(av[i]);
      node.shape = a.shape;
      break;
    case OpTag::Sigmoid:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = stable_sigmoid(av[i]);
      node.shape = a.shape;
      break;
    case OpTag::Relu:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 || std::isnan(av[i]) ? av[i] : 0.0;
      node.shape = a.shape;
      break;
    case OpTag::Softmax: {
      if (attrs.axis >= a.shape.size()) {
        throw ShapeError("softmax axis " + std::to_string(attrs.axis) + " out of range for " + to_string(a.shape));
      }
      const auto s = split_axis(a.shape, attrs.axis);
      out.resize(av.size());
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.len * s.inner + in;
          double mx = -INFINITY;
          for (std::size_t j = 0; j < s.len; ++j) {
            const double v = av[base + j * s.inner];
            if (!std::isfinite(v)) {
              throw DomainError("softmax input contains non-finite value (shape " + to_string(a.shape) + ")");
            }
            mx = std::max(mx, v);
          }
          double total = 0.0;
          for (std::size_t j = 0; j < s.len; ++j) {
            const double e = std::exp(av[base + j * s.inner] - mx);
            out[base + j * s.inner] = e;
            total += e;
          }
          for (std::size_t j = 0; j < s.len; ++j) out[base + j * s.inner] /= total;
        }
      }
      node.shape = a.shape;
      break;
    }
    case OpTag::Sum:
    case OpTag::Mean: {
      double total = 0.0;
      for (double v : av) total += v;
      if (tag == OpTag::Mean) total /= static_cast<double>(av.size());
      out.assign(1, total);
      node.shape = {1};
      break;
    }
    case OpTag::Square:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * av[i];
      node.shape = a.shape;
      break;
    case OpTag::Abs:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::fabs(av[i]);
      node.shape = a.shape;
      break;
    case OpTag::Clamp:
      if (!(attrs.lo <= attrs.hi)) throw DomainError("clamp needs lo <= hi");
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::clamp(av[i], attrs.lo, attrs.hi);
      node.shape = a.shape;
      break;
    case OpTag::Concat: {
      const std::size_t axis = attrs.axis;
      Shape shape = a.shape;
      if (axis >= shape.size()) throw ShapeError("concat axis out of range for " + to_string(shape));
      shape[axis] = 0;
      for (auto idx : node.inputs) {
        const auto& s = nodes_[idx].shape;
        if (s.size() != a.shape.size()) throw ShapeError("concat inputs differ in rank");
        for (std::size_t d = 0; d < s.size(); ++d) {
          if (d != axis && s[d] != a.shape[d]) {
            throw ShapeError("concat inputs " + to_string(a.shape) + " and " + to_string(s) +
                             " differ off the concat axis");
          }
        }
        shape[axis] += s[axis];
      }
      const auto split = split_axis(shape, axis);
      out.resize(numel(shape));
      std::size_t offset = 0;
      for (auto idx : node.inputs) {
        const auto& part = nodes_[idx];
        const std::size_t block = part.shape[axis] * split.inner;
        for (std::size_t o = 0; o < split.outer; ++o) {
          std::copy_n(part.value->data() + o * block, block, out.data() + o * split.len * split.inner + offset);
        }
        offset += block;
      }
      node.shape = shape;
      break;
    }
    case OpTag::Slice: {
      const std::size_t axis = attrs.axis;
      if (axis >= a.shape.size() || attrs.begin >= attrs.end || attrs.end > a.shape[axis]) {
        throw ShapeError("slice [" + std::to_string(attrs.begin) + ", " + std::to_string(attrs.end) + ") on axis " +
                         std::to_string(axis) + " invalid for " + to_string(a.shape));
      }
      const auto split = split_axis(a.shape, axis);
      const std::size_t width = (attrs.end - attrs.begin) * split.inner;
      out.resize(split.outer * width);
      for (std::size_t o = 0; o < split.outer; ++o) {
        std::copy_n(av.data() + o * split.len * split.inner + attrs.begin * split.inner, width,
                    out.data() + o * width);
      }
      node.shape = a.shape;
      node.shape[axis] = attrs.end - attrs.begin;
      break;
    }
    case OpTag::IndicatorGe0:
    case OpTag::IndicatorLt0:
      out.resize(av.size());
      for (std::size_t i = 0; i < av.size(); ++i) {
        const bool ge = av[i] >= 0.0;
        out[i] = (tag == OpTag::IndicatorGe0) == ge ? 1.0 : 0.0;
      }
      node.shape = a.shape;
      break;
    case OpTag::Leaf:
      break;
  }

  node.value = std::make_shared<const std::vector<double>>(std::move(out));
  return push(std::move(node));
}

Gradients Graph::backward(const Tensor& root) const {
  const auto& ref = root.node();
  if (!ref || ref->graph != id_) throw Error("backward root is not a node of this graph");
  const auto& rnode = nodes_[ref->index];
  if (numel(rnode.shape) != 1) {
    throw ShapeError("backward needs a scalar root, got shape " + to_string(rnode.shape));
  }

  std::vector<std::vector<double>> adjoints(nodes_.size());
  adjoints[ref->index].assign(1, 1.0);
  for (std::size_t i = ref->index + 1; i-- > 0;) {
    if (adjoints[i].empty() || nodes_[i].tag == OpTag::Leaf) continue;
    backward_node(nodes_[i], adjoints[i], adjoints);
    if (!nodes_[i].is_parameter) std::vector<double>().swap(adjoints[i]);
  }

  Gradients g;
  g.graph_ = id_;
  g.adjoints_.resize(nodes_.size());
  g.shapes_.resize(nodes_.size());
  g.is_parameter_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    g.is_parameter_[i] = nodes_[i].is_parameter;
    if (!nodes_[i].is_parameter) continue;
    g.shapes_[i] = nodes_[i].shape;
    if (!adjoints[i].empty()) {
      g.adjoints_[i] = std::make_shared<const std::vector<double>>(std::move(adjoints[i]));
    }
  }
  return g;
}

void Graph::backward_node(const Node& node, const std::vector<double>& dy,
                          std::vector<std::vector<double>>& adjoints) const {
  auto grad_of = [&](std::size_t input) -> std::vector<double>& {
    auto& adj = adjoints[node.inputs[input]];
    if (adj.empty()) adj.assign(numel(nodes_[node.inputs[input]].shape), 0.0);
    return adj;
  };
  const auto& a = nodes_[node.inputs[0]];
  const auto& av = *a.value;
  const auto& yv = *node.value;

  switch (node.tag) {
    case OpTag::Add:
    case OpTag::Sub:
    case OpTag::Hadamard: {
      const auto& b = nodes_[node.inputs[1]];
      const auto& bv = *b.value;
      const auto plan = plan_broadcast(node.tag, a.shape, b.shape);
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const std::size_t ia = plan.a_index.empty() ? i : plan.a_index[i];
        const std::size_t ib = plan.b_index.empty() ? i : plan.b_index[i];
        ga[ia] += node.tag == OpTag::Hadamard ? dy[i] * bv[ib] : dy[i];
      }
      auto& gb = grad_of(1);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        const std::size_t ia = plan.a_index.empty() ? i : plan.a_index[i];
        const std::size_t ib = plan.b_index.empty() ? i : plan.b_index[i];
        gb[ib] += node.tag == OpTag::Add ? dy[i] : node.tag == OpTag::Sub ? -dy[i] : dy[i] * av[ia];
      }
      break;
    }
    case OpTag::MatMul: {
      const auto& b = nodes_[node.inputs[1]];
      const auto& bv = *b.value;
      const auto d = plan_matmul(a.shape, b.shape);
      auto& ga = grad_of(0);
      // dA = dY * B^T
      for (std::size_t i = 0; i < d.m; ++i) {
        const double* dyrow = dy.data() + i * d.n;
        for (std::size_t p = 0; p < d.k; ++p) {
          const double* brow = bv.data() + p * d.n;
          double acc = 0.0;
          for (std::size_t j = 0; j < d.n; ++j) acc += dyrow[j] * brow[j];
          ga[i * d.k + p] += acc;
        }
      }
      auto& gb = grad_of(1);
      // dB = A^T * dY
      for (std::size_t i = 0; i < d.m; ++i) {
        const double* dyrow = dy.data() + i * d.n;
        for (std::size_t p = 0; p < d.k; ++p) {
          const double aip = av[i * d.k + p];
          if (aip == 0.0) continue;
          double* gbrow = gb.data() + p * d.n;
          for (std::size_t j = 0; j < d.n; ++j) gbrow[j] += aip * dyrow[j];
        }
      }
      break;
    }
    case OpTag::ScalarMul: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += node.attrs.scalar * dy[i];
      break;
    }
    case OpTag::Neg: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] -= dy[i];
      break;
    }
    case OpTag::Exp: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * yv[i];
      break;
    }
    case OpTag::Log: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] / av[i];
      break;
    }
    case OpTag::Tanh: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * (1.0 - yv[i] * yv[i]);
      break;
    }
    case OpTag::Sigmoid: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * yv[i] * (1.0 - yv[i]);
      break;
    }
    case OpTag::Relu: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (av[i] > 0.0) ga[i] += dy[i];
      }
      break;
    }
    case OpTag::Softmax: {
      const auto s = split_axis(a.shape, node.attrs.axis);
      auto& ga = grad_of(0);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.len * s.inner + in;
          double dot = 0.0;
          for (std::size_t j = 0; j < s.len; ++j) dot += dy[base + j * s.inner] * yv[base + j * s.inner];
          for (std::size_t j = 0; j < s.len; ++j) {
            const std::size_t k = base + j * s.inner;
            ga[k] += yv[k] * (dy[k] - dot);
          }
        }
      }
      break;
    }
    case OpTag::Sum:
    case OpTag::Mean: {
      auto& ga = grad_of(0);
      const double g = node.tag == OpTag::Mean ? dy[0] / static_cast<double>(ga.size()) : dy[0];
      for (auto& v : ga) v += g;
      break;
    }
    case OpTag::Square: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += 2.0 * av[i] * dy[i];
      break;
    }
    case OpTag::Abs: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (av[i] > 0.0) ga[i] += dy[i];
        else if (av[i] < 0.0) ga[i] -= dy[i];
      }
      break;
    }
    case OpTag::Clamp: {
      auto& ga = grad_of(0);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        if (av[i] > node.attrs.lo && av[i] < node.attrs.hi) ga[i] += dy[i];
      }
      break;
    }
    case OpTag::Concat: {
      const auto split = split_axis(node.shape, node.attrs.axis);
      std::size_t offset = 0;
      for (std::size_t p = 0; p < node.inputs.size(); ++p) {
        const auto& part = nodes_[node.inputs[p]];
        const std::size_t block = part.shape[node.attrs.axis] * split.inner;
        auto& gp = grad_of(p);
        for (std::size_t o = 0; o < split.outer; ++o) {
          const double* src = dy.data() + o * split.len * split.inner + offset;
          double* dst = gp.data() + o * block;
          for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
        }
        offset += block;
      }
      break;
    }
    case OpTag::Slice: {
      const auto split = split_axis(a.shape, node.attrs.axis);
      const std::size_t width = (node.attrs.end - node.attrs.begin) * split.inner;
      auto& ga = grad_of(0);
      for (std::size_t o = 0; o < split.outer; ++o) {
        double* dst = ga.data() + o * split.len * split.inner + node.attrs.begin * split.inner;
        const double* src = dy.data() + o * width;
        for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
      }
      break;
    }
    case OpTag::IndicatorGe0:
    case OpTag::IndicatorLt0:
    case OpTag::Leaf:
      break;
  }
}

}  // namespace demux::ad
