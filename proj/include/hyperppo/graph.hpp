#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hyperppo/tensor.hpp"

namespace hyperppo {

using NodeId = std::uint32_t;

enum class OpKind : std::uint8_t {
  kInput,
  kConstant,
  kMatMul,
  kAdd,
  kBroadcastAdd,
  kMul,
  kAffine,
  kTanh,
  kExp,
  kLog,
  kSquare,
  kSum,
  kMean,
  kSlice,
  kConcat,
  kClip,
  kMin,
  kMax,
  kReshape,
};

std::string_view op_name(OpKind kind);

struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

// One primitive op. The op's output node id equals its position in the graph.
struct OpRecord {
  OpKind kind = OpKind::kInput;
  std::vector<NodeId> inputs;
  NodeId output = 0;

  double a = 0.0;  // affine scale, clip low
  double b = 0.0;  // affine shift, clip high
  Range rows, cols;  // slice
  int axis = 0;      // concat
  Shape shape;       // reshape
  std::string name;  // input
  std::size_t constant = 0;  // index into the graph's constant pool
};

// Define-then-run computation graph. Builders append op records; inputs must
// already exist, so the record list is topologically ordered by construction.
class Graph {
 public:
  NodeId input(std::string name = {});
  NodeId constant(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  // matrix (R x C) + row vector (1 x C)
  NodeId broadcast_add(NodeId matrix, NodeId row);
  // Elementwise product; `b` may also be 1xC, Rx1 or 1x1 and is broadcast.
  NodeId mul(NodeId a, NodeId b);
  NodeId affine(NodeId x, double scale, double shift = 0.0);
  NodeId tanh(NodeId x);
  NodeId exp(NodeId x);
  NodeId log(NodeId x);
  NodeId square(NodeId x);
  NodeId sum(NodeId x);
  NodeId mean(NodeId x);
  NodeId slice(NodeId x, Range rows, Range cols);
  NodeId concat(NodeId a, NodeId b, int axis);
  NodeId clip(NodeId x, double lo, double hi);
  NodeId min(NodeId a, NodeId b);
  NodeId max(NodeId a, NodeId b);
  NodeId reshape(NodeId x, Shape shape);

  NodeId sub(NodeId a, NodeId b) { return add(a, affine(b, -1.0)); }
  NodeId scale(NodeId x, double s) { return affine(x, s); }

  const std::vector<OpRecord>& ops() const { return ops_; }
  std::size_t size() const { return ops_.size(); }
  const Tensor& constant_value(const OpRecord& op) const { return constants_[op.constant]; }
  bool is_leaf(NodeId id) const;

 private:
  NodeId push(OpRecord op);

  std::vector<OpRecord> ops_;
  std::vector<Tensor> constants_;
};

using Bindings = std::unordered_map<NodeId, TensorView>;
// Gradient destinations for input leaves; backward() accumulates (+=) into
// them instead of returning a tensor.
using GradSinks = std::unordered_map<NodeId, std::span<double>>;
using Gradients = std::unordered_map<NodeId, Tensor>;

// Node values from one forward pass. Bound inputs are held as views, so the
// bound buffers and the graph must outlive the evaluation.
class Evaluation {
 public:
  TensorView value(NodeId id) const { return views_.at(id); }
  Tensor copy(NodeId id) const;
  double scalar(NodeId id) const;
  std::size_t size() const { return views_.size(); }

 private:
  friend Evaluation forward(const Graph&, const Bindings&);
  friend Gradients backward(const Graph&, Evaluation&, NodeId,
                            const GradSinks&);

  std::vector<Tensor> values_;
  std::vector<TensorView> views_;
};

Evaluation forward(const Graph& graph, const Bindings& inputs);

// Reverse sweep in descending record order. Returns d(loss)/d(leaf) for every
// leaf not routed to a sink. Leaves the loss does not depend on get zeros.
Gradients backward(const Graph& graph, Evaluation& eval, NodeId loss,
                   const GradSinks& sinks = {});

}  // namespace hyperppo
