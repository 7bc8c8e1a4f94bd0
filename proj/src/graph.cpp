#include "hyperppo/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hyperppo {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

enum class Broadcast { kSame, kRow, kCol, kScalar };

Broadcast classify(const TensorView& a, const TensorView& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  if (b.data.size() == 1) return Broadcast::kScalar;
  throw std::invalid_argument("incompatible broadcast " + shape_str(a.shape) + " * " +
                              shape_str(b.shape));
}

std::size_t broadcast_index(Broadcast mode, std::size_t r, std::size_t c) {
  switch (mode) {
    case Broadcast::kRow: return c;
    case Broadcast::kCol: return r;
    case Broadcast::kScalar: return 0;
    case Broadcast::kSame: break;
  }
  return 0;  // unreachable for kSame; callers use flat indexing
}

[[noreturn]] void shape_error(const OpRecord& op, const std::string& detail) {
  throw std::invalid_argument("op #" + std::to_string(op.output) + " (" +
                              std::string(op_name(op.kind)) + "): " + detail);
}

void require_same(const OpRecord& op, const TensorView& a, const TensorView& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_error(op, "shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kBroadcastAdd: return "broadcast_add";
    case OpKind::kMul: return "mul";
    case OpKind::kAffine: return "affine";
    case OpKind::kTanh: return "tanh";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSquare: return "square";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kSlice: return "slice";
    case OpKind::kConcat: return "concat";
    case OpKind::kClip: return "clip";
    case OpKind::kMin: return "min";
    case OpKind::kMax: return "max";
    case OpKind::kReshape: return "reshape";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Builders

NodeId Graph::push(OpRecord op) {
  const auto id = static_cast<NodeId>(ops_.size());
  for (NodeId in : op.inputs) {
    if (in >= id) throw std::invalid_argument("graph input refers to a later node");
  }
  op.output = id;
  ops_.push_back(std::move(op));
  return id;
}

bool Graph::is_leaf(NodeId id) const {
  const auto k = ops_.at(id).kind;
  return k == OpKind::kInput || k == OpKind::kConstant;
}

NodeId Graph::input(std::string name) {
  OpRecord op;
  op.kind = OpKind::kInput;
  op.name = std::move(name);
  return push(std::move(op));
}

NodeId Graph::constant(Tensor value) {
  OpRecord op;
  op.kind = OpKind::kConstant;
  op.constant = constants_.size();
  constants_.push_back(std::move(value));
  return push(std::move(op));
}

#define HYPERPPO_UNARY(fn, KIND)          \
  NodeId Graph::fn(NodeId x) {            \
    OpRecord op;                          \
    op.kind = OpKind::KIND;               \
    op.inputs = {x};                      \
    return push(std::move(op));           \
  }
#define HYPERPPO_BINARY(fn, KIND)         \
  NodeId Graph::fn(NodeId a, NodeId b) {  \
    OpRecord op;                          \
    op.kind = OpKind::KIND;               \
    op.inputs = {a, b};                   \
    return push(std::move(op));           \
  }

HYPERPPO_BINARY(matmul, kMatMul)
HYPERPPO_BINARY(add, kAdd)
HYPERPPO_BINARY(broadcast_add, kBroadcastAdd)
HYPERPPO_BINARY(mul, kMul)
HYPERPPO_BINARY(min, kMin)
HYPERPPO_BINARY(max, kMax)
HYPERPPO_UNARY(tanh, kTanh)
HYPERPPO_UNARY(exp, kExp)
HYPERPPO_UNARY(log, kLog)
HYPERPPO_UNARY(square, kSquare)
HYPERPPO_UNARY(sum, kSum)
HYPERPPO_UNARY(mean, kMean)

#undef HYPERPPO_UNARY
#undef HYPERPPO_BINARY

NodeId Graph::affine(NodeId x, double scale, double shift) {
  OpRecord op;
  op.kind = OpKind::kAffine;
  op.inputs = {x};
  op.a = scale;
  op.b = shift;
  return push(std::move(op));
}

NodeId Graph::slice(NodeId x, Range rows, Range cols) {
  if (rows.end < rows.begin || cols.end < cols.begin) {
    throw std::invalid_argument("slice range is reversed");
  }
  OpRecord op;
  op.kind = OpKind::kSlice;
  op.inputs = {x};
  op.rows = rows;
  op.cols = cols;
  return push(std::move(op));
}

NodeId Graph::concat(NodeId a, NodeId b, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat axis must be 0 or 1");
  OpRecord op;
  op.kind = OpKind::kConcat;
  op.inputs = {a, b};
  op.axis = axis;
  return push(std::move(op));
}

NodeId Graph::clip(NodeId x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clip bounds reversed");
  OpRecord op;
  op.kind = OpKind::kClip;
  op.inputs = {x};
  op.a = lo;
  op.b = hi;
  return push(std::move(op));
}

NodeId Graph::reshape(NodeId x, Shape shape) {
  OpRecord op;
  op.kind = OpKind::kReshape;
  op.inputs = {x};
  op.shape = std::move(shape);
  return push(std::move(op));
}

// ---------------------------------------------------------------------------
// Forward

Tensor Evaluation::copy(NodeId id) const {
  const auto& v = views_.at(id);
  return Tensor(v.shape, std::vector<double>(v.data.begin(), v.data.end()));
}

double Evaluation::scalar(NodeId id) const {
  const auto& v = views_.at(id);
  if (v.data.size() != 1) throw std::invalid_argument("node is not a scalar");
  return v.data[0];
}

namespace {

template <typename F>
Tensor map_unary(const TensorView& x, F f) {
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.data.size(); ++i) out[i] = f(x.data[i]);
  return out;
}

template <typename F>
Tensor map_binary(const OpRecord& op, const TensorView& a, const TensorView& b, F f) {
  require_same(op, a, b);
  Tensor out(a.shape);
  for (std::size_t i = 0; i < a.data.size(); ++i) out[i] = f(a.data[i], b.data[i]);
  return out;
}

Tensor eval_op(const OpRecord& op, const std::vector<TensorView>& v) {
  switch (op.kind) {
    case OpKind::kMatMul: {
      const auto& a = v[op.inputs[0]];
      const auto& b = v[op.inputs[1]];
      if (a.cols() != b.rows()) {
        shape_error(op, "inner dims differ " + shape_str(a.shape) + " x " + shape_str(b.shape));
      }
      Tensor out({a.rows(), b.cols()});
      MutMap(out.data().data(), a.rows(), b.cols()).noalias() =
          ConstMap(a.data.data(), a.rows(), a.cols()) *
          ConstMap(b.data.data(), b.rows(), b.cols());
      return out;
    }
    case OpKind::kAdd:
      return map_binary(op, v[op.inputs[0]], v[op.inputs[1]],
                        [](double x, double y) { return x + y; });
    case OpKind::kBroadcastAdd: {
      const auto& m = v[op.inputs[0]];
      const auto& row = v[op.inputs[1]];
      if (row.rows() != 1 || row.cols() != m.cols()) {
        shape_error(op, "row " + shape_str(row.shape) + " does not broadcast over " +
                            shape_str(m.shape));
      }
      Tensor out(m.shape);
      const std::size_t cols = m.cols();
      for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = m[r * cols + c] + row[c];
      }
      return out;
    }
    case OpKind::kMul: {
      const auto& a = v[op.inputs[0]];
      const auto& b = v[op.inputs[1]];
      Broadcast mode;
      try {
        mode = classify(a, b);
      } catch (const std::invalid_argument& e) {
        shape_error(op, e.what());
      }
      Tensor out(a.shape);
      const std::size_t cols = a.cols();
      if (mode == Broadcast::kSame) {
        for (std::size_t i = 0; i < a.data.size(); ++i) out[i] = a[i] * b[i];
      } else {
        for (std::size_t r = 0; r < a.rows(); ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] = a[r * cols + c] * b[broadcast_index(mode, r, c)];
          }
        }
      }
      return out;
    }
    case OpKind::kAffine: {
      const double s = op.a, t = op.b;
      return map_unary(v[op.inputs[0]], [s, t](double x) { return s * x + t; });
    }
    case OpKind::kTanh:
      return map_unary(v[op.inputs[0]], [](double x) { return std::tanh(x); });
    case OpKind::kExp:
      return map_unary(v[op.inputs[0]], [](double x) { return std::exp(x); });
    case OpKind::kLog:
      return map_unary(v[op.inputs[0]], [](double x) { return std::log(x); });
    case OpKind::kSquare:
      return map_unary(v[op.inputs[0]], [](double x) { return x * x; });
    case OpKind::kSum:
    case OpKind::kMean: {
      const auto& x = v[op.inputs[0]];
      if (x.data.empty()) shape_error(op, "reduction over empty tensor");
      double acc = 0.0;
      for (double e : x.data) acc += e;
      if (op.kind == OpKind::kMean) acc /= static_cast<double>(x.data.size());
      return Tensor::scalar(acc);
    }
    case OpKind::kSlice: {
      const auto& x = v[op.inputs[0]];
      if (op.rows.end > x.rows() || op.cols.end > x.cols()) {
        shape_error(op, "slice out of bounds of " + shape_str(x.shape));
      }
      Tensor out({op.rows.size(), op.cols.size()});
      const std::size_t w = op.cols.size();
      for (std::size_t r = 0; r < op.rows.size(); ++r) {
        const double* src = x.data.data() + (op.rows.begin + r) * x.cols() + op.cols.begin;
        std::copy(src, src + w, out.data().data() + r * w);
      }
      return out;
    }
    case OpKind::kConcat: {
      const auto& a = v[op.inputs[0]];
      const auto& b = v[op.inputs[1]];
      if (op.axis == 0) {
        if (a.cols() != b.cols()) shape_error(op, "column counts differ");
        Tensor out({a.rows() + b.rows(), a.cols()});
        std::copy(a.data.begin(), a.data.end(), out.data().begin());
        std::copy(b.data.begin(), b.data.end(), out.data().begin() + a.data.size());
        return out;
      }
      if (a.rows() != b.rows()) shape_error(op, "row counts differ");
      const std::size_t ca = a.cols(), cb = b.cols();
      Tensor out({a.rows(), ca + cb});
      for (std::size_t r = 0; r < a.rows(); ++r) {
        std::copy_n(a.data.data() + r * ca, ca, out.data().data() + r * (ca + cb));
        std::copy_n(b.data.data() + r * cb, cb, out.data().data() + r * (ca + cb) + ca);
      }
      return out;
    }
    case OpKind::kClip: {
      const double lo = op.a, hi = op.b;
      return map_unary(v[op.inputs[0]], [lo, hi](double x) { return std::clamp(x, lo, hi); });
    }
    case OpKind::kMin:
      return map_binary(op, v[op.inputs[0]], v[op.inputs[1]],
                        [](double x, double y) { return x <= y ? x : y; });
    case OpKind::kMax:
      return map_binary(op, v[op.inputs[0]], v[op.inputs[1]],
                        [](double x, double y) { return x >= y ? x : y; });
    case OpKind::kReshape: {
      const auto& x = v[op.inputs[0]];
      if (shape_numel(op.shape) != x.data.size()) {
        shape_error(op, "cannot reshape " + shape_str(x.shape) + " to " + shape_str(op.shape));
      }
      return Tensor(op.shape, std::vector<double>(x.data.begin(), x.data.end()));
    }
    case OpKind::kInput:
    case OpKind::kConstant:
      break;
  }
  shape_error(op, "not an evaluable op");
}

}  // namespace

Evaluation forward(const Graph& graph, const Bindings& inputs) {
  Evaluation eval;
  const auto& ops = graph.ops();
  eval.values_.resize(ops.size());
  eval.views_.resize(ops.size());
  for (const auto& op : ops) {
    if (op.kind == OpKind::kInput) {
      auto it = inputs.find(op.output);
      if (it == inputs.end()) {
        shape_error(op, "input '" + op.name + "' is not bound");
      }
      if (it->second.data.size() != shape_numel(it->second.shape)) {
        shape_error(op, "bound buffer does not match its shape");
      }
      eval.views_[op.output] = it->second;
    } else if (op.kind == OpKind::kConstant) {
      eval.views_[op.output] = graph.constant_value(op).view();
    } else {
      eval.values_[op.output] = eval_op(op, eval.views_);
      eval.views_[op.output] = eval.values_[op.output].view();
    }
  }
  return eval;
}

// ---------------------------------------------------------------------------
// Backward

Gradients backward(const Graph& graph, Evaluation& eval, NodeId loss, const GradSinks& sinks) {
  const auto& ops = graph.ops();
  if (eval.views_.size() != ops.size()) {
    throw std::invalid_argument("backward: evaluation does not belong to this graph");
  }
  if (eval.views_.at(loss).data.size() != 1) {
    throw std::invalid_argument("backward: loss node #" + std::to_string(loss) +
                                " is not scalar " + shape_str(eval.views_[loss].shape));
  }

  Gradients leaf_grads;
  for (const auto& op : ops) {
    if (graph.is_leaf(op.output) && !sinks.contains(op.output)) {
      leaf_grads.emplace(op.output, Tensor(eval.views_[op.output].shape));
    }
  }

  auto adjoint = [&](NodeId id) -> std::span<double> {
    if (!graph.is_leaf(id)) return eval.values_[id].grad();
    if (auto it = sinks.find(id); it != sinks.end()) {
      if (it->second.size() != eval.views_[id].data.size()) {
        throw std::invalid_argument("gradient sink size mismatch for node #" + std::to_string(id));
      }
      return it->second;
    }
    return leaf_grads.at(id).data();
  };

  if (graph.is_leaf(loss)) {
    adjoint(loss)[0] += 1.0;
    return leaf_grads;
  }
  eval.values_[loss].grad()[0] = 1.0;

  const auto& v = eval.views_;
  for (std::size_t i = ops.size(); i-- > 0;) {
    const auto& op = ops[i];
    if (graph.is_leaf(op.output) || !eval.values_[i].has_grad()) continue;
    const std::span<const double> g = std::as_const(eval.values_[i]).grad();
    const auto& y = v[i];

    switch (op.kind) {
      case OpKind::kMatMul: {
        const auto& a = v[op.inputs[0]];
        const auto& b = v[op.inputs[1]];
        ConstMap gm(g.data(), a.rows(), b.cols());
        {
          auto da = adjoint(op.inputs[0]);
          MutMap(da.data(), a.rows(), a.cols()).noalias() +=
              gm * ConstMap(b.data.data(), b.rows(), b.cols()).transpose();
        }
        {
          auto db = adjoint(op.inputs[1]);
          MutMap(db.data(), b.rows(), b.cols()).noalias() +=
              ConstMap(a.data.data(), a.rows(), a.cols()).transpose() * gm;
        }
        break;
      }
      case OpKind::kAdd: {
        for (int k = 0; k < 2; ++k) {
          auto d = adjoint(op.inputs[k]);
          for (std::size_t j = 0; j < g.size(); ++j) d[j] += g[j];
        }
        break;
      }
      case OpKind::kBroadcastAdd: {
        auto dm = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) dm[j] += g[j];
        auto drow = adjoint(op.inputs[1]);
        const std::size_t cols = y.cols();
        for (std::size_t r = 0; r < y.rows(); ++r) {
          for (std::size_t c = 0; c < cols; ++c) drow[c] += g[r * cols + c];
        }
        break;
      }
      case OpKind::kMul: {
        const auto& a = v[op.inputs[0]];
        const auto& b = v[op.inputs[1]];
        const Broadcast mode = classify(a, b);
        auto da = adjoint(op.inputs[0]);
        auto db = adjoint(op.inputs[1]);
        const std::size_t cols = a.cols();
        if (mode == Broadcast::kSame) {
          for (std::size_t j = 0; j < g.size(); ++j) {
            da[j] += g[j] * b[j];
            db[j] += g[j] * a[j];
          }
        } else {
          for (std::size_t r = 0; r < a.rows(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              const std::size_t j = r * cols + c;
              const std::size_t k = broadcast_index(mode, r, c);
              da[j] += g[j] * b[k];
              db[k] += g[j] * a[j];
            }
          }
        }
        break;
      }
      case OpKind::kAffine: {
        auto d = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) d[j] += op.a * g[j];
        break;
      }
      case OpKind::kTanh: {
        auto d = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) d[j] += g[j] * (1.0 - y[j] * y[j]);
        break;
      }
      case OpKind::kExp: {
        auto d = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) d[j] += g[j] * y[j];
        break;
      }
      case OpKind::kLog: {
        const auto& x = v[op.inputs[0]];
        auto d = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) d[j] += g[j] / x[j];
        break;
      }
      case OpKind::kSquare: {
        const auto& x = v[op.inputs[0]];
        auto d = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) d[j] += 2.0 * x[j] * g[j];
        break;
      }
      case OpKind::kSum:
      case OpKind::kMean: {
        auto d = adjoint(op.inputs[0]);
        const double s = op.kind == OpKind::kMean ? g[0] / static_cast<double>(d.size()) : g[0];
        for (double& e : d) e += s;
        break;
      }
      case OpKind::kSlice: {
        const auto& x = v[op.inputs[0]];
        auto d = adjoint(op.inputs[0]);
        const std::size_t w = op.cols.size();
        for (std::size_t r = 0; r < op.rows.size(); ++r) {
          double* dst = d.data() + (op.rows.begin + r) * x.cols() + op.cols.begin;
          const double* src = g.data() + r * w;
          for (std::size_t c = 0; c < w; ++c) dst[c] += src[c];
        }
        break;
      }
      case OpKind::kConcat: {
        const auto& a = v[op.inputs[0]];
        const auto& b = v[op.inputs[1]];
        auto da = adjoint(op.inputs[0]);
        auto db = adjoint(op.inputs[1]);
        if (op.axis == 0) {
          for (std::size_t j = 0; j < da.size(); ++j) da[j] += g[j];
          for (std::size_t j = 0; j < db.size(); ++j) db[j] += g[a.data.size() + j];
        } else {
          const std::size_t ca = a.cols(), cb = b.cols();
          for (std::size_t r = 0; r < a.rows(); ++r) {
            for (std::size_t c = 0; c < ca; ++c) da[r * ca + c] += g[r * (ca + cb) + c];
            for (std::size_t c = 0; c < cb; ++c) db[r * cb + c] += g[r * (ca + cb) + ca + c];
          }
        }
        break;
      }
      case OpKind::kClip: {
        // Gradient passes on the closed interval, so a value sitting exactly on
        // a bound takes the unclipped branch.
        const auto& x = v[op.inputs[0]];
        auto d = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) {
          if (x[j] >= op.a && x[j] <= op.b) d[j] += g[j];
        }
        break;
      }
      case OpKind::kMin:
      case OpKind::kMax: {
        const auto& a = v[op.inputs[0]];
        const auto& b = v[op.inputs[1]];
        auto da = adjoint(op.inputs[0]);
        auto db = adjoint(op.inputs[1]);
        const bool is_min = op.kind == OpKind::kMin;
        for (std::size_t j = 0; j < g.size(); ++j) {
          const bool first = is_min ? a[j] <= b[j] : a[j] >= b[j];
          (first ? da : db)[j] += g[j];
        }
        break;
      }
      case OpKind::kReshape: {
        auto d = adjoint(op.inputs[0]);
        for (std::size_t j = 0; j < g.size(); ++j) d[j] += g[j];
        break;
      }
      case OpKind::kInput:
      case OpKind::kConstant:
        break;
    }
  }
  return leaf_grads;
}

}  // namespace hyperppo
