#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hyperppo/graph.hpp"
#include "hyperppo/random.hpp"

namespace hyperppo {

struct ParamEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;

  std::size_t size() const { return shape_numel(shape); }
  bool operator==(const ParamEntry&) const = default;
};

// Named slices of one contiguous parameter vector. The order of add() calls
// fixes the flattened layout.
class ParamLayout {
 public:
  const ParamEntry& add(std::string name, Shape shape);
  const ParamEntry& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t total() const { return total_; }

  bool operator==(const ParamLayout& other) const { return entries_ == other.entries_; }

 private:
  std::vector<ParamEntry> entries_;
  std::size_t total_ = 0;
};

// Fills the entry with N(0, stddev^2) draws.
void init_normal(const ParamEntry& entry, std::span<double> params, double stddev, Rng& rng);

// Exposes named parameters of a flat buffer as graph inputs. Each name gets one
// input node on first use; the binding is a view, so no data is copied.
class ParamScope {
 public:
  ParamScope(Graph& graph, const ParamLayout& layout, std::span<const double> values);

  NodeId operator()(std::string_view name);
  Graph& graph() { return graph_; }

  // Adds the parameter bindings to `inputs`.
  void bind(Bindings& inputs) const;
  // Routes each used parameter's gradient into its slice of `flat_grad`.
  GradSinks sinks(std::span<double> flat_grad) const;

 private:
  Graph& graph_;
  const ParamLayout& layout_;
  std::span<const double> values_;
  std::vector<std::pair<NodeId, const ParamEntry*>> used_;
  std::unordered_map<std::string, NodeId> by_name_;
};

}  // namespace hyperppo
