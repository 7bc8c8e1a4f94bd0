#include "hyperppo/params.hpp"

#include <stdexcept>

namespace hyperppo {

const ParamEntry& ParamLayout::add(std::string name, Shape shape) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  ParamEntry e{std::move(name), std::move(shape), total_};
  total_ += e.size();
  entries_.push_back(std::move(e));
  return entries_.back();
}

const ParamEntry& ParamLayout::at(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw std::out_of_range("unknown parameter '" + std::string(name) + "'");
}

bool ParamLayout::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

void init_normal(const ParamEntry& entry, std::span<double> params, double stddev, Rng& rng) {
  for (std::size_t i = 0; i < entry.size(); ++i) {
    params[entry.offset + i] = stddev * standard_normal(rng);
  }
}

ParamScope::ParamScope(Graph& graph, const ParamLayout& layout, std::span<const double> values)
    : graph_(graph), layout_(layout), values_(values) {
  if (values.size() != layout.total()) {
    throw std::invalid_argument("parameter buffer size does not match layout");
  }
}

NodeId ParamScope::operator()(std::string_view name) {
  auto it = by_name_.find(std::string(name));
  if (it != by_name_.end()) return it->second;
  const ParamEntry& e = layout_.at(name);
  const NodeId id = graph_.input(e.name);
  by_name_.emplace(e.name, id);
  used_.emplace_back(id, &e);
  return id;
}

void ParamScope::bind(Bindings& inputs) const {
  for (const auto& [id, e] : used_) {
    inputs[id] = TensorView{e->shape, values_.subspan(e->offset, e->size())};
  }
}

GradSinks ParamScope::sinks(std::span<double> flat_grad) const {
  if (flat_grad.size() != layout_.total()) {
    throw std::invalid_argument("gradient buffer size does not match layout");
  }
  GradSinks out;
  for (const auto& [id, e] : used_) out.emplace(id, flat_grad.subspan(e->offset, e->size()));
  return out;
}

}  // namespace hyperppo
