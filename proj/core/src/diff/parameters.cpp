#include "mobtcast/diff/parameters.hpp"

namespace mobtcast::diff {

Tensor& ParameterSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) {
    throw Error("duplicate parameter '" + name + "'");
  }
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterSet::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error("unknown parameter '" + std::string(name) + "'");
  }
  return it->second;
}

Tensor& ParameterSet::at(std::string_view name) { return entries_[index_of(name)].second; }
const Tensor& ParameterSet::at(std::string_view name) const { return entries_[index_of(name)].second; }

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& [name, t] : entries_) out.add(name, Tensor(t.shape(), 0.0));
  return out;
}

}  // namespace mobtcast::diff
