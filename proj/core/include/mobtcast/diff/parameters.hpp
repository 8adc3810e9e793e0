#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::diff {

/// Ordered collection of named tensors. Insertion order is the canonical
/// iteration order (checkpoints, optimizer state, gradient checks).
class ParameterSet {
 public:
  /// Adds a new entry; throws if the name is taken.
  Tensor& add(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::size_t index) { return entries_.at(index).second; }
  const Tensor& at(std::size_t index) const { return entries_.at(index).second; }
  const std::string& name(std::size_t index) const { return entries_.at(index).first; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t total_elements() const;

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

using NamedTensors = std::map<std::string, Tensor, std::less<>>;

}  // namespace mobtcast::diff
