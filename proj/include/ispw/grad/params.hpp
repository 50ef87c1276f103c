#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ispw/grad/tensor.hpp"
#include "ispw/rng.hpp"

namespace ispw::grad {

/// Named parameter tensors, iterated in lexicographic name order.
template <class T>
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    auto [it, inserted] = entries_.emplace(name, std::move(t));
    if (!inserted) throw ParameterError("duplicate parameter name '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const Tensor<T>& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ParameterError("unknown parameter '" + name + "'");
    return it->second;
  }
  Tensor<T>& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ParameterError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t total_numel() const {
    std::size_t n = 0;
    for (const auto& [_, t] : entries_) n += t.numel();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [k, t] : entries_) out.add(k, t.template cast<U>());
    return out;
  }

  /// Same names and shapes, zero-filled.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& [k, t] : entries_) out.add(k, Tensor<T>(t.shape()));
    return out;
  }

  /// this += scale * other, matching entries by name.
  void add_scaled(const ParamSet& other, T scale) {
    for (const auto& [k, t] : other.entries_) {
      auto& dst = at(k);
      if (dst.shape() != t.shape()) {
        throw DimensionError("parameter '" + k + "' shape " + shape_str(dst.shape()) + " vs " + shape_str(t.shape()));
      }
      for (std::size_t i = 0; i < t.numel(); ++i) dst[i] += scale * t[i];
    }
  }

  bool all_finite() const {
    for (const auto& [_, t] : entries_) {
      for (T v : t.values()) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  bool operator==(const ParamSet&) const = default;

 private:
  Map entries_;
};

namespace init {

/// Kaiming-uniform with leaky-ReLU gain: U(-b, b), b = sqrt(6 / ((1 + slope^2) fan_in)) * scale.
template <class T>
Tensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, SplitMix64& rng, double scale = 1.0,
                          double slope = 0.2) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / ((1.0 + slope * slope) * double(fan_in))) * scale;
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace init

}  // namespace ispw::grad
