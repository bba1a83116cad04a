#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "alignmix/errors.hpp"

namespace alignmix::model {

template <typename T>
struct Param {
  std::string name;
  std::vector<int> dims;
  std::vector<T> value;
};

/// Named parameter tensors in registration order. Registration order is also the
/// checkpoint order.
template <typename T>
class ParamStore {
public:
  int add(std::string name, std::vector<int> dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    params_.push_back(Param<T>{std::move(name), std::move(dims), std::vector<T>(n, T{0})});
    return static_cast<int>(params_.size()) - 1;
  }

  [[nodiscard]] std::size_t size() const { return params_.size(); }
  Param<T>& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Param<T>& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }

  [[nodiscard]] int find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
      if (params_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  [[nodiscard]] std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

private:
  std::vector<Param<T>> params_;
};

/// Gradient buffers shaped like a ParamStore.
template <typename T>
struct Gradients {
  std::vector<std::vector<T>> values;

  Gradients() = default;
  explicit Gradients(const ParamStore<T>& store) {
    values.reserve(store.size());
    for (const auto& p : store) values.emplace_back(p.value.size(), T{0});
  }

  std::vector<T>& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  const std::vector<T>& operator[](int i) const { return values[static_cast<std::size_t>(i)]; }

  void zero() {
    for (auto& v : values) std::fill(v.begin(), v.end(), T{0});
  }

  /// this += scale * other
  void accumulate(const Gradients& other, T scale) {
    for (std::size_t i = 0; i < values.size(); ++i)
      for (std::size_t k = 0; k < values[i].size(); ++k) values[i][k] += scale * other.values[i][k];
  }
};

}  // namespace alignmix::model
