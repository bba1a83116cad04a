#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "alignmix/errors.hpp"

namespace alignmix {

/// Dense c x h x w array, channel-major, each channel plane row-major over (h, w).
/// Used for images, intermediate activations and stage-1 feature tensors.
template <typename T>
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, T fill = T{0})
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}
  Tensor3(int c, int h, int w, std::vector<T> values)
      : channels(c), height(h), width(w), data(std::move(values)) {
    if (data.size() != static_cast<std::size_t>(c) * h * w)
      throw dimension_error("Tensor3: buffer size does not match shape");
  }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] int plane() const { return height * width; }

  T& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  const T& at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  [[nodiscard]] bool same_shape(const Tensor3& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  bool operator==(const Tensor3&) const = default;
};

template <typename T>
using Vector = std::vector<T>;

/// Row-major dense matrix of doubles; the cost matrices and transport plans live here.
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  [[nodiscard]] std::span<const double> row(int i) const {
    return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
  }
  [[nodiscard]] std::span<const double> values() const { return data_; }
  [[nodiscard]] std::span<double> values() { return data_; }

  [[nodiscard]] Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool operator==(const Matrix&) const = default;

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

template <typename T>
bool all_finite(std::span<const T> v) {
  for (T x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace alignmix
