#pragma once

// Layers with explicit forward and reverse-mode passes. Each layer is a small value
// type holding shapes and parameter indices; weights live in a ParamStore so that a
// network can be instantiated at float (training) or double (gradient checks).

#include <random>
#include <string>
#include <variant>
#include <vector>

#include "alignmix/model/params.hpp"
#include "alignmix/tensor.hpp"

namespace alignmix::model {

/// 2-D cross-correlation. Weight [out][in][k][k], bias [out].
struct Conv2d {
  int in_channels = 0, out_channels = 0, kernel = 3, stride = 1, padding = 1;
  int weight = -1, bias = -1;

  [[nodiscard]] int out_size(int n) const { return (n + 2 * padding - kernel) / stride + 1; }
  [[nodiscard]] int fan_in() const { return in_channels * kernel * kernel; }
};

/// Adjoint of Conv2d: each input pixel scatters a kernel-sized patch.
/// Weight [in][out][k][k], bias [out].
struct ConvTranspose2d {
  int in_channels = 0, out_channels = 0, kernel = 4, stride = 2, padding = 1;
  int weight = -1, bias = -1;

  [[nodiscard]] int out_size(int n) const { return (n - 1) * stride - 2 * padding + kernel; }
  [[nodiscard]] int fan_in() const { return in_channels * kernel * kernel / (stride * stride); }
};

/// Fully connected on the flattened input. Weight [out][in], bias [out].
struct Linear {
  int in_features = 0, out_features = 0;
  int weight = -1, bias = -1;
};

/// Reinterprets the buffer with a new shape of equal size.
struct Reshape {
  int channels = 0, height = 0, width = 0;
};

struct Relu {};
struct Sigmoid {};
/// 2x2 average pooling, stride 2.
struct AvgPool2 {};

using Layer = std::variant<Conv2d, ConvTranspose2d, Linear, Reshape, Relu, Sigmoid, AvgPool2>;

/// Activations recorded by a forward pass: entry 0 is the input, entry i + 1 the
/// output of layer i.
template <typename T>
using Trace = std::vector<Tensor3<T>>;

template <typename T>
Tensor3<T> layer_forward(const Layer& layer, const Tensor3<T>& in, const ParamStore<T>& params);

/// Returns d(loss)/d(input); accumulates parameter gradients into `grads` when non-null.
template <typename T>
Tensor3<T> layer_backward(const Layer& layer, const Tensor3<T>& in, const Tensor3<T>& out,
                          const Tensor3<T>& grad_out, const ParamStore<T>& params, Gradients<T>* grads);

/// A named chain of layers.
class Sequential {
public:
  Sequential() = default;
  explicit Sequential(std::string name) : name_(std::move(name)) {}

  void push(std::string layer_name, Layer layer) {
    names_.push_back(name_ + "." + std::move(layer_name));
    layers_.push_back(std::move(layer));
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] const std::vector<std::string>& layer_names() const { return names_; }

  /// Throws numeric_error naming the first layer whose output is not finite.
  template <typename T>
  Tensor3<T> forward(const Tensor3<T>& in, const ParamStore<T>& params, Trace<T>* trace = nullptr) const;

  template <typename T>
  Tensor3<T> backward(const Trace<T>& trace, const Tensor3<T>& grad_out, const ParamStore<T>& params,
                      Gradients<T>* grads) const;

private:
  std::string name_;
  std::vector<std::string> names_;
  std::vector<Layer> layers_;
};

}  // namespace alignmix::model
