#pragma once

// Losses of the autoencoder-classifier and their parameter gradients.
//
// Clean examples:  L_r(x, D(z)) + L_c(g(z), y)       with z = e(E(x))
// Mixed examples:  L_c(g(Mix(x, x')), mix(y, y'))    (no reconstruction term)
//
// Gradients are produced by explicit reverse passes through the recorded traces.
// The assignment matrix of the feature modes is a constant in that pass.

#include <optional>
#include <span>
#include <vector>

#include "alignmix/mixup/mixup.hpp"
#include "alignmix/model/network.hpp"
#include "alignmix/ot/align.hpp"

namespace alignmix::model {

using mixup::MixMode;

struct LossTerms {
  bool reconstruction = true;
  bool classification = true;
};

struct LossValue {
  double reconstruction = 0.0;
  double classification = 0.0;
  [[nodiscard]] double total() const { return reconstruction + classification; }
};

template <typename T>
std::vector<T> one_hot(int label, int classes);

/// Numerically stable softmax, evaluated in double.
template <typename T>
std::vector<double> softmax(std::span<const T> logits);

/// -sum_i t_i log softmax(logits)_i. Writes d/d(logits) when requested.
template <typename T>
double cross_entropy(std::span<const T> logits, std::span<const T> target, std::vector<T>* grad_logits = nullptr);

/// ||x - x_hat||^2 summed over all pixels.
template <typename T>
double reconstruction_loss(const Image<T>& x, const Image<T>& x_hat, Image<T>* grad_x_hat = nullptr);

template <typename T>
LossValue loss_clean(const ModelBundle<T>& model, const Image<T>& x, std::span<const T> y,
                     Gradients<T>* grads = nullptr, LossTerms terms = {});

struct MixOptions {
  ot::SinkhornConfig sinkhorn{};
  /// false mixes feature tensors position-by-position (the unaligned ablation).
  bool align = true;
  /// When set, used in place of the Sinkhorn solve (for the pair after any swap).
  const ot::AssignmentMatrix* frozen_assignment = nullptr;
};

/// Forward state of one mixed example, kept for the reverse pass.
template <typename T>
struct MixedPass {
  MixMode mode = MixMode::Input;
  double lambda = 1.0;
  bool swapped = false;
  Trace<T> first_stage1, second_stage1;    // E on x (or the mixed input) and on x'
  Trace<T> first_stage2, second_stage2;    // e on each example (latent mode)
  Trace<T> mixed_stage2;                   // e on the mixed input / features
  std::optional<ot::AssignmentMatrix> assignment;
  Vector<T> z;
};

template <typename T>
MixedPass<T> mixed_forward(const ModelBundle<T>& model, MixMode mode, double lambda, const Image<T>& x,
                           const Image<T>& x2, const MixOptions& opts);

template <typename T>
void mixed_backward(const ModelBundle<T>& model, const MixedPass<T>& pass, const Vector<T>& grad_z,
                    Gradients<T>* grads);

/// Cross-entropy of the mixed forward pass against mix(y, y'); for FeatPrime the
/// examples and labels are swapped first.
template <typename T>
LossValue loss_mixed(const ModelBundle<T>& model, MixMode mode, double lambda, const Image<T>& x,
                     const Image<T>& x2, std::span<const T> y, std::span<const T> y2, const MixOptions& opts,
                     Gradients<T>* grads = nullptr);

template <typename T>
struct InputGradient {
  double loss = 0.0;
  Image<T> grad;
};

/// d L_c(g(e(E(x))), y) / dx for a frozen model.
template <typename T>
InputGradient<T> classification_input_gradient(const ModelBundle<T>& model, const Image<T>& x,
                                               std::span<const T> y);

}  // namespace alignmix::model
