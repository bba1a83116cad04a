#include "alignmix/model/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace alignmix::model {

namespace {

template <typename T>
Tensor3<T> as_column(const Vector<T>& v) {
  return Tensor3<T>(static_cast<int>(v.size()), 1, 1, v);
}

template <typename T>
void check_label(std::span<const T> y, const Architecture& arch) {
  if (static_cast<int>(y.size()) != arch.classes) throw dimension_error("label length does not match class count");
}

}  // namespace

template <typename T>
std::vector<T> one_hot(int label, int classes) {
  if (label < 0 || label >= classes) throw parameter_error("one_hot: label out of range");
  std::vector<T> y(static_cast<std::size_t>(classes), T{0});
  y[static_cast<std::size_t>(label)] = T{1};
  return y;
}

template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
  double hi = -std::numeric_limits<double>::infinity();
  for (T v : logits) hi = std::max(hi, static_cast<double>(v));
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] = std::exp(static_cast<double>(logits[i]) - hi);
  for (double& v : p) v /= s;
  return p;
}

template <typename T>
double cross_entropy(std::span<const T> logits, std::span<const T> target, std::vector<T>* grad_logits) {
  if (logits.size() != target.size()) throw dimension_error("cross_entropy: logits and target differ in length");
  double hi = -std::numeric_limits<double>::infinity();
  for (T v : logits) hi = std::max(hi, static_cast<double>(v));
  double z = 0.0;
  for (T v : logits) z += std::exp(static_cast<double>(v) - hi);
  const double log_z = hi + std::log(z);
  double s = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    s += static_cast<double>(target[i]) * (static_cast<double>(logits[i]) - log_z);
    mass += static_cast<double>(target[i]);
  }
  if (grad_logits) {
    grad_logits->resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double p = std::exp(static_cast<double>(logits[i]) - log_z);
      (*grad_logits)[i] = static_cast<T>(mass * p - static_cast<double>(target[i]));
    }
  }
  return -s;
}

template <typename T>
double reconstruction_loss(const Image<T>& x, const Image<T>& x_hat, Image<T>* grad_x_hat) {
  if (!x.same_shape(x_hat)) throw dimension_error("reconstruction_loss: image shapes differ");
  double s = 0.0;
  if (grad_x_hat) *grad_x_hat = Image<T>(x.channels, x.height, x.width);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = static_cast<double>(x_hat.data[k]) - static_cast<double>(x.data[k]);
    s += d * d;
    if (grad_x_hat) grad_x_hat->data[k] = static_cast<T>(2.0 * d);
  }
  return s;
}

template <typename T>
LossValue loss_clean(const ModelBundle<T>& model, const Image<T>& x, std::span<const T> y, Gradients<T>* grads,
                     LossTerms terms) {
  check_label(y, model.arch());
  const auto& p = model.params();
  Trace<T> t1, t2, td, tg;
  const Tensor3<T> a = model.stage1().forward(x, p, grads ? &t1 : nullptr);
  const Tensor3<T> z = model.stage2().forward(a, p, grads ? &t2 : nullptr);

  LossValue out;
  Tensor3<T> grad_z(z.channels, 1, 1);
  bool any_grad = false;

  if (terms.classification) {
    const Tensor3<T> logits = model.classifier().forward(z, p, grads ? &tg : nullptr);
    std::vector<T> dlogits;
    out.classification = cross_entropy<T>(logits.data, y, grads ? &dlogits : nullptr);
    if (grads) {
      const Tensor3<T> g = model.classifier().backward(tg, as_column(dlogits), p, grads);
      for (std::size_t k = 0; k < g.size(); ++k) grad_z.data[k] += g.data[k];
      any_grad = true;
    }
  }
  // Without a decoder the reconstruction term does not exist.
  if (terms.reconstruction && model.arch().decoder) {
    const Image<T> x_hat = model.decoder().forward(z, p, grads ? &td : nullptr);
    Image<T> dx_hat;
    out.reconstruction = reconstruction_loss(x, x_hat, grads ? &dx_hat : nullptr);
    if (grads) {
      const Tensor3<T> g = model.decoder().backward(td, dx_hat, p, grads);
      for (std::size_t k = 0; k < g.size(); ++k) grad_z.data[k] += g.data[k];
      any_grad = true;
    }
  }
  if (grads && any_grad) {
    const Tensor3<T> ga = model.stage2().backward(t2, grad_z, p, grads);
    model.stage1().backward(t1, ga, p, grads);
  }
  return out;
}

template <typename T>
MixedPass<T> mixed_forward(const ModelBundle<T>& model, MixMode mode, double lambda, const Image<T>& x,
                           const Image<T>& x2, const MixOptions& opts) {
  if (mode == MixMode::Clean) throw parameter_error("mixed_forward: Clean is not a mixing mode");
  if (!x.same_shape(x2)) throw dimension_error("mixed_forward: images differ in shape");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw parameter_error("mixed_forward: lambda must lie in [0, 1]");
  const auto& p = model.params();
  MixedPass<T> pass;
  pass.mode = mode;
  pass.lambda = lambda;

  switch (mode) {
    case MixMode::Input: {
      const Image<T> xm = mixup::mix_linear(lambda, x, x2);
      const Tensor3<T> a = model.stage1().forward(xm, p, &pass.first_stage1);
      pass.z = model.stage2().forward(a, p, &pass.mixed_stage2).data;
      break;
    }
    case MixMode::Latent: {
      const Tensor3<T> z1 = model.stage2().forward(model.stage1().forward(x, p, &pass.first_stage1), p,
                                                   &pass.first_stage2);
      const Tensor3<T> z2 = model.stage2().forward(model.stage1().forward(x2, p, &pass.second_stage1), p,
                                                   &pass.second_stage2);
      pass.z = mixup::mix_linear(lambda, z1, z2).data;
      break;
    }
    case MixMode::FeatBase:
    case MixMode::FeatPrime: {
      pass.swapped = mode == MixMode::FeatPrime;
      const Image<T>& first = pass.swapped ? x2 : x;
      const Image<T>& second = pass.swapped ? x : x2;
      const Tensor3<T> a = model.stage1().forward(first, p, &pass.first_stage1);
      const Tensor3<T> a2 = model.stage1().forward(second, p, &pass.second_stage1);
      Tensor3<T> aligned;
      if (opts.align) {
        pass.assignment = opts.frozen_assignment ? *opts.frozen_assignment
                                                 : ot::solve_assignment(a, a2, opts.sinkhorn);
        aligned = ot::apply_assignment(a, a2, *pass.assignment, ot::AlignDirection::to_second);
      } else {
        aligned = a2;
      }
      const Tensor3<T> mixed = mixup::mix_linear(lambda, a, aligned);
      pass.z = model.stage2().forward(mixed, p, &pass.mixed_stage2).data;
      break;
    }
    case MixMode::Clean:
      break;
  }
  return pass;
}

template <typename T>
void mixed_backward(const ModelBundle<T>& model, const MixedPass<T>& pass, const Vector<T>& grad_z,
                    Gradients<T>* grads) {
  const auto& p = model.params();
  const Tensor3<T> gz = as_column(grad_z);
  // d lerp(v, u, t) = t du + (1 - t) dv
  const T w_first = static_cast<T>(pass.lambda);
  const T w_second = static_cast<T>(1.0 - pass.lambda);
  auto scaled = [](Tensor3<T> g, T s) {
    for (T& v : g.data) v *= s;
    return g;
  };

  switch (pass.mode) {
    case MixMode::Input: {
      const Tensor3<T> ga = model.stage2().backward(pass.mixed_stage2, gz, p, grads);
      model.stage1().backward(pass.first_stage1, ga, p, grads);
      break;
    }
    case MixMode::Latent: {
      const Tensor3<T> ga1 = model.stage2().backward(pass.first_stage2, scaled(gz, w_first), p, grads);
      model.stage1().backward(pass.first_stage1, ga1, p, grads);
      const Tensor3<T> ga2 = model.stage2().backward(pass.second_stage2, scaled(gz, w_second), p, grads);
      model.stage1().backward(pass.second_stage1, ga2, p, grads);
      break;
    }
    case MixMode::FeatBase:
    case MixMode::FeatPrime: {
      const Tensor3<T> gm = model.stage2().backward(pass.mixed_stage2, gz, p, grads);
      model.stage1().backward(pass.first_stage1, scaled(gm, w_first), p, grads);
      Tensor3<T> g_aligned = scaled(gm, w_second);
      // aligned = A' R^T, so dA' = d(aligned) R; R itself receives no gradient.
      const Tensor3<T> ga2 = pass.assignment
                                 ? ot::apply_assignment(g_aligned, g_aligned, *pass.assignment,
                                                        ot::AlignDirection::to_first)
                                 : std::move(g_aligned);
      model.stage1().backward(pass.second_stage1, ga2, p, grads);
      break;
    }
    case MixMode::Clean:
      break;
  }
}

template <typename T>
LossValue loss_mixed(const ModelBundle<T>& model, MixMode mode, double lambda, const Image<T>& x,
                     const Image<T>& x2, std::span<const T> y, std::span<const T> y2, const MixOptions& opts,
                     Gradients<T>* grads) {
  check_label(y, model.arch());
  check_label(y2, model.arch());
  const MixedPass<T> pass = mixed_forward(model, mode, lambda, x, x2, opts);
  const bool swap = pass.swapped;
  const std::vector<T> target = mixup::mix_linear<T>(lambda, swap ? y2 : y, swap ? y : y2);

  Trace<T> tg;
  const Tensor3<T> logits = model.classifier().forward(as_column(pass.z), model.params(), grads ? &tg : nullptr);
  std::vector<T> dlogits;
  LossValue out;
  out.classification = cross_entropy<T>(logits.data, target, grads ? &dlogits : nullptr);
  if (grads) {
    const Tensor3<T> gz = model.classifier().backward(tg, as_column(dlogits), model.params(), grads);
    mixed_backward(model, pass, gz.data, grads);
  }
  return out;
}

template <typename T>
InputGradient<T> classification_input_gradient(const ModelBundle<T>& model, const Image<T>& x,
                                               std::span<const T> y) {
  check_label(y, model.arch());
  const auto& p = model.params();
  Trace<T> t1, t2, tg;
  const Tensor3<T> a = model.stage1().forward(x, p, &t1);
  const Tensor3<T> z = model.stage2().forward(a, p, &t2);
  const Tensor3<T> logits = model.classifier().forward(z, p, &tg);
  std::vector<T> dlogits;
  InputGradient<T> out;
  out.loss = cross_entropy<T>(logits.data, y, &dlogits);
  const Tensor3<T> gz = model.classifier().backward(tg, as_column(dlogits), p, static_cast<Gradients<T>*>(nullptr));
  const Tensor3<T> ga = model.stage2().backward(t2, gz, p, static_cast<Gradients<T>*>(nullptr));
  out.grad = model.stage1().backward(t1, ga, p, static_cast<Gradients<T>*>(nullptr));
  if (!all_finite<T>(out.grad.data)) throw numeric_error("non-finite input gradient");
  return out;
}

#define ALIGNMIX_LOSSES_INSTANTIATE(T)                                                                        \
  template std::vector<T> one_hot<T>(int, int);                                                              \
  template std::vector<double> softmax<T>(std::span<const T>);                                               \
  template double cross_entropy<T>(std::span<const T>, std::span<const T>, std::vector<T>*);                 \
  template double reconstruction_loss<T>(const Image<T>&, const Image<T>&, Image<T>*);                       \
  template LossValue loss_clean<T>(const ModelBundle<T>&, const Image<T>&, std::span<const T>, Gradients<T>*, \
                                   LossTerms);                                                               \
  template MixedPass<T> mixed_forward<T>(const ModelBundle<T>&, MixMode, double, const Image<T>&,           \
                                         const Image<T>&, const MixOptions&);                                \
  template void mixed_backward<T>(const ModelBundle<T>&, const MixedPass<T>&, const Vector<T>&,             \
                                  Gradients<T>*);                                                            \
  template LossValue loss_mixed<T>(const ModelBundle<T>&, MixMode, double, const Image<T>&, const Image<T>&, \
                                   std::span<const T>, std::span<const T>, const MixOptions&, Gradients<T>*); \
  template InputGradient<T> classification_input_gradient<T>(const ModelBundle<T>&, const Image<T>&,        \
                                                             std::span<const T>);

ALIGNMIX_LOSSES_INSTANTIATE(float)
ALIGNMIX_LOSSES_INSTANTIATE(double)

#undef ALIGNMIX_LOSSES_INSTANTIATE

}  // namespace alignmix::model
