#pragma once

#include "alignmix/mixup/mixup.hpp"
#include "alignmix/model/losses.hpp"
#include "alignmix/model/network.hpp"

namespace alignmix::mixup {

/// Latent vector of the generic mixup operator: the encoder e o E is split as
/// f2 o f1 at the input (Input), the feature tensor (FeatBase / FeatPrime, aligned
/// mixing) or the latent (Latent), and the two examples are mixed after f1.
template <typename T>
Vector<T> mix_generic(MixMode mode, MixFactor factor, const model::Image<T>& x, const model::Image<T>& x2,
                      const model::ModelBundle<T>& model, const ot::SinkhornConfig& cfg, bool align = true) {
  model::MixOptions opts;
  opts.sinkhorn = cfg;
  opts.align = align;
  return model::mixed_forward(model, mode, factor.lambda, x, x2, opts).z;
}

}  // namespace alignmix::mixup
