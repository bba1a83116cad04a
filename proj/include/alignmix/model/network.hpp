#pragma once

#include <cstdint>

#include "alignmix/model/layers.hpp"
#include "alignmix/model/params.hpp"
#include "alignmix/tensor.hpp"

namespace alignmix::model {

template <typename T>
using Image = Tensor3<T>;

/// Topology of the autoencoder-classifier.
///
/// E:  conv3x3 stride-2 blocks down to max(feature_size, 4), one stride-1 block, and
///     a 2x2 average pool when feature_size == 2. Output c x F x F.
/// e:  fully connected c*F*F -> c, no activation  (latent z, d = c)
/// D:  fully connected c -> c*F*F, ReLU, then the encoder mirrored with transposed
///     convolutions, sigmoid on the image output
/// g:  fully connected c -> k (logits)
struct Architecture {
  int in_channels = 1;
  int image_size = 16;
  int channels = 16;
  int feature_size = 4;
  int classes = 4;
  bool decoder = true;

  void validate() const;
  [[nodiscard]] int latent_dim() const { return channels; }
  [[nodiscard]] int spatial_positions() const { return feature_size * feature_size; }
  bool operator==(const Architecture&) const = default;
};

/// Parameters and topology of E, e, D, g. Weights use fan-in (Kaiming) scaling,
/// biases start at zero.
template <typename T>
class ModelBundle {
public:
  explicit ModelBundle(const Architecture& arch, std::uint64_t seed = 0);

  [[nodiscard]] const Architecture& arch() const { return arch_; }
  [[nodiscard]] ParamStore<T>& params() { return params_; }
  [[nodiscard]] const ParamStore<T>& params() const { return params_; }

  [[nodiscard]] const Sequential& stage1() const { return stage1_; }
  [[nodiscard]] const Sequential& stage2() const { return stage2_; }
  [[nodiscard]] const Sequential& decoder() const { return decoder_; }
  [[nodiscard]] const Sequential& classifier() const { return classifier_; }

  /// Index range [first, last) of the parameters owned by each sub-network.
  struct Range {
    int first = 0;
    int last = 0;
    [[nodiscard]] bool contains(int i) const { return i >= first && i < last; }
  };
  [[nodiscard]] Range stage1_params() const { return stage1_range_; }
  [[nodiscard]] Range stage2_params() const { return stage2_range_; }
  [[nodiscard]] Range decoder_params() const { return decoder_range_; }
  [[nodiscard]] Range classifier_params() const { return classifier_range_; }

  // Plain forward passes.
  [[nodiscard]] Tensor3<T> features(const Image<T>& x) const { return stage1_.forward(x, params_); }
  [[nodiscard]] Vector<T> latent(const Tensor3<T>& a) const { return stage2_.forward(a, params_).data; }
  [[nodiscard]] Vector<T> encode(const Image<T>& x) const { return latent(features(x)); }
  [[nodiscard]] Image<T> decode(const Vector<T>& z) const;
  [[nodiscard]] Vector<T> logits(const Vector<T>& z) const;
  [[nodiscard]] Image<T> reconstruct(const Image<T>& x) const { return decode(encode(x)); }

  /// Same topology, parameters converted to U.
  template <typename U>
  [[nodiscard]] ModelBundle<U> cast() const {
    ModelBundle<U> out(arch_, 0);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& src = params_[static_cast<int>(i)].value;
      auto& dst = out.params()[static_cast<int>(i)].value;
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<U>(src[k]);
    }
    return out;
  }

private:
  Architecture arch_;
  ParamStore<T> params_;
  Sequential stage1_{"E"}, stage2_{"e"}, decoder_{"D"}, classifier_{"g"};
  Range stage1_range_, stage2_range_, decoder_range_, classifier_range_;
};

}  // namespace alignmix::model
