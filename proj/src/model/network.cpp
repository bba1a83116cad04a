#include "alignmix/model/network.hpp"

#include <cmath>
#include <random>
#include <string>

namespace alignmix::model {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void Architecture::validate() const {
  if (in_channels < 1) throw parameter_error("architecture: in_channels must be >= 1");
  if (channels < 2) throw parameter_error("architecture: channels must be >= 2");
  if (classes < 2) throw parameter_error("architecture: classes must be >= 2");
  if (feature_size != 2 && feature_size != 4 && feature_size != 8)
    throw parameter_error("architecture: feature_size must be 2, 4 or 8");
  const int conv_size = feature_size < 4 ? 4 : feature_size;
  if (!is_pow2(image_size) || image_size < 2 * conv_size)
    throw parameter_error("architecture: image_size must be a power of two and at least twice the conv output size");
}

template <typename T>
ModelBundle<T>::ModelBundle(const Architecture& arch, std::uint64_t seed) : arch_(arch) {
  arch_.validate();
  const int c = arch_.channels;
  const int f = arch_.feature_size;
  const int conv_size = f < 4 ? 4 : f;
  int downs = 0;
  for (int s = arch_.image_size; s > conv_size; s /= 2) ++downs;

  auto conv = [&](Sequential& net, const std::string& name, int in, int out, int k, int stride, int pad) {
    Conv2d l{in, out, k, stride, pad};
    l.weight = params_.add(net.name() + "." + name + ".weight", {out, in, k, k});
    l.bias = params_.add(net.name() + "." + name + ".bias", {out});
    net.push(name, l);
  };
  auto convt = [&](Sequential& net, const std::string& name, int in, int out, int k, int stride, int pad) {
    ConvTranspose2d l{in, out, k, stride, pad};
    l.weight = params_.add(net.name() + "." + name + ".weight", {in, out, k, k});
    l.bias = params_.add(net.name() + "." + name + ".bias", {out});
    net.push(name, l);
  };
  auto linear = [&](Sequential& net, const std::string& name, int in, int out) {
    Linear l{in, out};
    l.weight = params_.add(net.name() + "." + name + ".weight", {out, in});
    l.bias = params_.add(net.name() + "." + name + ".bias", {out});
    net.push(name, l);
  };

  // Channel widths along the encoder: input, then one entry per conv block.
  std::vector<int> widths{arch_.in_channels};
  for (int i = 0; i < downs; ++i) widths.push_back(i == 0 ? std::max(1, c / 2) : c);
  widths.push_back(c);

  stage1_range_.first = 0;
  for (int i = 0; i < downs; ++i) {
    conv(stage1_, "conv" + std::to_string(i), widths[i], widths[i + 1], 3, 2, 1);
    stage1_.push("relu" + std::to_string(i), Relu{});
  }
  conv(stage1_, "conv" + std::to_string(downs), widths[downs], c, 3, 1, 1);
  stage1_.push("relu" + std::to_string(downs), Relu{});
  if (f == 2) stage1_.push("pool", AvgPool2{});
  stage1_range_.last = static_cast<int>(params_.size());

  stage2_range_.first = stage1_range_.last;
  linear(stage2_, "fc", c * f * f, c);
  stage2_range_.last = static_cast<int>(params_.size());

  decoder_range_.first = stage2_range_.last;
  if (arch_.decoder) {
    linear(decoder_, "fc", c, c * f * f);
    decoder_.push("relu_fc", Relu{});
    decoder_.push("reshape", Reshape{c, f, f});
    int step = 0;
    auto act = [&](bool last) {
      if (last)
        decoder_.push("sigmoid", Sigmoid{});
      else
        decoder_.push("relu" + std::to_string(step), Relu{});
      ++step;
    };
    if (f == 2) {
      convt(decoder_, "unpool", c, c, 4, 2, 1);
      act(false);
    }
    convt(decoder_, "deconv" + std::to_string(step), c, widths[downs], 3, 1, 1);
    act(false);
    for (int i = downs; i-- > 0;) {
      convt(decoder_, "deconv" + std::to_string(step), widths[i + 1], widths[i], 4, 2, 1);
      act(i == 0);
    }
  }
  decoder_range_.last = static_cast<int>(params_.size());

  classifier_range_.first = decoder_range_.last;
  linear(classifier_, "fc", c, arch_.classes);
  classifier_range_.last = static_cast<int>(params_.size());

  // Fan-in scaled normal weights; generated in double so float and double models
  // built from the same seed agree up to rounding.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto init = [&](const Sequential& net) {
    for (const Layer& layer : net.layers()) {
      int weight = -1;
      double fan_in = 1.0;
      if (const auto* l = std::get_if<Conv2d>(&layer)) {
        weight = l->weight;
        fan_in = l->fan_in();
      } else if (const auto* l = std::get_if<ConvTranspose2d>(&layer)) {
        weight = l->weight;
        fan_in = std::max(1, l->fan_in());
      } else if (const auto* l = std::get_if<Linear>(&layer)) {
        weight = l->weight;
        fan_in = l->in_features;
      }
      if (weight < 0) continue;
      const double scale = std::sqrt(2.0 / fan_in);
      for (T& w : params_[weight].value) w = static_cast<T>(scale * normal(rng));
    }
  };
  init(stage1_);
  init(stage2_);
  init(decoder_);
  init(classifier_);
}

template <typename T>
Image<T> ModelBundle<T>::decode(const Vector<T>& z) const {
  if (!arch_.decoder) throw unsupported_error("model has no decoder");
  return decoder_.forward(Tensor3<T>(static_cast<int>(z.size()), 1, 1, z), params_);
}

template <typename T>
Vector<T> ModelBundle<T>::logits(const Vector<T>& z) const {
  return classifier_.forward(Tensor3<T>(static_cast<int>(z.size()), 1, 1, z), params_).data;
}

template class ModelBundle<float>;
template class ModelBundle<double>;

}  // namespace alignmix::model
