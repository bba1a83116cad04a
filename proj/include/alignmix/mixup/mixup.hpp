#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "alignmix/ot/align.hpp"
#include "alignmix/tensor.hpp"

namespace alignmix::mixup {

using Rng = std::mt19937_64;

/// Default Beta concentration for the interpolation factor.
inline constexpr double kDefaultAlpha = 2.0;

struct MixFactor {
  double lambda = 1.0;
  double alpha = kDefaultAlpha;
};

/// Training mode of one mini-batch. FeatBase mixes A with A aligned to A';
/// FeatPrime is the same operation after swapping the two examples.
enum class MixMode : std::uint8_t { Clean, Input, Latent, FeatBase, FeatPrime };

inline constexpr std::array<MixMode, 5> kAllModes{MixMode::Clean, MixMode::Input, MixMode::Latent,
                                                  MixMode::FeatBase, MixMode::FeatPrime};

std::string_view to_string(MixMode mode);

/// lambda ~ Beta(alpha, alpha) as X / (X + Y) with X, Y ~ Gamma(alpha, 1).
MixFactor sample_lambda(double alpha, Rng& rng);

/// Elementwise lambda * u + (1 - lambda) * v, evaluated with std::lerp so that both
/// endpoints and u == v are reproduced exactly.
template <typename T>
std::vector<T> mix_linear(double lambda, std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) throw dimension_error("mix_linear: operands differ in size");
  std::vector<T> out(u.size());
  const T t = static_cast<T>(lambda);
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = std::lerp(v[k], u[k], t);
  return out;
}

template <typename T>
Tensor3<T> mix_linear(double lambda, const Tensor3<T>& u, const Tensor3<T>& v) {
  if (!u.same_shape(v)) throw dimension_error("mix_linear: tensors differ in shape");
  return Tensor3<T>(u.channels, u.height, u.width,
                    mix_linear<T>(lambda, std::span<const T>(u.data), std::span<const T>(v.data)));
}

enum class AlignSide { base, prime };

/// base:  mix(lambda, A, A' R^T)   -- A aligned to A', mixed with A
/// prime: mix(lambda, A', A R)     -- A' aligned to A, mixed with A'
template <typename T>
Tensor3<T> aligned_mix(const Tensor3<T>& a, const Tensor3<T>& b, MixFactor f, const ot::SinkhornConfig& cfg,
                       AlignSide side) {
  if (side == AlignSide::base) return mix_linear(f.lambda, a, ot::align(a, b, cfg, ot::AlignDirection::to_second));
  return mix_linear(f.lambda, b, ot::align(a, b, cfg, ot::AlignDirection::to_first));
}

/// Uniform draw over the five modes.
MixMode sample_mode(Rng& rng);

/// Which representations may be mixed; the uniform draw is renormalised over the
/// modes the set allows. Clean is always allowed.
struct LayerSet {
  bool input = true;
  bool feature = true;
  bool latent = true;

  [[nodiscard]] std::vector<MixMode> modes() const;
  bool operator==(const LayerSet&) const = default;
};

class ModeSampler {
public:
  explicit ModeSampler(LayerSet layers = {});
  MixMode operator()(Rng& rng) const;
  [[nodiscard]] const std::vector<MixMode>& modes() const { return modes_; }

private:
  std::vector<MixMode> modes_;
};

/// Uniform random permutation of {0, ..., n-1}; fixed points allowed.
std::vector<int> sample_permutation(int n, Rng& rng);

}  // namespace alignmix::mixup
