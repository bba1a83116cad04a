#include "alignmix/model/interpolation.hpp"

#include <string>

#include "alignmix/mixup/mixup.hpp"

namespace alignmix::model {

InterpolationMode parse_interpolation_mode(std::string_view name) {
  if (name == "latent") return InterpolationMode::latent;
  if (name == "aligned_base") return InterpolationMode::aligned_base;
  if (name == "aligned_prime") return InterpolationMode::aligned_prime;
  throw parameter_error("unknown interpolation mode '" + std::string(name) + "'");
}

std::string_view to_string(InterpolationMode mode) {
  switch (mode) {
    case InterpolationMode::latent: return "latent";
    case InterpolationMode::aligned_base: return "aligned_base";
    case InterpolationMode::aligned_prime: return "aligned_prime";
  }
  return "?";
}

template <typename T>
std::vector<Image<T>> decode_interpolation(const ModelBundle<T>& model, const Image<T>& x, const Image<T>& x2,
                                           InterpolationMode mode, std::span<const double> lambdas,
                                           const ot::SinkhornConfig& cfg) {
  if (!model.arch().decoder) throw unsupported_error("decode_interpolation requires a decoder");
  for (double l : lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw parameter_error("decode_interpolation: lambda must lie in [0, 1]");

  std::vector<Image<T>> out;
  out.reserve(lambdas.size());
  if (mode == InterpolationMode::latent) {
    const Vector<T> z = model.encode(x);
    const Vector<T> z2 = model.encode(x2);
    for (double l : lambdas) out.push_back(model.decode(mixup::mix_linear<T>(l, z, z2)));
    return out;
  }

  const Tensor3<T> a = model.features(x);
  const Tensor3<T> a2 = model.features(x2);
  // The plan does not depend on lambda.
  Tensor3<T> anchor, aligned;
  if (a.plane() == 1) {
    anchor = mode == InterpolationMode::aligned_base ? a : a2;
    aligned = mode == InterpolationMode::aligned_base ? a2 : a;
  } else {
    const ot::AssignmentMatrix r = ot::solve_assignment(a, a2, cfg);
    if (mode == InterpolationMode::aligned_base) {
      anchor = a;
      aligned = ot::apply_assignment(a, a2, r, ot::AlignDirection::to_second);
    } else {
      anchor = a2;
      aligned = ot::apply_assignment(a, a2, r, ot::AlignDirection::to_first);
    }
  }
  for (double l : lambdas) out.push_back(model.decode(model.latent(mixup::mix_linear(l, anchor, aligned))));
  return out;
}

template std::vector<Image<float>> decode_interpolation<float>(const ModelBundle<float>&, const Image<float>&,
                                                               const Image<float>&, InterpolationMode,
                                                               std::span<const double>, const ot::SinkhornConfig&);
template std::vector<Image<double>> decode_interpolation<double>(const ModelBundle<double>&, const Image<double>&,
                                                                 const Image<double>&, InterpolationMode,
                                                                 std::span<const double>,
                                                                 const ot::SinkhornConfig&);

}  // namespace alignmix::model
