#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "alignmix/model/network.hpp"
#include "alignmix/ot/align.hpp"

namespace alignmix::model {

enum class InterpolationMode {
  latent,         // D(mix(z, z'))
  aligned_base,   // D(e(mix(A, A aligned to A')))
  aligned_prime,  // D(e(mix(A', A' aligned to A)))
};

InterpolationMode parse_interpolation_mode(std::string_view name);
std::string_view to_string(InterpolationMode mode);

/// Decodes the mixed representation of (x, x2) for each lambda. Visualisation only:
/// nothing here feeds a loss. Throws unsupported_error when the model has no decoder.
template <typename T>
std::vector<Image<T>> decode_interpolation(const ModelBundle<T>& model, const Image<T>& x, const Image<T>& x2,
                                           InterpolationMode mode, std::span<const double> lambdas,
                                           const ot::SinkhornConfig& cfg);

}  // namespace alignmix::model
