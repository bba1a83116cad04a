#include "alignmix/mixup/mixup.hpp"

#include <algorithm>
#include <numeric>

namespace alignmix::mixup {

std::string_view to_string(MixMode mode) {
  switch (mode) {
    case MixMode::Clean: return "clean";
    case MixMode::Input: return "input";
    case MixMode::Latent: return "latent";
    case MixMode::FeatBase: return "feat";
    case MixMode::FeatPrime: return "feat_prime";
  }
  return "?";
}

MixFactor sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw parameter_error("sample_lambda: alpha must be positive");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng);
  const double y = gamma(rng);
  const double s = x + y;
  // Both draws can underflow to zero for tiny alpha; the limit law puts mass 1/2 at each end.
  const double lambda = s > 0.0 ? x / s : (std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : 0.0);
  return {std::clamp(lambda, 0.0, 1.0), alpha};
}

MixMode sample_mode(Rng& rng) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(kAllModes.size()) - 1);
  return kAllModes[static_cast<std::size_t>(pick(rng))];
}

std::vector<MixMode> LayerSet::modes() const {
  std::vector<MixMode> out{MixMode::Clean};
  if (input) out.push_back(MixMode::Input);
  if (latent) out.push_back(MixMode::Latent);
  if (feature) {
    out.push_back(MixMode::FeatBase);
    out.push_back(MixMode::FeatPrime);
  }
  return out;
}

ModeSampler::ModeSampler(LayerSet layers) : modes_(layers.modes()) {}

MixMode ModeSampler::operator()(Rng& rng) const {
  if (modes_.size() == kAllModes.size()) return sample_mode(rng);
  if (modes_.size() == 1) return modes_.front();
  std::uniform_int_distribution<std::size_t> pick(0, modes_.size() - 1);
  return modes_[pick(rng)];
}

std::vector<int> sample_permutation(int n, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

}  // namespace alignmix::mixup
