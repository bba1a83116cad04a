#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "alignmix/dataset.hpp"
#include "alignmix/mixup/mixup.hpp"
#include "alignmix/model/losses.hpp"
#include "alignmix/model/network.hpp"
#include "alignmix/model/optimizer.hpp"

namespace alignmix::model {

struct TrainConfig {
  double alpha = mixup::kDefaultAlpha;
  ot::SinkhornConfig sinkhorn{};
  LrSchedule lr{};
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 64;
  int epochs = 30;
  std::uint64_t seed = 0;
  mixup::LayerSet layers{};
  bool align = true;

  void validate() const;
};

template <typename T>
struct Batch {
  std::vector<Image<T>> images;
  std::vector<std::vector<T>> labels;  // one-hot

  [[nodiscard]] int size() const { return static_cast<int>(images.size()); }
};

/// Examples of a mini-batch together with the pairing permutation of the mixed modes.
template <typename T>
struct PairBatch {
  const Batch<T>* examples = nullptr;
  std::vector<int> permutation;
};

struct StepResult {
  MixMode mode = MixMode::Clean;
  std::vector<int> permutation;  // empty for Clean
  std::vector<double> lambdas;   // empty for Clean
  std::vector<double> losses;
};

/// One mini-batch: a single mode draw for the whole batch, then per example either the
/// clean loss or, after pairing through a random permutation, the mixed loss with its
/// own lambda. Gradients are averaged over the batch and applied with momentum SGD.
/// The permutation is only drawn for mixing modes.
template <typename T>
StepResult train_step(ModelBundle<T>& model, SgdState<T>& state, const Batch<T>& batch, const TrainConfig& cfg,
                      double lr, const mixup::ModeSampler& sampler, mixup::Rng& rng);

struct EpochStats {
  int epoch = 0;
  std::array<int, 5> mode_counts{};
  double mean_loss = 0.0;
  double lr = 0.0;
};

/// Shuffles the dataset, splits it into mini-batches of cfg.batch_size (a trailing
/// singleton is folded into the previous batch) and runs train_step on each.
template <typename T>
EpochStats run_epoch(ModelBundle<T>& model, SgdState<T>& state, const Dataset& data, const TrainConfig& cfg,
                     int epoch, mixup::Rng& rng);

}  // namespace alignmix::model
