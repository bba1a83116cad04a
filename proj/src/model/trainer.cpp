#include "alignmix/model/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace alignmix::model {

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw parameter_error("train: alpha must be positive");
  sinkhorn.validate();
  if (!(lr.initial >= 0.0)) throw parameter_error("train: learning rate must be nonnegative");
  if (!(lr.decay > 0.0 && lr.decay <= 1.0)) throw parameter_error("train: lr decay must lie in (0, 1]");
  if (lr.period < 1) throw parameter_error("train: lr decay period must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw parameter_error("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw parameter_error("train: weight decay must be nonnegative");
  if (batch_size < 2) throw parameter_error("train: batch_size must be >= 2");
  if (epochs < 0) throw parameter_error("train: epochs must be >= 0");
}

template <typename T>
StepResult train_step(ModelBundle<T>& model, SgdState<T>& state, const Batch<T>& batch, const TrainConfig& cfg,
                      double lr, const mixup::ModeSampler& sampler, mixup::Rng& rng) {
  const int b = batch.size();
  if (b < 1) throw parameter_error("train_step: empty batch");
  if (static_cast<int>(batch.labels.size()) != b) throw dimension_error("train_step: labels do not match images");

  StepResult result;
  result.mode = sampler(rng);
  result.losses.resize(static_cast<std::size_t>(b));
  Gradients<T> grads(model.params());

  if (result.mode == MixMode::Clean) {
    for (int i = 0; i < b; ++i)
      result.losses[i] = loss_clean<T>(model, batch.images[i], batch.labels[i], &grads).total();
  } else {
    if (b < 2) throw parameter_error("train_step: pairing requires at least two examples");
    result.permutation = mixup::sample_permutation(b, rng);
    MixOptions opts;
    opts.sinkhorn = cfg.sinkhorn;
    opts.align = cfg.align;
    for (int i = 0; i < b; ++i) {
      const double lambda = mixup::sample_lambda(cfg.alpha, rng).lambda;
      const int j = result.permutation[i];
      result.lambdas.push_back(lambda);
      result.losses[i] = loss_mixed<T>(model, result.mode, lambda, batch.images[i], batch.images[j],
                                       batch.labels[i], batch.labels[j], opts, &grads)
                             .total();
    }
  }
  for (auto& g : grads.values)
    for (T& v : g) v /= static_cast<T>(b);
  sgd_update(model.params(), grads, state, lr, cfg.momentum, cfg.weight_decay);
  return result;
}

template <typename T>
EpochStats run_epoch(ModelBundle<T>& model, SgdState<T>& state, const Dataset& data, const TrainConfig& cfg,
                     int epoch, mixup::Rng& rng) {
  const int k = model.arch().classes;
  if (data.classes != k || data.channels != model.arch().in_channels || data.height != model.arch().image_size ||
      data.width != model.arch().image_size)
    throw dimension_error("training data does not match the model architecture");

  EpochStats stats;
  stats.epoch = epoch;
  stats.lr = cfg.lr.at(epoch);
  const mixup::ModeSampler sampler(cfg.layers);

  std::vector<std::size_t> order(data.count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  double loss_sum = 0.0;
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = std::min(order.size(), start + bs);
    if (order.size() - stop == 1) stop = order.size();
    Batch<T> batch;
    for (std::size_t q = start; q < stop; ++q) {
      batch.images.push_back(data.image<T>(order[q]));
      batch.labels.push_back(one_hot<T>(static_cast<int>(data.labels[order[q]]), k));
    }
    start = stop;
    if (batch.size() < 2) continue;
    const StepResult step = train_step(model, state, batch, cfg, stats.lr, sampler, rng);
    ++stats.mode_counts[static_cast<std::size_t>(step.mode)];
    for (double l : step.losses) loss_sum += l;
    seen += step.losses.size();
    if (!std::isfinite(loss_sum)) throw numeric_error("non-finite training loss in epoch " + std::to_string(epoch));
  }
  stats.mean_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
  return stats;
}

template StepResult train_step<float>(ModelBundle<float>&, SgdState<float>&, const Batch<float>&,
                                      const TrainConfig&, double, const mixup::ModeSampler&, mixup::Rng&);
template StepResult train_step<double>(ModelBundle<double>&, SgdState<double>&, const Batch<double>&,
                                       const TrainConfig&, double, const mixup::ModeSampler&, mixup::Rng&);
template EpochStats run_epoch<float>(ModelBundle<float>&, SgdState<float>&, const Dataset&, const TrainConfig&,
                                     int, mixup::Rng&);
template EpochStats run_epoch<double>(ModelBundle<double>&, SgdState<double>&, const Dataset&,
                                      const TrainConfig&, int, mixup::Rng&);

}  // namespace alignmix::model
