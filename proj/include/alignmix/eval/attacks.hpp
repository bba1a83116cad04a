#pragma once

#include <random>
#include <span>
#include <vector>

#include "alignmix/dataset.hpp"
#include "alignmix/eval/metrics.hpp"
#include "alignmix/model/network.hpp"

namespace alignmix::eval {

using model::Image;
using model::ModelBundle;

/// Sup-norm attack budget in pixel units.
struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  int num_steps = 7;
  bool random_start = true;

  /// iterative: also require step_size <= epsilon and num_steps >= 1.
  void validate(bool iterative) const;
};

template <typename T>
PredictionRecord predict(const ModelBundle<T>& model, const Image<T>& x, int label);

template <typename T>
std::vector<PredictionRecord> predict_all(const ModelBundle<T>& model, const Dataset& data);

/// clip_[0,1](x + eps * sign(grad_x L_c)).
template <typename T>
Image<T> fgsm_attack(const ModelBundle<T>& model, const Image<T>& x, int label, double epsilon);

/// Signed-gradient ascent steps, each projected onto the eps-ball around x and clipped
/// to [0, 1]; optional uniform random start inside the ball. When `iterates` is set,
/// every intermediate image (after projection) is appended to it.
template <typename T>
Image<T> pgd_attack(const ModelBundle<T>& model, const Image<T>& x, int label, const AttackConfig& cfg,
                    std::mt19937_64& rng, std::vector<Image<T>>* iterates = nullptr);

enum class AttackKind { fgsm, pgd };

struct RobustnessReport {
  double clean_error = 0.0;   // percent
  double robust_error = 0.0;  // percent
  double max_perturbation = 0.0;
};

template <typename T>
RobustnessReport evaluate_attack(const ModelBundle<T>& model, const Dataset& data, AttackKind kind,
                                 const AttackConfig& cfg, std::mt19937_64& rng);

}  // namespace alignmix::eval
