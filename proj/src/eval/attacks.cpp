#include "alignmix/eval/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "alignmix/errors.hpp"
#include "alignmix/model/losses.hpp"

namespace alignmix::eval {

namespace {

template <typename T>
T sign(T v) {
  return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0});
}

template <typename T>
T clip01(T v) {
  return std::clamp(v, T{0}, T{1});
}

template <typename T>
void check_image(const ModelBundle<T>& model, const Image<T>& x) {
  const auto& a = model.arch();
  if (x.channels != a.in_channels || x.height != a.image_size || x.width != a.image_size)
    throw dimension_error("image does not match the model input shape");
}

}  // namespace

void AttackConfig::validate(bool iterative) const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw parameter_error("attack: epsilon must be >= 0");
  if (iterative) {
    if (!(step_size > 0.0) || step_size > epsilon) throw parameter_error("attack: need 0 < step_size <= epsilon");
    if (num_steps < 1) throw parameter_error("attack: num_steps must be >= 1");
  }
}

template <typename T>
PredictionRecord predict(const ModelBundle<T>& model, const Image<T>& x, int label) {
  check_image(model, x);
  const Vector<T> logits = model.logits(model.encode(x));
  return PredictionRecord::from_probabilities(model::softmax<T>(logits), label);
}

template <typename T>
std::vector<PredictionRecord> predict_all(const ModelBundle<T>& model, const Dataset& data) {
  std::vector<PredictionRecord> out;
  out.reserve(data.count());
  for (std::size_t i = 0; i < data.count(); ++i)
    out.push_back(predict(model, data.image<T>(i), static_cast<int>(data.labels[i])));
  return out;
}

template <typename T>
Image<T> fgsm_attack(const ModelBundle<T>& model, const Image<T>& x, int label, double epsilon) {
  if (!(epsilon >= 0.0)) throw parameter_error("fgsm: epsilon must be >= 0");
  check_image(model, x);
  const auto y = model::one_hot<T>(label, model.arch().classes);
  const auto g = model::classification_input_gradient<T>(model, x, y);
  Image<T> out = x;
  const T eps = static_cast<T>(epsilon);
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] = clip01(x.data[k] + eps * sign(g.grad.data[k]));
  return out;
}

template <typename T>
Image<T> pgd_attack(const ModelBundle<T>& model, const Image<T>& x, int label, const AttackConfig& cfg,
                    std::mt19937_64& rng, std::vector<Image<T>>* iterates) {
  cfg.validate(true);
  check_image(model, x);
  const auto y = model::one_hot<T>(label, model.arch().classes);
  const T eps = static_cast<T>(cfg.epsilon);
  const T step = static_cast<T>(cfg.step_size);
  Image<T> cur = x;
  if (cfg.random_start) {
    std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
    for (std::size_t k = 0; k < cur.size(); ++k) cur.data[k] = clip01(x.data[k] + static_cast<T>(u(rng)));
  }
  for (int s = 0; s < cfg.num_steps; ++s) {
    const auto g = model::classification_input_gradient<T>(model, cur, y);
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const T moved = cur.data[k] + step * sign(g.grad.data[k]);
      cur.data[k] = clip01(std::min(std::max(moved, x.data[k] - eps), x.data[k] + eps));
    }
    if (iterates) iterates->push_back(cur);
  }
  return cur;
}

template <typename T>
RobustnessReport evaluate_attack(const ModelBundle<T>& model, const Dataset& data, AttackKind kind,
                                 const AttackConfig& cfg, std::mt19937_64& rng) {
  if (data.count() == 0) throw parameter_error("evaluate_attack: empty dataset");
  cfg.validate(kind == AttackKind::pgd && cfg.epsilon > 0.0);
  std::vector<PredictionRecord> clean, robust;
  RobustnessReport rep;
  for (std::size_t i = 0; i < data.count(); ++i) {
    const Image<T> x = data.image<T>(i);
    const int label = static_cast<int>(data.labels[i]);
    clean.push_back(predict(model, x, label));
    Image<T> adv;
    if (cfg.epsilon == 0.0)
      adv = x;
    else if (kind == AttackKind::fgsm)
      adv = fgsm_attack(model, x, label, cfg.epsilon);
    else
      adv = pgd_attack(model, x, label, cfg, rng);
    for (std::size_t k = 0; k < x.size(); ++k)
      rep.max_perturbation = std::max(rep.max_perturbation, std::abs(static_cast<double>(adv.data[k] - x.data[k])));
    robust.push_back(predict(model, adv, label));
  }
  rep.clean_error = top1_error(clean);
  rep.robust_error = top1_error(robust);
  return rep;
}

#define ALIGNMIX_EVAL_INSTANTIATE(T)                                                                       \
  template PredictionRecord predict<T>(const ModelBundle<T>&, const Image<T>&, int);                      \
  template std::vector<PredictionRecord> predict_all<T>(const ModelBundle<T>&, const Dataset&);           \
  template Image<T> fgsm_attack<T>(const ModelBundle<T>&, const Image<T>&, int, double);                  \
  template Image<T> pgd_attack<T>(const ModelBundle<T>&, const Image<T>&, int, const AttackConfig&,       \
                                  std::mt19937_64&, std::vector<Image<T>>*);                              \
  template RobustnessReport evaluate_attack<T>(const ModelBundle<T>&, const Dataset&, AttackKind,         \
                                               const AttackConfig&, std::mt19937_64&);

ALIGNMIX_EVAL_INSTANTIATE(float)
ALIGNMIX_EVAL_INSTANTIATE(double)

#undef ALIGNMIX_EVAL_INSTANTIATE

}  // namespace alignmix::eval
