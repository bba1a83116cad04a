#include <doctest.h>

#include <cmath>
#include <random>

#include "alignmix/errors.hpp"
#include "alignmix/eval/attacks.hpp"
#include "alignmix/model/losses.hpp"

using namespace alignmix;
using namespace alignmix::eval;

namespace {

double sup_norm(const Image<double>& a, const Image<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a.data[k] - b.data[k]));
  return d;
}

struct Fixture {
  model::Architecture arch;
  model::ModelBundle<double> net;
  Image<double> x;
  Fixture() : arch(make_arch()), net(arch, 3), x(1, 16, 16) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : x.data) v = u(rng);
    x.data[0] = 0.0;  // clipping at both ends
    x.data[1] = 1.0;
  }
  static model::Architecture make_arch() {
    model::Architecture a;
    a.channels = 4;
    return a;
  }
};

}  // namespace

TEST_CASE("fgsm") {
  Fixture f;
  CHECK(fgsm_attack(f.net, f.x, 1, 0.0).data == f.x.data);
  const double eps = 8.0 / 255.0;
  const auto adv = fgsm_attack(f.net, f.x, 1, eps);
  CHECK(sup_norm(adv, f.x) <= eps + 1e-7);
  for (double v : adv.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // moves along the sign of the input gradient wherever it is not clipped
  const auto g = model::classification_input_gradient<double>(f.net, f.x, model::one_hot<double>(1, 4)).grad;
  for (std::size_t k = 2; k < adv.size(); ++k) {
    const double expected = std::clamp(f.x.data[k] + eps * ((g.data[k] > 0) - (g.data[k] < 0)), 0.0, 1.0);
    CHECK(adv.data[k] == expected);
  }
  const double before = model::classification_input_gradient<double>(f.net, f.x, model::one_hot<double>(1, 4)).loss;
  const double after = model::classification_input_gradient<double>(f.net, adv, model::one_hot<double>(1, 4)).loss;
  CHECK(after >= before);
}

TEST_CASE("pgd") {
  Fixture f;
  AttackConfig cfg{.epsilon = 4.0 / 255.0, .step_size = 2.0 / 255.0, .num_steps = 7, .random_start = true};
  std::mt19937_64 rng(5);
  std::vector<Image<double>> iterates;
  const auto adv = pgd_attack(f.net, f.x, 2, cfg, rng, &iterates);
  CHECK(iterates.size() >= 7);
  for (const auto& it : iterates) {
    CHECK(sup_norm(it, f.x) <= cfg.epsilon + 1e-7);
    for (double v : it.data) REQUIRE((v >= 0.0 && v <= 1.0));
  }
  CHECK(sup_norm(adv, f.x) <= cfg.epsilon + 1e-7);

  const AttackConfig one{.epsilon = 0.02, .step_size = 0.02, .num_steps = 1, .random_start = false};
  CHECK(pgd_attack(f.net, f.x, 2, one, rng).data == fgsm_attack(f.net, f.x, 2, 0.02).data);

  CHECK_THROWS_AS((AttackConfig{.epsilon = 0.01, .step_size = 0.02}.validate(true)), parameter_error);
  CHECK_THROWS_AS((AttackConfig{.epsilon = 0.01, .step_size = 0.01, .num_steps = 0}.validate(true)), parameter_error);
  CHECK_THROWS_AS((AttackConfig{.epsilon = -1.0}.validate(false)), parameter_error);
}

TEST_CASE("robustness report") {
  Fixture f;
  Dataset d;
  d.channels = 1;
  d.height = d.width = 16;
  d.classes = 4;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int i = 0; i < 12; ++i) {
    for (int k = 0; k < 256; ++k) d.pixels.push_back(u(rng));
    d.labels.push_back(static_cast<std::uint32_t>(i % 4));
  }
  const auto zero = evaluate_attack(f.net, d, AttackKind::fgsm, {.epsilon = 0.0}, rng);
  CHECK(zero.robust_error == zero.clean_error);
  CHECK(zero.max_perturbation == 0.0);
  const auto r = evaluate_attack(f.net, d, AttackKind::pgd, {.epsilon = 4.0 / 255.0}, rng);
  CHECK(r.max_perturbation <= 4.0 / 255.0 + 1e-7);
  CHECK(r.robust_error >= 0.0);
}
