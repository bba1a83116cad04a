#include <doctest.h>

#include <cmath>
#include <random>

#include "alignmix/errors.hpp"
#include "alignmix/model/losses.hpp"
#include "alignmix/model/network.hpp"
#include "gradcheck.hpp"

using namespace alignmix;
using namespace alignmix::model;

namespace {

Architecture small_arch() {
  Architecture a;
  a.channels = 8;
  return a;
}

Image<double> random_image(const Architecture& a, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image<double> x(a.in_channels, a.image_size, a.image_size);
  for (auto& v : x.data) v = u(rng);
  return x;
}

}  // namespace

TEST_CASE("cross entropy hand values") {
  const std::vector<double> logits{0.0, 0.0};
  const std::vector<double> t{1.0, 0.0};
  std::vector<double> g;
  CHECK(cross_entropy<double>(logits, t, &g) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(g[0] == doctest::Approx(-0.5));
  CHECK(g[1] == doctest::Approx(0.5));
  CHECK_THROWS(one_hot<double>(4, 4));
}

TEST_CASE("reconstruction loss is a sum of squares") {
  Image<double> x(1, 1, 3, {0.0, 0.5, 1.0});
  Image<double> y(1, 1, 3, {1.0, 0.5, 0.0});
  Image<double> g;
  CHECK(reconstruction_loss(x, y, &g) == 2.0);
  CHECK(g.data == std::vector<double>{2.0, 0.0, -2.0});
}

TEST_CASE("clean loss gradients match finite differences") {
  const auto arch = small_arch();
  ModelBundle<double> m(arch, 3);
  std::mt19937_64 rng(11);
  const auto x = random_image(arch, rng);
  const auto y = one_hot<double>(2, arch.classes);
  Gradients<double> g(m.params());
  (void)loss_clean<double>(m, x, y, &g);
  const auto f = [&] { return loss_clean<double>(m, x, y).total(); };
  const auto r = testing::probe_params(m.params(), g, 0, static_cast<int>(m.params().size()), 48, f, rng);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("mixed loss gradients match finite differences in every mode") {
  const auto arch = small_arch();
  ModelBundle<double> m(arch, 5);
  std::mt19937_64 rng(13);
  const auto x = random_image(arch, rng);
  const auto x2 = random_image(arch, rng);
  const auto y = one_hot<double>(0, arch.classes);
  const auto y2 = one_hot<double>(3, arch.classes);
  for (MixMode mode : {MixMode::Input, MixMode::Latent, MixMode::FeatBase, MixMode::FeatPrime}) {
    CAPTURE(mixup::to_string(mode));
    MixOptions opts;
    std::optional<ot::AssignmentMatrix> frozen;
    if (mode == MixMode::FeatBase || mode == MixMode::FeatPrime) {
      const bool swap = mode == MixMode::FeatPrime;
      frozen = ot::solve_assignment(m.features(swap ? x2 : x), m.features(swap ? x : x2), opts.sinkhorn);
      opts.frozen_assignment = &*frozen;
    }
    Gradients<double> g(m.params());
    (void)loss_mixed<double>(m, mode, 0.3, x, x2, y, y2, opts, &g);
    const auto f = [&] { return loss_mixed<double>(m, mode, 0.3, x, x2, y, y2, opts).total(); };
    const auto r = testing::probe_params(m.params(), g, 0, static_cast<int>(m.params().size()), 40, f, rng);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("feature-mode gradients do not depend on whether R is recomputed") {
  const auto arch = small_arch();
  ModelBundle<double> m(arch, 9);
  std::mt19937_64 rng(17);
  const auto x = random_image(arch, rng);
  const auto x2 = random_image(arch, rng);
  const auto y = one_hot<double>(1, arch.classes);
  const auto y2 = one_hot<double>(2, arch.classes);
  MixOptions live;
  Gradients<double> g_live(m.params());
  (void)loss_mixed<double>(m, MixMode::FeatBase, 0.6, x, x2, y, y2, live, &g_live);

  const auto frozen = ot::solve_assignment(m.features(x), m.features(x2), live.sinkhorn);
  MixOptions fixed;
  fixed.frozen_assignment = &frozen;
  Gradients<double> g_fixed(m.params());
  (void)loss_mixed<double>(m, MixMode::FeatBase, 0.6, x, x2, y, y2, fixed, &g_fixed);
  CHECK(g_live.values == g_fixed.values);
}

TEST_CASE("clean-mode loss routing") {
  const auto arch = small_arch();
  ModelBundle<double> m(arch, 21);
  std::mt19937_64 rng(23);
  const auto x = random_image(arch, rng);
  const auto y = one_hot<double>(1, arch.classes);

  Gradients<double> gc(m.params());
  (void)loss_clean<double>(m, x, y, &gc, {.reconstruction = false, .classification = true});
  const auto dec = m.decoder_params();
  for (int i = dec.first; i < dec.last; ++i)
    for (double v : gc[i]) REQUIRE(v == 0.0);

  Gradients<double> gr(m.params());
  (void)loss_clean<double>(m, x, y, &gr, {.reconstruction = true, .classification = false});
  const auto cls = m.classifier_params();
  for (int i = cls.first; i < cls.last; ++i)
    for (double v : gr[i]) REQUIRE(v == 0.0);
  // reconstruction reaches the encoder
  double enc = 0.0;
  for (int i = m.stage1_params().first; i < m.stage1_params().last; ++i)
    for (double v : gr[i]) enc += std::abs(v);
  CHECK(enc > 0.0);
}

TEST_CASE("input gradient matches finite differences") {
  const auto arch = small_arch();
  ModelBundle<double> m(arch, 31);
  std::mt19937_64 rng(37);
  auto x = random_image(arch, rng);
  const auto y = one_hot<double>(0, arch.classes);
  const auto ig = classification_input_gradient<double>(m, x, y);
  const auto f = [&] { return classification_input_gradient<double>(m, x, y).loss; };
  const auto r = testing::probe_vector(x.data, ig.grad.data, 32, f, rng);
  CHECK(r.max_rel_error < 1e-4);
}
