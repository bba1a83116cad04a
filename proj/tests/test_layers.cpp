#include <doctest.h>

#include <random>

#include "alignmix/errors.hpp"
#include "alignmix/model/layers.hpp"
#include "gradcheck.hpp"

using namespace alignmix;
using namespace alignmix::model;

namespace {

struct Case {
  Layer layer;
  ParamStore<double> params;
  Tensor3<double> input;
};

void fill(std::vector<double>& v, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& x : v) x = n(rng);
}

Tensor3<double> random_tensor(int c, int h, int w, std::mt19937_64& rng) {
  Tensor3<double> t(c, h, w);
  fill(t.data, rng);
  return t;
}

Case make_conv(int in, int out, int k, int s, int p, int size, std::mt19937_64& rng) {
  Case c;
  Conv2d l{in, out, k, s, p};
  l.weight = c.params.add("w", {out, in, k, k});
  l.bias = c.params.add("b", {out});
  fill(c.params[l.weight].value, rng, 0.5);
  fill(c.params[l.bias].value, rng, 0.5);
  c.layer = l;
  c.input = random_tensor(in, size, size, rng);
  return c;
}

Case make_convt(int in, int out, int k, int s, int p, int size, std::mt19937_64& rng) {
  Case c;
  ConvTranspose2d l{in, out, k, s, p};
  l.weight = c.params.add("w", {in, out, k, k});
  l.bias = c.params.add("b", {out});
  fill(c.params[l.weight].value, rng, 0.5);
  fill(c.params[l.bias].value, rng, 0.5);
  c.layer = l;
  c.input = random_tensor(in, size, size, rng);
  return c;
}

Case make_linear(int in, int out, std::mt19937_64& rng) {
  Case c;
  Linear l{in, out};
  l.weight = c.params.add("w", {out, in});
  l.bias = c.params.add("b", {out});
  fill(c.params[l.weight].value, rng, 0.5);
  fill(c.params[l.bias].value, rng, 0.5);
  c.layer = l;
  c.input = random_tensor(in, 1, 1, rng);
  return c;
}

Case make_plain(Layer layer, int ch, int size, std::mt19937_64& rng) {
  Case c;
  c.layer = layer;
  c.input = random_tensor(ch, size, size, rng);
  return c;
}

// Loss = <weights, layer(input)>; checks input and parameter gradients.
void check_case(Case& c, std::mt19937_64& rng) {
  const auto out = layer_forward(c.layer, c.input, c.params);
  std::vector<double> w(out.size());
  fill(w, rng);
  const Tensor3<double> gout(out.channels, out.height, out.width, w);
  Gradients<double> grads(c.params);
  const auto gin = layer_backward(c.layer, c.input, out, gout, c.params, &grads);
  REQUIRE(gin.same_shape(c.input));

  const auto loss = [&] {
    const auto o = layer_forward(c.layer, c.input, c.params);
    double s = 0.0;
    for (std::size_t k = 0; k < o.size(); ++k) s += w[k] * o.data[k];
    return s;
  };
  const auto in_res = testing::probe_vector(c.input.data, gin.data, 32, loss, rng);
  CHECK(in_res.max_rel_error < 1e-4);
  if (c.params.size() > 0) {
    const auto p_res = testing::probe_params(c.params, grads, 0, static_cast<int>(c.params.size()), 32, loss, rng);
    CHECK(p_res.max_rel_error < 1e-4);
  }
}

}  // namespace

TEST_CASE("conv2d output size and a hand example") {
  ParamStore<double> ps;
  Conv2d l{1, 1, 3, 1, 1};
  l.weight = ps.add("w", {1, 1, 3, 3});
  l.bias = ps.add("b", {1});
  ps[l.weight].value = {0, 0, 0, 0, 1, 0, 0, 0, 0};
  ps[l.bias].value = {0.5};
  Tensor3<double> x(1, 2, 2, {1, 2, 3, 4});
  const auto y = layer_forward<double>(l, x, ps);
  CHECK(y.data == std::vector<double>{1.5, 2.5, 3.5, 4.5});

  ps[l.weight].value = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  ps[l.bias].value = {0};
  const auto s = layer_forward<double>(l, x, ps);
  CHECK(s.data == std::vector<double>{10, 10, 10, 10});
  CHECK(Conv2d{1, 1, 3, 2, 1}.out_size(16) == 8);
  CHECK(ConvTranspose2d{1, 1, 4, 2, 1}.out_size(8) == 16);
}

TEST_CASE("avgpool and reshape") {
  Tensor3<double> x(1, 2, 2, {1, 2, 3, 6});
  const auto y = layer_forward<double>(AvgPool2{}, x, ParamStore<double>{});
  CHECK(y.data == std::vector<double>{3.0});
  const auto r = layer_forward<double>(Reshape{4, 1, 1}, x, ParamStore<double>{});
  CHECK(r.channels == 4);
  CHECK(r.data == x.data);
  CHECK_THROWS_AS(layer_forward<double>(Reshape{3, 1, 1}, x, ParamStore<double>{}), dimension_error);
}

TEST_CASE("every layer matches central differences") {
  std::mt19937_64 rng(7);
  std::vector<Case> cases;
  cases.push_back(make_conv(2, 3, 3, 1, 1, 5, rng));
  cases.push_back(make_conv(2, 3, 3, 2, 1, 6, rng));
  cases.push_back(make_convt(3, 2, 4, 2, 1, 3, rng));
  cases.push_back(make_convt(3, 2, 3, 1, 1, 4, rng));
  cases.push_back(make_linear(7, 5, rng));
  cases.push_back(make_plain(Relu{}, 2, 4, rng));
  cases.push_back(make_plain(Sigmoid{}, 2, 4, rng));
  cases.push_back(make_plain(AvgPool2{}, 2, 4, rng));
  cases.push_back(make_plain(Reshape{8, 2, 2}, 2, 4, rng));
  for (auto& c : cases) {
    CAPTURE(c.layer.index());
    check_case(c, rng);
  }
}

TEST_CASE("sequential forward reports the offending layer") {
  ParamStore<double> ps;
  Linear l{1, 1};
  l.weight = ps.add("w", {1, 1});
  l.bias = ps.add("b", {1});
  ps[l.weight].value = {std::numeric_limits<double>::infinity()};
  Sequential s("net");
  s.push("fc", l);
  Tensor3<double> x(1, 1, 1, {1.0});
  try {
    (void)s.forward(x, ps);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("net.fc") != std::string::npos);
  }
}
