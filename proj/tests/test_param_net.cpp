#include <catch2/catch_amalgamated.hpp>

#include "edit/data.hpp"
#include "edit/generator.hpp"
#include "edit/param_net.hpp"

using namespace edit;

namespace {

Tensor clamped_noise(std::vector<int> shape, Rng& rng, double std = 0.4) {
  Tensor t(std::move(shape));
  rng.fill_normal(t, 0.0, std);
  for (double& v : t.data) v = std::clamp(v, -1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("embed is deterministic and label-sensitive") {
  GeneratorSpec spec = default_generator_spec(4, 1);
  Rng rng(41);
  ParamNetWeights pw = init_param_net(spec, 16, 3, rng);

  Rng irng(2);
  Tensor exemplar = clamped_noise({1, 3, 16, 16}, irng);

  Tensor e0 = embed(exemplar, make_onehot(0, 3), pw);
  Tensor e0_again = embed(exemplar, make_onehot(0, 3), pw);
  CHECK(e0.data == e0_again.data);  // determinism

  Tensor e1 = embed(exemplar, make_onehot(1, 3), pw);
  REQUIRE(e0.numel() == e1.numel());
  double linf = 0.0;
  for (int64_t i = 0; i < e0.numel(); ++i)
    linf = std::max(linf, std::fabs(e0[i] - e1[i]));
  CHECK(linf > 0.0);  // same exemplar, different labels

  SECTION("black exemplar stays finite and usable") {
    Tensor black = Tensor::full({1, 3, 16, 16}, -1.0);
    Tensor eb = embed(black, make_onehot(2, 3), pw);
    CHECK(eb.all_finite());
    Tensor theta = generate_params(black, make_onehot(2, 3), pw, spec);
    CHECK(theta.all_finite());
  }

  SECTION("label dimension mismatch is a shape error") {
    CHECK_THROWS_MATCHES(embed(exemplar, make_onehot(0, 2), pw), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::shape;
                         }));
  }
}

TEST_CASE("generate_params length matches param_count across random specs") {
  Rng rng(55);
  for (int trial = 0; trial < 8; ++trial) {
    int w = rng.uniform_int(2, 5);
    int res = rng.uniform_int(1, 2);
    GeneratorSpec spec = default_generator_spec(w, res);
    // randomly flip some dynamic flags (keeping at least one of each)
    for (size_t i = 1; i + 1 < spec.blocks.size(); ++i)
      if (rng.bernoulli(0.3)) spec.blocks[i].dynamic = !spec.blocks[i].dynamic;
    spec.blocks.front().dynamic = false;
    spec.blocks.back().dynamic = true;
    spec.validate();

    ParamNetWeights pw = init_param_net(spec, 8, 2, rng);
    Rng irng(trial);
    Tensor exemplar = clamped_noise({1, 3, 16, 16}, irng);
    Tensor theta = generate_params(exemplar, make_onehot(1, 2), pw, spec);
    CHECK(theta.numel() == param_count(spec));
    CHECK(theta.all_finite());
  }
}

TEST_CASE("generated parameters drive the generator to finite outputs") {
  GeneratorSpec spec = default_generator_spec(4, 1);
  Rng rng(66);
  SharedWeights sw = init_shared_weights(spec, rng);
  ParamNetWeights pw = init_param_net(spec, 16, 2, rng);
  Rng irng(3);
  Tensor exemplar = clamped_noise({1, 3, 16, 16}, irng);
  Tensor input = clamped_noise({1, 3, 16, 16}, irng);
  Tensor theta = generate_params(exemplar, make_onehot(1, 2), pw, spec);
  Tensor out = generator_apply(input, spec, sw, theta);
  CHECK(out.all_finite());
  CHECK(out.max() <= 1.0);
  CHECK(out.min() >= -1.0);
}

TEST_CASE("frozen backbone tensors receive exactly zero gradient") {
  GeneratorSpec spec = default_generator_spec(4, 1);
  Rng rng(12);
  ParamNetWeights pw = init_param_net(spec, 8, 2, rng);

  ad::Tape t;
  ParamNetBinding pb = ParamNetBinding::bind(t, pw, true);
  Rng irng(4);
  ad::Var exemplar = t.leaf(clamped_noise({1, 3, 16, 16}, irng));
  ad::Var theta = generate_params_forward(t, exemplar, make_onehot(0, 2), pb,
                                          spec, 2);
  ad::Var loss = t.mean_all(t.square(theta));
  t.backward(loss);

  for (const std::string& name : pw.frozen) {
    const Tensor& g = t.grad(pb.vars.at(name));
    for (double v : g.data) REQUIRE(v == 0.0);
  }
  // trainable tensors do receive gradient
  double fc_norm = t.grad(pb.fc_weight).l2_norm();
  CHECK(fc_norm > 0.0);
  double head_norm = t.grad(pb.heads[0].second.first).l2_norm();
  CHECK(head_norm > 0.0);
}

TEST_CASE("distinct synthetic exemplar styles produce distinct parameters") {
  GeneratorSpec spec = default_generator_spec(4, 1);
  Rng rng(90);
  ParamNetWeights pw = init_param_net(spec, 16, 2, rng);

  SyntheticStyleSpec red;
  red.palette = {{0.9, -0.7, -0.7}};
  red.seed = 10;
  SyntheticStyleSpec blue;
  blue.palette = {{-0.7, -0.7, 0.9}};
  blue.seed = 10;
  Tensor ex_red = generate_synthetic(red, 1, 16)[0];
  Tensor ex_blue = generate_synthetic(blue, 1, 16)[0];

  DomainLabel label = make_onehot(1, 2);
  Tensor ta = generate_params(ex_red, label, pw, spec);
  Tensor tb = generate_params(ex_blue, label, pw, spec);
  double linf = 0.0;
  for (int64_t i = 0; i < ta.numel(); ++i)
    linf = std::max(linf, std::fabs(ta[i] - tb[i]));
  CHECK(linf > 0.0);
}

TEST_CASE("theta_p differs across labels at fixed weights") {
  GeneratorSpec spec = default_generator_spec(4, 1);
  Rng rng(91);
  ParamNetWeights pw = init_param_net(spec, 16, 3, rng);
  Rng irng(8);
  Tensor exemplar = clamped_noise({1, 3, 16, 16}, irng);
  Tensor t0 = generate_params(exemplar, make_onehot(0, 3), pw, spec);
  Tensor t1 = generate_params(exemplar, make_onehot(1, 3), pw, spec);
  CHECK(t0.data != t1.data);
}

TEST_CASE("interpolate endpoints, arithmetic, and errors") {
  Tensor a({2}, {2.0, 4.0});
  Tensor b({2}, {4.0, 8.0});

  Tensor at0 = interpolate(a, b, 0.0);
  CHECK(at0.data == a.data);  // exact endpoint
  Tensor at1 = interpolate(a, b, 1.0);
  CHECK(at1.data == b.data);

  Tensor mid = interpolate(a, b, 0.5);
  CHECK(mid.data == std::vector<double>({3.0, 6.0}));

  SECTION("interpolating a vector with itself is the identity") {
    for (double alpha : {0.0, 0.25, 0.77, 1.0}) {
      Tensor same = interpolate(a, a, alpha);
      for (int64_t i = 0; i < a.numel(); ++i)
        CHECK_THAT(same[i], Catch::Matchers::WithinAbs(a[i], 1e-12));
    }
  }

  SECTION("affine in alpha at three points") {
    Rng rng(17);
    Tensor ta({64}), tb({64});
    rng.fill_normal(ta, 0.0, 1.0);
    rng.fill_normal(tb, 0.0, 1.0);
    double a1 = 0.2, a2 = 0.5, a3 = 0.8;
    Tensor v1 = interpolate(ta, tb, a1);
    Tensor v2 = interpolate(ta, tb, a2);
    Tensor v3 = interpolate(ta, tb, a3);
    double w = (a2 - a1) / (a3 - a1);
    for (int64_t i = 0; i < v1.numel(); ++i)
      CHECK_THAT(v2[i],
                 Catch::Matchers::WithinAbs(v1[i] + (v3[i] - v1[i]) * w, 1e-7));
  }

  SECTION("length mismatch is a shape error") {
    Tensor c({3});
    CHECK_THROWS_MATCHES(interpolate(a, c, 0.5), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::shape;
                         }));
  }

  SECTION("alpha outside [0,1] rejected unless extrapolation allowed") {
    CHECK_THROWS_MATCHES(interpolate(a, b, 1.5), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::domain;
                         }));
    Tensor ext = interpolate(a, b, 1.5, true);
    CHECK_THAT(ext[0], Catch::Matchers::WithinAbs(5.0, 1e-12));
  }
}
