#include <catch2/catch_amalgamated.hpp>

#include "edit/losses.hpp"

using namespace edit;

namespace {

ChannelStats single_stat(double mu, double sd) {
  ChannelStats cs;
  cs.mean.push_back(Tensor({1, 1}, {mu}));
  cs.stdev.push_back(Tensor({1, 1}, {sd}));
  return cs;
}

Tensor randn(std::vector<int> shape, uint64_t seed, double std = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  rng.fill_normal(t, 0.0, std);
  return t;
}

}  // namespace

TEST_CASE("cycle loss trivial cases") {
  Tensor a = randn({1, 3, 4, 4}, 1);
  Tensor b = randn({1, 3, 4, 4}, 2);
  CHECK(cycle_loss(a, a, b, b) == 0.0);

  Tensor ones = Tensor::full({1, 3, 4, 4}, 1.0);
  Tensor zeros = Tensor::zeros({1, 3, 4, 4});
  CHECK_THAT(cycle_loss(ones, zeros, b, b),
             Catch::Matchers::WithinAbs(1.0, 1e-12));

  // symmetric in each pair's argument order
  CHECK_THAT(cycle_loss(a, b, zeros, ones),
             Catch::Matchers::WithinAbs(cycle_loss(b, a, ones, zeros), 1e-12));
  CHECK(cycle_loss(a, b, ones, zeros) >= 0.0);

  Tensor wrong({1, 3, 2, 2});
  CHECK_THROWS_MATCHES(cycle_loss(a, wrong, b, b), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::shape;
                       }));
}

TEST_CASE("style loss trivial and hand cases") {
  ChannelStats s1 = single_stat(0.4, 0.9);
  CHECK(style_loss(s1, s1) == 0.0);

  // single layer, single channel, dmu=0.3, dsd=0.4, one direction
  ChannelStats gen = single_stat(0.5, 0.6);
  ChannelStats ref = single_stat(0.2, 0.2);
  CHECK_THAT(style_loss(gen, ref), Catch::Matchers::WithinAbs(0.25, 1e-12));

  SECTION("strictly decreases toward the reference") {
    double prev = style_loss(gen, ref);
    for (double step : {0.25, 0.5, 0.75}) {
      ChannelStats mid = single_stat(0.5 + step * (0.2 - 0.5),
                                     0.6 + step * (0.2 - 0.6));
      double v = style_loss(mid, ref);
      CHECK(v < prev);
      prev = v;
    }
  }

  SECTION("invariant to consistent channel reordering") {
    ChannelStats a, b;
    a.mean.push_back(Tensor({1, 3}, {0.1, 0.2, 0.3}));
    a.stdev.push_back(Tensor({1, 3}, {1.0, 2.0, 3.0}));
    b.mean.push_back(Tensor({1, 3}, {0.3, 0.1, 0.5}));
    b.stdev.push_back(Tensor({1, 3}, {0.5, 1.5, 2.5}));
    double base = style_loss(a, b);
    ChannelStats ap, bp;  // reversed channels in both
    ap.mean.push_back(Tensor({1, 3}, {0.3, 0.2, 0.1}));
    ap.stdev.push_back(Tensor({1, 3}, {3.0, 2.0, 1.0}));
    bp.mean.push_back(Tensor({1, 3}, {0.5, 0.1, 0.3}));
    bp.stdev.push_back(Tensor({1, 3}, {2.5, 1.5, 0.5}));
    CHECK_THAT(style_loss(ap, bp), Catch::Matchers::WithinAbs(base, 1e-12));
  }

  SECTION("layout mismatch is a shape error") {
    ChannelStats two;
    two.mean.push_back(Tensor({1, 2}));
    two.stdev.push_back(Tensor({1, 2}));
    CHECK_THROWS_AS(style_loss(s1, two), Error);
  }
}

TEST_CASE("adversarial losses at the indifferent discriminator") {
  Tensor zeros = Tensor::zeros({1, 1, 3, 3});  // logits 0 -> D = 0.5
  auto [adv_d, adv_g] = adversarial_losses(zeros, zeros, zeros, zeros);
  CHECK_THAT(adv_d, Catch::Matchers::WithinAbs(-4.0 * std::log(0.5), 1e-6));
  CHECK_THAT(adv_g, Catch::Matchers::WithinAbs(-2.0 * std::log(0.5), 1e-6));
}

TEST_CASE("perfect discriminator drives adv_d to zero") {
  Tensor real = Tensor::full({1, 1, 2, 2}, 100.0);   // D -> 1 on real
  Tensor fake = Tensor::full({1, 1, 2, 2}, -100.0);  // D -> 0 on fake
  auto [adv_d, adv_g] = adversarial_losses(real, fake, real, fake);
  CHECK(adv_d >= 0.0);
  CHECK(adv_d < 1e-6);  // clamped at the probability floor
  CHECK(std::isfinite(adv_g));
}

TEST_CASE("losses stay finite for extreme logits") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor l({1, 1, 2, 2});
    for (double& v : l.data) v = rng.uniform(-100.0, 100.0);
    Tensor l2({1, 1, 2, 2});
    for (double& v : l2.data) v = rng.uniform(-100.0, 100.0);
    auto [adv_d, adv_g] = adversarial_losses(l, l2, l2, l);
    CHECK(std::isfinite(adv_d));
    CHECK(std::isfinite(adv_g));
  }
}

TEST_CASE("total loss arithmetic") {
  // adv_g + lambda*cyc + eta*sty = 1.3863 + 10*1.0 + 0.1*0.5
  CHECK_THAT(total_loss(1.3863, 1.0, 0.5, 10.0, 0.1),
             Catch::Matchers::WithinAbs(11.4363, 1e-12));
  CHECK(total_loss(0, 0, 0, 10, 0.1) == 0.0);
  // shipped defaults
  Config c;
  CHECK(c.lambda_cyc == 10.0);
  CHECK(c.eta_sty == 0.05);
}

TEST_CASE("tape losses agree with the plain formulas") {
  Tensor a = randn({1, 2, 4, 4}, 11, 0.5);
  Tensor b = randn({1, 2, 4, 4}, 12, 0.5);
  Tensor c = randn({1, 2, 4, 4}, 13, 0.5);
  Tensor d = randn({1, 2, 4, 4}, 14, 0.5);

  ad::Tape t;
  ad::Var va = t.leaf(a), vb = t.leaf(b), vc = t.leaf(c), vd = t.leaf(d);
  CHECK_THAT(t.val(cycle_loss_op(t, va, vb, vc, vd))[0],
             Catch::Matchers::WithinAbs(cycle_loss(a, b, c, d), 1e-12));

  // style: tape op vs plain stats path
  FeatureStack fa, fb;
  fa.layers.push_back(a);
  fb.layers.push_back(b);
  double plain = style_loss(channel_stats(fa), channel_stats(fb));
  ad::Var sty = style_loss_op(t, {va}, {vb});
  CHECK_THAT(t.val(sty)[0], Catch::Matchers::WithinAbs(plain, 1e-10));

  Tensor lr = randn({1, 1, 3, 3}, 15), lf = randn({1, 1, 3, 3}, 16);
  auto [adv_d, adv_g] = adversarial_losses(lr, lf, lr, lf);
  ad::Var vlr = t.leaf(lr), vlf = t.leaf(lf);
  CHECK_THAT(t.val(adv_d_op(t, vlr, vlf, vlr, vlf))[0],
             Catch::Matchers::WithinAbs(adv_d, 1e-12));
  CHECK_THAT(t.val(adv_g_op(t, vlf, vlf))[0],
             Catch::Matchers::WithinAbs(adv_g, 1e-12));
}

TEST_CASE("loss gradients match finite differences on miniature inputs") {
  auto fd_check = [](auto build, std::vector<Tensor> inputs) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    ad::Var loss = build(tape, inputs, leaves);
    tape.backward(loss);
    auto eval = [&](const std::vector<Tensor>& in) {
      ad::Tape t2;
      std::vector<ad::Var> l2;
      return t2.val(build(t2, in, l2))[0];
    };
    Rng rng(31);
    for (size_t wi = 0; wi < inputs.size(); ++wi) {
      const Tensor& g = tape.grad(leaves[wi]);
      for (int s = 0; s < 6; ++s) {
        int64_t coord =
            rng.uniform_int(0, static_cast<int>(inputs[wi].numel() - 1));
        double h = 1e-6;
        std::vector<Tensor> p = inputs, m = inputs;
        p[wi].data[static_cast<size_t>(coord)] += h;
        m[wi].data[static_cast<size_t>(coord)] -= h;
        double fd = (eval(p) - eval(m)) / (2 * h);
        CHECK(std::fabs(fd - g[coord]) <=
              1e-7 + 1e-4 * std::max(std::fabs(fd), std::fabs(g[coord])));
      }
    }
  };

  SECTION("cycle loss") {
    fd_check(
        [](ad::Tape& t, const std::vector<Tensor>& in,
           std::vector<ad::Var>& leaves) {
          leaves = {t.leaf(in[0], true), t.leaf(in[1], true),
                    t.leaf(in[2], true), t.leaf(in[3], true)};
          return cycle_loss_op(t, leaves[0], leaves[2], leaves[1], leaves[3]);
        },
        {randn({1, 2, 3, 3}, 1), randn({1, 2, 3, 3}, 2),
         randn({1, 2, 3, 3}, 3), randn({1, 2, 3, 3}, 4)});
  }
  SECTION("style loss") {
    fd_check(
        [](ad::Tape& t, const std::vector<Tensor>& in,
           std::vector<ad::Var>& leaves) {
          leaves = {t.leaf(in[0], true), t.leaf(in[1], true)};
          return style_loss_op(t, {leaves[0]}, {leaves[1]});
        },
        {randn({1, 3, 4, 4}, 5), randn({1, 3, 4, 4}, 6)});
  }
  SECTION("adversarial losses") {
    fd_check(
        [](ad::Tape& t, const std::vector<Tensor>& in,
           std::vector<ad::Var>& leaves) {
          leaves = {t.leaf(in[0], true), t.leaf(in[1], true),
                    t.leaf(in[2], true), t.leaf(in[3], true)};
          ad::Var d = adv_d_op(t, leaves[2], leaves[0], leaves[3], leaves[1]);
          ad::Var g = adv_g_op(t, leaves[0], leaves[1]);
          return t.add(d, g);
        },
        {randn({1, 1, 3, 3}, 7, 1.5), randn({1, 1, 3, 3}, 8, 1.5),
         randn({1, 1, 3, 3}, 9, 1.5), randn({1, 1, 3, 3}, 10, 1.5)});
  }
}
