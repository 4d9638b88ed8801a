#include <catch2/catch_amalgamated.hpp>

#include "edit/autodiff.hpp"
#include "edit/tensor.hpp"

using edit::Rng;
using edit::Tensor;
using edit::ad::Pad;
using edit::ad::Tape;
using edit::ad::Var;

namespace {

// Central finite difference of a scalar-valued rebuild function with respect
// to one coordinate of one input tensor.
double central_diff(std::function<double(const std::vector<Tensor>&)> f,
                    std::vector<Tensor> inputs, size_t which, int64_t coord,
                    double h) {
  std::vector<Tensor> plus = inputs, minus = inputs;
  plus[which].data[static_cast<size_t>(coord)] += h;
  minus[which].data[static_cast<size_t>(coord)] -= h;
  return (f(plus) - f(minus)) / (2.0 * h);
}

// Checks analytic grads of `build` (which returns the scalar loss Var after
// registering inputs as leaves) against central differences on a sample of
// coordinates.
void check_gradients(
    std::function<Var(Tape&, const std::vector<Tensor>&, std::vector<Var>&)>
        build,
    std::vector<Tensor> inputs, double tol = 1e-6, int samples_per_input = 12,
    unsigned seed = 17) {
  Tape tape;
  std::vector<Var> leaves;
  Var loss = build(tape, inputs, leaves);
  tape.backward(loss);

  auto eval = [&](const std::vector<Tensor>& in) {
    Tape t2;
    std::vector<Var> l2;
    return t2.val(build(t2, in, l2))[0];
  };

  Rng rng(seed);
  for (size_t wi = 0; wi < inputs.size(); ++wi) {
    const Tensor& g = tape.grad(leaves[wi]);
    int64_t n = inputs[wi].numel();
    for (int s = 0; s < samples_per_input; ++s) {
      int64_t coord = rng.uniform_int(0, static_cast<int>(n - 1));
      double scale = std::max(1.0, std::fabs(inputs[wi][coord]));
      double fd = central_diff(eval, inputs, wi, coord, 1e-5 * scale);
      double an = g[coord];
      INFO("input " << wi << " coord " << coord << " fd=" << fd
                    << " an=" << an);
      CHECK(std::fabs(fd - an) <=
            1e-8 + tol * std::max(std::fabs(fd), std::fabs(an)));
    }
  }
}

Tensor randn(std::vector<int> shape, Rng& rng, double std = 1.0) {
  Tensor t(std::move(shape));
  rng.fill_normal(t, 0.0, std);
  return t;
}

}  // namespace

TEST_CASE("conv2d forward matches direct computation") {
  Rng rng(1);
  Tensor x = randn({1, 2, 5, 5}, rng);
  Tensor w = randn({3, 2, 3, 3}, rng);
  Tensor b = randn({3}, rng);
  Tape tape;
  Var vx = tape.leaf(x), vw = tape.leaf(w), vb = tape.leaf(b);
  Var y = tape.conv2d(vx, vw, vb, 1, 1, Pad::zero);
  const Tensor& out = tape.val(y);
  REQUIRE(out.shape == std::vector<int>({1, 3, 5, 5}));

  // direct nested-loop convolution
  for (int oc = 0; oc < 3; ++oc)
    for (int oy = 0; oy < 5; ++oy)
      for (int ox = 0; ox < 5; ++ox) {
        double acc = b[oc];
        for (int ic = 0; ic < 2; ++ic)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              int sy = oy + ky - 1, sx = ox + kx - 1;
              if (sy < 0 || sy >= 5 || sx < 0 || sx >= 5) continue;
              acc += x.at4(0, ic, sy, sx) *
                     w.data[((static_cast<int64_t>(oc) * 2 + ic) * 3 + ky) * 3 +
                            kx];
            }
        CHECK_THAT(out.at4(0, oc, oy, ox),
                   Catch::Matchers::WithinAbs(acc, 1e-12));
      }
}

TEST_CASE("conv2d gradients, zero and reflect padding, stride 1 and 2") {
  Rng rng(2);
  for (Pad mode : {Pad::zero, Pad::reflect}) {
    for (int stride : {1, 2}) {
      std::vector<Tensor> inputs = {randn({2, 3, 6, 6}, rng),
                                    randn({4, 3, 3, 3}, rng, 0.4),
                                    randn({4}, rng, 0.2)};
      check_gradients(
          [stride, mode](Tape& t, const std::vector<Tensor>& in,
                         std::vector<Var>& leaves) {
            leaves = {t.leaf(in[0], true), t.leaf(in[1], true),
                      t.leaf(in[2], true)};
            Var y = t.conv2d(leaves[0], leaves[1], leaves[2], stride, 1, mode);
            return t.mean_all(t.square(y));
          },
          inputs);
    }
  }
}

TEST_CASE("instance_norm normalizes and gradients are exact") {
  Rng rng(3);
  Tensor x = randn({2, 3, 4, 4}, rng, 2.0);
  Tensor sc = Tensor::full({3}, 1.0);
  Tensor sh = Tensor::zeros({3});

  Tape tape;
  Var vx = tape.leaf(x);
  Var y = tape.instance_norm(vx, tape.leaf(sc), tape.leaf(sh));
  const Tensor& out = tape.val(y);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double mean = 0.0, var = 0.0;
      for (int i = 0; i < 16; ++i)
        mean += out.at4(n, c, i / 4, i % 4);
      mean /= 16.0;
      for (int i = 0; i < 16; ++i) {
        double d = out.at4(n, c, i / 4, i % 4) - mean;
        var += d * d;
      }
      var /= 16.0;
      CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.0, 1e-5));
      CHECK_THAT(var, Catch::Matchers::WithinAbs(1.0, 1e-5));
    }

  std::vector<Tensor> inputs = {x, randn({3}, rng, 0.5), randn({3}, rng, 0.5)};
  check_gradients(
      [](Tape& t, const std::vector<Tensor>& in, std::vector<Var>& leaves) {
        leaves = {t.leaf(in[0], true), t.leaf(in[1], true),
                  t.leaf(in[2], true)};
        Var y = t.instance_norm(leaves[0], leaves[1], leaves[2]);
        return t.mean_all(t.square(y));
      },
      inputs, 1e-5);
}

TEST_CASE("activation and reduction gradients") {
  Rng rng(4);
  std::vector<Tensor> inputs = {randn({2, 2, 3, 3}, rng)};
  check_gradients(
      [](Tape& t, const std::vector<Tensor>& in, std::vector<Var>& leaves) {
        leaves = {t.leaf(in[0], true)};
        Var a = t.tanh_op(leaves[0]);
        Var b = t.leaky_relu(a, 0.2);
        Var c = t.relu(t.scale(b, 1.7));
        return t.mean_all(t.square(c));
      },
      inputs, 1e-5);
}

TEST_CASE("linear, pooling, concat, slice gradients") {
  Rng rng(5);
  std::vector<Tensor> inputs = {randn({2, 3, 4, 4}, rng), randn({5, 7}, rng),
                                randn({5}, rng)};
  check_gradients(
      [](Tape& t, const std::vector<Tensor>& in, std::vector<Var>& leaves) {
        leaves = {t.leaf(in[0], true), t.leaf(in[1], true),
                  t.leaf(in[2], true)};
        Var pooled = t.global_avg_pool(leaves[0]);          // [2,3]
        Var wide = t.concat_cols_const(pooled, {1.0, 0.0, 0.0, 1.0});  // [2,7]
        Var h = t.linear(wide, leaves[1], leaves[2]);        // [2,5]
        Var flat = t.reshape(h, {10});
        Var piece = t.slice_flat(flat, 2, 6);
        Var joined = t.concat_flat({piece, piece});
        return t.mean_all(t.square(joined));
      },
      inputs, 1e-5);
}

TEST_CASE("upsample and channel statistics gradients") {
  Rng rng(6);
  std::vector<Tensor> inputs = {randn({1, 2, 3, 3}, rng)};
  check_gradients(
      [](Tape& t, const std::vector<Tensor>& in, std::vector<Var>& leaves) {
        leaves = {t.leaf(in[0], true)};
        Var up = t.upsample_nearest2(leaves[0]);
        Var mu = t.channel_mean(up);
        Var sd = t.channel_std(up);
        return t.add(t.mean_all(t.square(mu)), t.mean_all(t.square(sd)));
      },
      inputs, 1e-5);
}

TEST_CASE("log-sigmoid reductions: values, gradients, extreme logits") {
  Tape tape;
  Tensor zeros = Tensor::zeros({2, 1, 2, 2});
  Var v = tape.leaf(zeros);
  CHECK_THAT(tape.val(tape.mean_log_sigmoid(v))[0],
             Catch::Matchers::WithinAbs(std::log(0.5), 1e-12));
  CHECK_THAT(tape.val(tape.mean_log_one_minus_sigmoid(v))[0],
             Catch::Matchers::WithinAbs(std::log(0.5), 1e-12));

  // finite at extreme logits
  Tensor ext({4}, {100.0, -100.0, 55.0, -55.0});
  Tape t2;
  Var ve = t2.leaf(ext);
  double a = t2.val(t2.mean_log_sigmoid(ve))[0];
  double b = t2.val(t2.mean_log_one_minus_sigmoid(ve))[0];
  CHECK(std::isfinite(a));
  CHECK(std::isfinite(b));

  Rng rng(7);
  std::vector<Tensor> inputs = {randn({1, 1, 3, 3}, rng, 2.0)};
  check_gradients(
      [](Tape& t, const std::vector<Tensor>& in, std::vector<Var>& leaves) {
        leaves = {t.leaf(in[0], true)};
        Var s1 = t.mean_log_sigmoid(leaves[0]);
        Var s2 = t.mean_log_one_minus_sigmoid(leaves[0]);
        return t.add(s1, s2);
      },
      inputs, 1e-5);
}

TEST_CASE("gradients accumulate across shared leaves") {
  // One weight used twice must receive the sum of both contributions.
  Tensor w({2}, {0.5, -0.25});
  Tape tape;
  Var vw = tape.leaf(w, true);
  Var doubled = tape.add(vw, vw);
  Var loss = tape.sum_all(doubled);
  tape.backward(loss);
  CHECK(tape.grad(vw)[0] == 2.0);
  CHECK(tape.grad(vw)[1] == 2.0);
}

TEST_CASE("frozen leaves receive no gradient") {
  Tensor w({2}, {1.0, 2.0});
  Tape tape;
  Var frozen = tape.leaf(w, false);
  Var live = tape.leaf(w, true);
  Var loss = tape.mean_all(tape.mul(frozen, live));
  tape.backward(loss);
  const Tensor& g = tape.grad(frozen);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(tape.grad(live)[0] != 0.0);
}
