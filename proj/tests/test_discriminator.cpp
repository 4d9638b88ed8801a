#include <catch2/catch_amalgamated.hpp>

#include "edit/discriminator.hpp"

using namespace edit;

namespace {

// Layer-by-layer shape arithmetic over the canonical patch stack:
// kernel 4, pad 1, strides 2,2,2,1,1.
int oracle_logit_extent(int input) {
  int x = input;
  for (int stride : {2, 2, 2, 1, 1}) x = (x + 2 * 1 - 4) / stride + 1;
  return x;
}

// Interval of input pixels feeding output unit range [lo, hi] along one axis.
struct Interval {
  int lo, hi;
};

Interval receptive_interval(int unit, int input_extent) {
  Interval iv{unit, unit};
  for (int stride : {1, 1, 2, 2, 2}) {  // walk back from the head
    iv.lo = iv.lo * stride - 1;
    iv.hi = iv.hi * stride - 1 + 3;
  }
  iv.lo = std::max(iv.lo, 0);
  iv.hi = std::min(iv.hi, input_extent - 1);
  return iv;
}

Tensor random_image(std::vector<int> shape, uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  rng.fill_normal(t, 0.0, 0.4);
  for (double& v : t.data) v = std::clamp(v, -1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("patch logits match the shape oracle") {
  Rng rng(3);
  DiscriminatorWeights dw = init_discriminator({8, 2, true}, rng);
  DomainLabel label = make_onehot(0, 2);

  for (int size : {64, 128, 256}) {
    Tensor img = random_image({1, 3, size, size}, 11);
    Tensor logits = discriminate(img, label, dw);
    int expect = oracle_logit_extent(size);
    INFO("input " << size);
    CHECK(logits.shape == std::vector<int>({1, 1, expect, expect}));
  }
  CHECK(oracle_logit_extent(256) == 30);
  CHECK(oracle_logit_extent(64) == 6);
}

TEST_CASE("receptive field is 70 pixels") {
  // interval width for an interior unit equals the nominal receptive field
  Interval iv = receptive_interval(10, 1024);
  CHECK(iv.hi - iv.lo + 1 == 70);
}

TEST_CASE("domain conditioning changes the logits") {
  Rng rng(5);
  DiscriminatorWeights dw = init_discriminator({4, 3, true}, rng);
  Tensor img = random_image({1, 3, 32, 32}, 13);
  Tensor l0 = discriminate(img, make_onehot(0, 3), dw);
  Tensor l1 = discriminate(img, make_onehot(1, 3), dw);
  CHECK(l0.data != l1.data);
}

TEST_CASE("inputs below the minimum size are rejected") {
  Rng rng(6);
  DiscriminatorWeights dw = init_discriminator({4, 2, true}, rng);
  DomainLabel label = make_onehot(0, 2);

  Tensor tiny = random_image({1, 3, 8, 8}, 1);
  CHECK_THROWS_MATCHES(discriminate(tiny, label, dw), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::shape;
                       }));
  // 16..23 px pass the minimum but still underflow the five-layer stack
  Tensor small = random_image({1, 3, 16, 16}, 2);
  CHECK_THROWS_MATCHES(discriminate(small, label, dw), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::shape;
                       }));
  Tensor ok = random_image({1, 3, 32, 32}, 3);
  CHECK_NOTHROW(discriminate(ok, label, dw));
}

TEST_CASE("single-pixel perturbations stay inside the receptive field") {
  // Instance norm couples all spatial positions through its statistics, so
  // this check runs with normalization off to expose the pure conv field.
  Rng rng(7);
  DiscriminatorWeights dw = init_discriminator({4, 2, false}, rng);
  DomainLabel label = make_onehot(1, 2);
  const int size = 64;
  Tensor img = random_image({1, 3, size, size}, 17);
  Tensor base = discriminate(img, label, dw);
  const int extent = base.dim(2);

  for (auto [py, px] : std::vector<std::pair<int, int>>{{0, 0}, {31, 40}, {63, 63}}) {
    Tensor poked = img;
    poked.at4(0, 1, py, px) += 0.25;
    Tensor out = discriminate(poked, label, dw);
    for (int uy = 0; uy < extent; ++uy)
      for (int ux = 0; ux < extent; ++ux) {
        double delta = std::fabs(out.at4(0, 0, uy, ux) - base.at4(0, 0, uy, ux));
        Interval ivy = receptive_interval(uy, size);
        Interval ivx = receptive_interval(ux, size);
        bool covered = py >= ivy.lo && py <= ivy.hi && px >= ivx.lo && px <= ivx.hi;
        if (!covered) {
          INFO("pixel (" << py << "," << px << ") unit (" << uy << "," << ux << ")");
          CHECK(delta == 0.0);
        }
      }
  }
}

TEST_CASE("with instance norm on, far units move negligibly") {
  Rng rng(8);
  DiscriminatorWeights dw = init_discriminator({4, 2, true}, rng);
  DomainLabel label = make_onehot(1, 2);
  const int size = 64;
  Tensor img = random_image({1, 3, size, size}, 19);
  Tensor base = discriminate(img, label, dw);
  Tensor poked = img;
  poked.at4(0, 0, 0, 0) += 0.25;
  Tensor out = discriminate(poked, label, dw);
  const int extent = base.dim(2);

  double near = std::fabs(out.at4(0, 0, 0, 0) - base.at4(0, 0, 0, 0));
  double far = std::fabs(out.at4(0, 0, extent - 1, extent - 1) -
                         base.at4(0, 0, extent - 1, extent - 1));
  CHECK(near > 0.0);
  CHECK(far < 0.05 * near);
}
