#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "edit/data.hpp"
#include "edit/evaluation.hpp"

using namespace edit;

namespace {

Tensor clamped_noise(std::vector<int> shape, uint64_t seed, double std = 0.4) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  rng.fill_normal(t, 0.0, std);
  for (double& v : t.data) v = std::clamp(v, -1.0, 1.0);
  return t;
}

Config tiny_config(uint64_t seed = 5) {
  Config c;
  c.domains = {"outline", "textured"};
  c.image_size = 32;
  c.base_width = 4;
  c.num_resblocks = 1;
  c.total_epochs = 1;
  c.decay_start_epoch = 1;
  c.seed = seed;
  c.embed_dim = 8;
  c.synthetic_per_domain = 3;
  return c;
}

}  // namespace

TEST_CASE("content error hand cases") {
  NamedTensors backbone = init_backbone_tensors();
  FeatureExtractor fx = make_extractor(backbone, {0, 1, 2, 3, 4});

  Tensor a = clamped_noise({1, 3, 16, 16}, 1);
  Tensor b = clamped_noise({1, 3, 16, 16}, 2);

  CHECK(content_error(a, a, fx, 2) == 0.0);  // identity
  double ab = content_error(a, b, fx, 2);
  double ba = content_error(b, a, fx, 2);
  CHECK_THAT(ab, Catch::Matchers::WithinAbs(ba, 1e-9));  // symmetric
  CHECK(ab > 0.0);

  SECTION("doubling the feature difference doubles the error") {
    // hook extractor whose single layer is the image itself, then scaled
    FeatureExtractor plain = [](const Tensor& img) {
      FeatureStack fs;
      fs.layers.push_back(img);
      return fs;
    };
    FeatureExtractor doubled = [](const Tensor& img) {
      FeatureStack fs;
      Tensor scaled = img;
      for (double& v : scaled.data) v *= 2.0;
      fs.layers.push_back(scaled);
      return fs;
    };
    double base = content_error(a, b, plain, 0);
    double twice = content_error(a, b, doubled, 0);
    CHECK_THAT(twice, Catch::Matchers::WithinAbs(2.0 * base, 1e-9));
  }

  SECTION("layer position out of range is a domain error") {
    CHECK_THROWS_MATCHES(content_error(a, b, fx, 9), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::domain;
                         }));
  }
}

TEST_CASE("style error reproduces the quoted normalization exactly") {
  // one layer, M=1, H=W=2: Gram of all-ones is [[4]], of zeros [[0]];
  // ||4||^2 / (4 * 1 * 2^2 * 2^2) = 16/64
  FeatureExtractor hook = [](const Tensor& img) {
    FeatureStack fs;
    Tensor f({1, 1, 2, 2});
    double v = img[0] > 0 ? 1.0 : 0.0;  // ones for "exemplar", zeros otherwise
    std::fill(f.data.begin(), f.data.end(), v);
    fs.layers.push_back(f);
    return fs;
  };
  Tensor exemplar = Tensor::full({1, 3, 4, 4}, 1.0);
  Tensor output = Tensor::full({1, 3, 4, 4}, -1.0);
  CHECK_THAT(style_error(output, exemplar, hook),
             Catch::Matchers::WithinAbs(0.25, 1e-12));

  SECTION("identical images give zero") {
    NamedTensors backbone = init_backbone_tensors();
    FeatureExtractor fx = make_extractor(backbone, {0, 1, 2});
    Tensor img = clamped_noise({1, 3, 16, 16}, 3);
    CHECK(style_error(img, img, fx) == 0.0);
  }
  SECTION("non-negative on random pairs") {
    NamedTensors backbone = init_backbone_tensors();
    FeatureExtractor fx = make_extractor(backbone, {0, 1, 2, 3, 4});
    for (uint64_t s = 10; s < 14; ++s) {
      Tensor a = clamped_noise({1, 3, 16, 16}, s);
      Tensor b = clamped_noise({1, 3, 16, 16}, s + 100);
      CHECK(style_error(a, b, fx) >= 0.0);
    }
  }
}

TEST_CASE("parameter counts are exact and survive checkpoints") {
  Config cfg = tiny_config(7);
  TrainState st = init_train_state(cfg);
  ParamCounts c = count_params(st);

  CHECK(c.dynamic == param_count(st.spec));  // single source of truth
  CHECK(c.shared == count_shared_params(st.spec));
  CHECK(c.paramnet ==
        count_paramnet_params(st.spec, cfg.embed_dim, cfg.num_domains()));

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "edit_test_eval";
  fs::create_directories(dir);
  std::string path = (dir / "count.ckpt").string();
  save_checkpoint(st, path);
  TrainState loaded = load_checkpoint(path);
  ParamCounts c2 = count_params(loaded);
  CHECK(c2.shared == c.shared);
  CHECK(c2.dynamic == c.dynamic);
  CHECK(c2.paramnet == c.paramnet);
}

TEST_CASE("full-scale widths keep dynamic below shared") {
  GeneratorSpec spec = default_generator_spec(64, 9);
  int64_t shared = count_shared_params(spec);
  int64_t dynamic = param_count(spec);
  CHECK(dynamic > 0);
  CHECK(dynamic < shared);  // the decoder is the small, generated part
}

TEST_CASE("evaluate_pair produces a sane report") {
  Config cfg = tiny_config(9);
  TrainState st = init_train_state(cfg);
  std::vector<TrainingDomain> domains = make_synthetic_domains(cfg);

  EvalOptions opts;
  opts.max_exemplars = 2;
  EvalReport rep = evaluate_pair(st, domains[0], domains[1], opts);
  CHECK(rep.num_images == cfg.synthetic_per_domain * 2);
  CHECK(rep.content_mean >= 0.0);
  CHECK(rep.style_mean >= 0.0);
  CHECK(rep.content_std >= 0.0);
  CHECK(rep.ms_per_image > 0.0);
  CHECK(rep.shared_param_count > 0);

  std::string text = eval_report_text(rep);
  CHECK(text.find("content error") != std::string::npos);
  std::string kv = eval_report_kv(rep);
  CHECK(kv.find("style_error_mean=") != std::string::npos);
}
