#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "edit/data.hpp"
#include "edit/image_io.hpp"

using namespace edit;

namespace {

double channel_mean(const Tensor& t, int c) {
  double s = 0.0;
  const int64_t m = static_cast<int64_t>(t.dim(2)) * t.dim(3);
  for (int n = 0; n < t.dim(0); ++n) {
    const double* p = t.data.data() + (static_cast<int64_t>(n) * t.dim(1) + c) * m;
    for (int64_t i = 0; i < m; ++i) s += p[i];
  }
  return s / static_cast<double>(m * t.dim(0));
}

double batch_channel_mean(const std::vector<Tensor>& images, int c) {
  double s = 0.0;
  for (const Tensor& t : images) s += channel_mean(t, c);
  return s / static_cast<double>(images.size());
}

}  // namespace

TEST_CASE("synthetic generation is deterministic and in range") {
  SyntheticStyleSpec spec;
  spec.shape_family = ShapeFamily::circle;
  spec.palette = {{0.9, -0.7, -0.7}};
  spec.texture = TextureKind::flat;
  spec.seed = 7;

  std::vector<Tensor> a = generate_synthetic(spec, 4, 32);
  std::vector<Tensor> b = generate_synthetic(spec, 4, 32);
  REQUIRE(a.size() == 4);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].data == b[i].data);  // bitwise identical
    CHECK(a[i].shape == std::vector<int>({1, 3, 32, 32}));
    CHECK(a[i].min() >= -1.0);
    CHECK(a[i].max() <= 1.0);
    validate_image_tensor(a[i]);
  }

  SECTION("texture variants stay deterministic too") {
    for (TextureKind k : {TextureKind::stripes, TextureKind::noise}) {
      SyntheticStyleSpec s2 = spec;
      s2.texture = k;
      std::vector<Tensor> x = generate_synthetic(s2, 2, 32);
      std::vector<Tensor> y = generate_synthetic(s2, 2, 32);
      CHECK(x[0].data == y[0].data);
      CHECK(x[1].data == y[1].data);
    }
  }
}

TEST_CASE("outline-only images keep background-colored interiors") {
  SyntheticStyleSpec outline = synthetic_outline_spec(12);
  SyntheticStyleSpec filled = outline;  // identical geometry, filled shapes
  filled.outline_only = false;

  std::vector<Tensor> out_imgs = generate_synthetic(outline, 3, 32);
  std::vector<Tensor> fill_imgs = generate_synthetic(filled, 3, 32);
  auto background_count = [](const Tensor& img) {
    int n = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (img.at4(0, 0, y, x) > 0.99 && img.at4(0, 1, y, x) > 0.99 &&
            img.at4(0, 2, y, x) > 0.99)
          ++n;
    return n;
  };
  for (size_t i = 0; i < out_imgs.size(); ++i) {
    int bg_outline = background_count(out_imgs[i]);
    int bg_filled = background_count(fill_imgs[i]);
    // same geometry, so the outline version regains exactly the interior
    CHECK(bg_outline > bg_filled);
    // ring itself is drawn (some non-background pixels exist)
    CHECK(bg_outline < 32 * 32);
  }
}

TEST_CASE("palette shifts dominant hue by more than 0.2") {
  SyntheticStyleSpec red;
  red.palette = {{0.9, -0.6, -0.6}};
  red.texture = TextureKind::flat;
  red.seed = 3;
  SyntheticStyleSpec blue = red;
  blue.palette = {{-0.6, -0.6, 0.9}};

  std::vector<Tensor> reds = generate_synthetic(red, 8, 32);
  std::vector<Tensor> blues = generate_synthetic(blue, 8, 32);
  double r_red = batch_channel_mean(reds, 0), r_blue = batch_channel_mean(blues, 0);
  double b_red = batch_channel_mean(reds, 2), b_blue = batch_channel_mean(blues, 2);
  CHECK(r_red - r_blue > 0.2);
  CHECK(b_blue - b_red > 0.2);
}

TEST_CASE("png round trip and disk loading") {
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / "edit_test_data";
  fs::create_directories(root / "shapes" / "train");

  SyntheticStyleSpec spec = synthetic_textured_spec(5);
  std::vector<Tensor> imgs = generate_synthetic(spec, 3, 24);
  for (size_t i = 0; i < imgs.size(); ++i)
    write_png((root / "shapes" / "train" /
               ("img" + std::to_string(i) + ".png")).string(),
              tensor_to_image(imgs[i]));

  DomainLabel label = make_onehot(0, 2, "shapes");
  DomainDataset ds = scan_domain(root.string(), label, Split::train);
  REQUIRE(ds.size() == 3);

  SECTION("deterministic without augmentation") {
    Rng r1(1), r2(2);
    Tensor a = load_batch(ds, {0, 2}, 16, false, r1);
    Tensor b = load_batch(ds, {0, 2}, 16, false, r2);
    CHECK(a.data == b.data);
    CHECK(a.shape == std::vector<int>({2, 3, 16, 16}));
    CHECK(a.min() >= -1.0);
    CHECK(a.max() <= 1.0);
  }

  SECTION("augmented loads only ever differ by a horizontal flip") {
    Rng rng(123);
    Tensor plain = load_batch(ds, {1}, 16, false, rng);
    bool saw_flip = false, saw_plain = false;
    for (int trial = 0; trial < 12; ++trial) {
      Rng ar(static_cast<uint64_t>(trial));
      Tensor aug = load_batch(ds, {1}, 16, true, ar);
      Tensor flipped = hflip(plain);
      if (aug.data == plain.data) saw_plain = true;
      else if (aug.data == flipped.data) saw_flip = true;
      else FAIL("augmented batch is neither the image nor its mirror");
    }
    CHECK(saw_flip);
    CHECK(saw_plain);
  }

  SECTION("flip moves column j to W-1-j") {
    Tensor img = imgs[0];
    Tensor flipped = hflip(img);
    for (int y = 0; y < img.dim(2); ++y)
      for (int x = 0; x < img.dim(3); ++x)
        CHECK(flipped.at4(0, 0, y, x) == img.at4(0, 0, y, img.dim(3) - 1 - x));
  }

  SECTION("undecodable file names the path in the error") {
    fs::path bad = root / "shapes" / "train" / "broken.png";
    std::ofstream(bad) << "this is not a png";
    DomainDataset ds2 = scan_domain(root.string(), label, Split::train);
    int bad_index = -1;
    for (int i = 0; i < ds2.size(); ++i)
      if (ds2.items[static_cast<size_t>(i)].find("broken") != std::string::npos)
        bad_index = i;
    REQUIRE(bad_index >= 0);
    Rng rng(1);
    try {
      load_batch(ds2, {bad_index}, 16, false, rng);
      FAIL("expected a data error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::data);
      CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
    }
    fs::remove(bad);
  }

  SECTION("missing split directory is a data error") {
    CHECK_THROWS_MATCHES(scan_domain(root.string(), label, Split::test), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::data;
                         }));
  }
}

TEST_CASE("jpeg files load through the same path") {
  // libjpeg round trip via a quick encode with the library is out of scope;
  // instead assert the reader rejects a non-JPEG payload cleanly.
  namespace fs = std::filesystem;
  fs::path root = fs::temp_directory_path() / "edit_test_data";
  fs::create_directories(root);
  fs::path bad = root / "fake.jpg";
  std::ofstream(bad) << "not a jpeg";
  CHECK_THROWS_MATCHES(read_image(bad.string()), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::data;
                       }));
}

TEST_CASE("training domains present a uniform batch interface") {
  Config cfg;
  cfg.domains = {"outline", "textured"};
  cfg.image_size = 16;
  cfg.synthetic_per_domain = 5;
  cfg.seed = 9;
  std::vector<TrainingDomain> domains = make_synthetic_domains(cfg);
  REQUIRE(domains.size() == 2);
  CHECK(domains[0].count == 5);
  Rng rng(2);
  Tensor batch = domains[1].batch({0, 3}, false, rng);
  CHECK(batch.shape == std::vector<int>({2, 3, 16, 16}));
  validate_image_tensor(batch);
}
