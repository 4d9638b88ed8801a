#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "edit/core.hpp"
#include "edit/errors.hpp"
#include "edit/image_io.hpp"
#include "edit/tensor.hpp"

namespace edit {

// Dataset ingestion for unpaired multi-domain training plus a procedural
// synthetic-domain generator for desk-scale runs.

// ---------------------------------------------------------------------------
// Disk datasets: root/<domain_name>/<train|test>/*.png
// ---------------------------------------------------------------------------

enum class Split { train, test };

inline const char* to_string(Split s) {
  return s == Split::train ? "train" : "test";
}

struct DomainDataset {
  DomainLabel domain;
  Split split = Split::train;
  std::vector<std::string> items;  // image file paths

  int size() const { return static_cast<int>(items.size()); }
};

inline DomainDataset scan_domain(const std::string& root,
                                 const DomainLabel& label, Split split) {
  namespace fs = std::filesystem;
  DomainDataset ds;
  ds.domain = label;
  ds.split = split;
  fs::path dir = fs::path(root) / label.name / to_string(split);
  require(fs::exists(dir), ErrorKind::data,
          "dataset directory not found: " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string p = entry.path().string();
    if (detail::has_suffix(p, ".png") || detail::has_suffix(p, ".jpg") ||
        detail::has_suffix(p, ".jpeg"))
      ds.items.push_back(p);
  }
  std::sort(ds.items.begin(), ds.items.end());
  require(!ds.items.empty(), ErrorKind::data,
          "no images under " + dir.string());
  return ds;
}

/// Load, resize to size x size (bilinear), scale to [-1,1]; horizontal flip
/// with p = 0.5 per sample when augmenting.
inline Tensor load_batch(const DomainDataset& ds, const std::vector<int>& indices,
                         int size, bool augment, Rng& rng) {
  require(!indices.empty(), ErrorKind::domain, "load_batch: empty index list");
  Tensor batch({static_cast<int>(indices.size()), 3, size, size});
  for (size_t bi = 0; bi < indices.size(); ++bi) {
    int idx = indices[bi];
    require(idx >= 0 && idx < ds.size(), ErrorKind::domain,
            "load_batch: index out of range");
    const std::string& path = ds.items[static_cast<size_t>(idx)];
    Tensor img = image_to_tensor(read_image(path));
    img = resize_bilinear(img, size, size);
    if (augment && rng.bernoulli(0.5)) img = hflip(img);
    std::copy(img.data.begin(), img.data.end(),
              batch.data.begin() +
                  static_cast<int64_t>(bi) * 3 * size * size);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Procedural synthetic domains
// ---------------------------------------------------------------------------

enum class ShapeFamily { circle, square, triangle };
enum class TextureKind { flat, stripes, noise };

struct Rgb {
  double r, g, b;
};

struct SyntheticStyleSpec {
  ShapeFamily shape_family = ShapeFamily::circle;
  std::vector<Rgb> palette;  // colors in [-1,1] per channel
  TextureKind texture = TextureKind::flat;
  bool outline_only = false;
  Rgb background{1.0, 1.0, 1.0};
  uint64_t seed = 0;
};

namespace detail {

inline bool inside_shape(ShapeFamily family, double cx, double cy, double r,
                         double x, double y) {
  switch (family) {
    case ShapeFamily::circle: {
      double dx = x - cx, dy = y - cy;
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeFamily::square:
      return std::fabs(x - cx) <= r && std::fabs(y - cy) <= r;
    case ShapeFamily::triangle: {
      // upright triangle inscribed in the radius-r box
      double dy = y - (cy - r);
      if (dy < 0.0 || dy > 2.0 * r) return false;
      double half = (dy / (2.0 * r)) * r;
      return std::fabs(x - cx) <= half;
    }
  }
  return false;
}

}  // namespace detail

/// Deterministic styled-shape images: same spec and seed give identical
/// pixels. Outline-only images keep the background color inside the shape.
inline std::vector<Tensor> generate_synthetic(const SyntheticStyleSpec& spec,
                                              int n, int size) {
  require(n >= 1, ErrorKind::domain, "generate_synthetic: n must be >= 1");
  require(size >= 16, ErrorKind::domain, "generate_synthetic: size must be >= 16");
  require(!spec.palette.empty(), ErrorKind::domain,
          "generate_synthetic: palette must not be empty");
  Rng rng(spec.seed);
  std::vector<Tensor> images;
  images.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Rgb color =
        spec.palette[static_cast<size_t>(rng.uniform_int(
            0, static_cast<int>(spec.palette.size()) - 1))];
    const double cx = size * rng.uniform(0.35, 0.65);
    const double cy = size * rng.uniform(0.35, 0.65);
    const double radius = size * rng.uniform(0.2, 0.34);
    const double ring = std::max(1.5, size / 16.0);
    const double stripe_period = std::max(2.0, size / 8.0);
    const uint64_t noise_seed = rng.next_u64();
    Rng noise_rng(noise_seed);

    Tensor img({1, 3, size, size});
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        bool in = detail::inside_shape(spec.shape_family, cx, cy, radius,
                                       x + 0.5, y + 0.5);
        Rgb px = spec.background;
        if (in) {
          bool in_core =
              detail::inside_shape(spec.shape_family, cx, cy, radius - ring,
                                   x + 0.5, y + 0.5);
          if (spec.outline_only) {
            if (!in_core) px = color;  // interior stays background-colored
          } else {
            px = color;
            switch (spec.texture) {
              case TextureKind::flat:
                break;
              case TextureKind::stripes:
                if (static_cast<int>((x + y) / stripe_period) % 2 == 1) {
                  px.r *= 0.35;
                  px.g *= 0.35;
                  px.b *= 0.35;
                }
                break;
              case TextureKind::noise: {
                double d = noise_rng.uniform(-0.25, 0.25);
                px.r += d;
                px.g += d;
                px.b += d;
                break;
              }
            }
          }
        } else if (spec.texture == TextureKind::noise) {
          noise_rng.uniform();  // keep the stream aligned with pixel order
        }
        img.at4(0, 0, y, x) = std::clamp(px.r, -1.0, 1.0);
        img.at4(0, 1, y, x) = std::clamp(px.g, -1.0, 1.0);
        img.at4(0, 2, y, x) = std::clamp(px.b, -1.0, 1.0);
      }
    images.push_back(std::move(img));
  }
  return images;
}

// ---------------------------------------------------------------------------
// Uniform view the trainer consumes (disk- or synthetic-backed)
// ---------------------------------------------------------------------------

struct TrainingDomain {
  DomainLabel label;
  int count = 0;
  // Returns [len(indices), 3, size, size]; flips only when augment is set.
  std::function<Tensor(const std::vector<int>&, bool, Rng&)> batch;
};

inline TrainingDomain make_training_domain(DomainDataset ds, int image_size) {
  TrainingDomain td;
  td.label = ds.domain;
  td.count = ds.size();
  td.batch = [ds = std::move(ds), image_size](const std::vector<int>& idx,
                                              bool augment, Rng& rng) {
    return load_batch(ds, idx, image_size, augment, rng);
  };
  return td;
}

inline TrainingDomain make_training_domain(const SyntheticStyleSpec& spec,
                                           DomainLabel label, int count,
                                           int image_size) {
  TrainingDomain td;
  td.label = std::move(label);
  td.count = count;
  auto images = std::make_shared<std::vector<Tensor>>(
      generate_synthetic(spec, count, image_size));
  td.batch = [images, image_size](const std::vector<int>& idx, bool augment,
                                  Rng& rng) {
    Tensor batch({static_cast<int>(idx.size()), 3, image_size, image_size});
    for (size_t bi = 0; bi < idx.size(); ++bi) {
      require(idx[bi] >= 0 && idx[bi] < static_cast<int>(images->size()),
              ErrorKind::domain, "synthetic batch index out of range");
      Tensor img = (*images)[static_cast<size_t>(idx[bi])];
      if (augment && rng.bernoulli(0.5)) img = hflip(img);
      std::copy(img.data.begin(), img.data.end(),
                batch.data.begin() + static_cast<int64_t>(bi) * img.numel());
    }
    return batch;
  };
  return td;
}

/// Stock two-domain desk-scale scenario: outline shapes on white (edge-like)
/// vs. filled textured shapes on a dark ground (photo-like). Palettes act as
/// within-domain exemplar styles.
inline SyntheticStyleSpec synthetic_outline_spec(uint64_t seed) {
  SyntheticStyleSpec s;
  s.shape_family = ShapeFamily::circle;
  s.palette = {{-0.9, -0.9, -0.9}};  // near-black outlines
  s.texture = TextureKind::flat;
  s.outline_only = true;
  s.background = {1.0, 1.0, 1.0};
  s.seed = seed;
  return s;
}

inline SyntheticStyleSpec synthetic_textured_spec(uint64_t seed) {
  SyntheticStyleSpec s;
  s.shape_family = ShapeFamily::circle;
  s.palette = {{0.9, -0.6, -0.6}, {-0.6, 0.9, -0.6}, {-0.6, -0.6, 0.9},
               {0.9, 0.8, -0.6}};
  s.texture = TextureKind::stripes;
  s.outline_only = false;
  s.background = {-0.85, -0.85, -0.85};
  s.seed = seed;
  return s;
}

inline std::vector<TrainingDomain> make_synthetic_domains(const Config& cfg) {
  require(cfg.num_domains() >= 2, ErrorKind::domain,
          "synthetic scenario needs at least two domains");
  std::vector<TrainingDomain> domains;
  for (int i = 0; i < cfg.num_domains(); ++i) {
    SyntheticStyleSpec spec = (i % 2 == 0)
                                  ? synthetic_outline_spec(cfg.seed + 101 * i)
                                  : synthetic_textured_spec(cfg.seed + 101 * i);
    if (i >= 2)  // later domains vary the shape family for distinctness
      spec.shape_family = (i % 4 < 2) ? ShapeFamily::square : ShapeFamily::triangle;
    domains.push_back(make_training_domain(spec, cfg.label(i),
                                           cfg.synthetic_per_domain,
                                           cfg.image_size));
  }
  return domains;
}

inline std::vector<TrainingDomain> make_disk_domains(const Config& cfg,
                                                     const std::string& root,
                                                     Split split) {
  std::vector<TrainingDomain> domains;
  for (int i = 0; i < cfg.num_domains(); ++i)
    domains.push_back(make_training_domain(
        scan_domain(root, cfg.label(i), split), cfg.image_size));
  return domains;
}

/// data_root == "synthetic" selects the procedural scenario; anything else
/// is a dataset directory. EDIT_DATA_ROOT overrides at the CLI layer.
inline std::vector<TrainingDomain> make_domains(const Config& cfg,
                                                Split split) {
  if (cfg.data_root == "synthetic") return make_synthetic_domains(cfg);
  return make_disk_domains(cfg, cfg.data_root, split);
}

}  // namespace edit
