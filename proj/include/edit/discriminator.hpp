#pragma once

#include <string>
#include <vector>

#include "edit/autodiff.hpp"
#include "edit/core.hpp"
#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit {

// 70x70 PatchGAN judging per-patch realness, conditioned on the domain by
// concatenating one constant feature plane per domain to the RGB input.
// Stack: 4x4 convs, channels W-2W-4W-8W (strides 2,2,2,1), then a 1-channel
// stride-1 head; instance norm on all but the first and last layers;
// LeakyReLU(0.2).

struct DiscriminatorOptions {
  int base_width = 64;
  int num_domains = 2;
  bool with_norm = true;  // disabling isolates the pure receptive field
};

struct DiscriminatorLayer {
  int in_ch, out_ch, stride;
  bool norm, act;
};

inline std::vector<DiscriminatorLayer> discriminator_layers(
    const DiscriminatorOptions& o) {
  const int w = o.base_width;
  return {
      {3 + o.num_domains, w, 2, false, true},
      {w, 2 * w, 2, o.with_norm, true},
      {2 * w, 4 * w, 2, o.with_norm, true},
      {4 * w, 8 * w, 1, o.with_norm, true},
      {8 * w, 1, 1, false, false},
  };
}

constexpr int kDiscriminatorKernel = 4;
constexpr int kDiscriminatorMinInput = 16;
constexpr double kDiscriminatorLeakySlope = 0.2;

struct DiscriminatorWeights {
  NamedTensors tensors;
  DiscriminatorOptions opts;
};

inline DiscriminatorWeights init_discriminator(const DiscriminatorOptions& o,
                                               Rng& rng) {
  DiscriminatorWeights dw;
  dw.opts = o;
  auto layers = discriminator_layers(o);
  for (size_t i = 0; i < layers.size(); ++i) {
    const DiscriminatorLayer& l = layers[i];
    std::string key = "discriminator.layer" + std::to_string(i + 1);
    Tensor w({l.out_ch, l.in_ch, kDiscriminatorKernel, kDiscriminatorKernel});
    rng.fill_normal(w, 0.0, 0.02);
    dw.tensors[key + ".weight"] = std::move(w);
    dw.tensors[key + ".bias"] = Tensor::zeros({l.out_ch});
    if (l.norm) {
      dw.tensors[key + ".norm_scale"] = Tensor::full({l.out_ch}, 1.0);
      dw.tensors[key + ".norm_shift"] = Tensor::zeros({l.out_ch});
    }
  }
  return dw;
}

struct DiscriminatorBinding {
  std::map<std::string, ad::Var> vars;
  DiscriminatorOptions opts;

  static DiscriminatorBinding bind(ad::Tape& tape,
                                   const DiscriminatorWeights& dw,
                                   bool trainable) {
    DiscriminatorBinding db;
    db.opts = dw.opts;
    for (const auto& [name, tensor] : dw.tensors)
      db.vars[name] = tape.leaf(tensor, trainable);
    return db;
  }

  ad::Var at(const std::string& name) const {
    auto it = vars.find(name);
    require(it != vars.end(), ErrorKind::shape,
            "missing discriminator tensor: " + name);
    return it->second;
  }
};

/// Per-patch logits (pre-sigmoid), [N, 1, h', w'].
inline ad::Var discriminate_forward(ad::Tape& t, ad::Var image,
                                    const DomainLabel& label,
                                    const DiscriminatorBinding& db) {
  const Tensor& img = t.val(image);
  require(img.ndim() == 4 && img.dim(1) == 3, ErrorKind::shape,
          "discriminator: input must be [N,3,H,W]");
  require(img.dim(2) >= kDiscriminatorMinInput &&
              img.dim(3) >= kDiscriminatorMinInput,
          ErrorKind::shape, "discriminator: input smaller than minimum (16 px)");
  require(label.num_domains() == db.opts.num_domains, ErrorKind::shape,
          "discriminator: label dimension mismatch");

  ad::Var x = t.concat_planes_const(image, label.onehot);
  auto layers = discriminator_layers(db.opts);
  for (size_t i = 0; i < layers.size(); ++i) {
    const DiscriminatorLayer& l = layers[i];
    std::string key = "discriminator.layer" + std::to_string(i + 1);
    const Tensor& cur = t.val(x);
    int ho = ad::detail::conv_out_dim(cur.dim(2), kDiscriminatorKernel, l.stride, 1);
    int wo = ad::detail::conv_out_dim(cur.dim(3), kDiscriminatorKernel, l.stride, 1);
    require(ho >= 1 && wo >= 1, ErrorKind::shape,
            "discriminator: input too small for the patch stack");
    x = t.conv2d(x, db.at(key + ".weight"), db.at(key + ".bias"), l.stride, 1,
                 ad::Pad::zero);
    if (l.norm)
      x = t.instance_norm(x, db.at(key + ".norm_scale"),
                          db.at(key + ".norm_shift"));
    if (l.act) x = t.leaky_relu(x, kDiscriminatorLeakySlope);
  }
  return x;
}

/// Plain inference wrapper.
inline Tensor discriminate(const Tensor& image, const DomainLabel& label,
                           const DiscriminatorWeights& dw) {
  ad::Tape t;
  DiscriminatorBinding db = DiscriminatorBinding::bind(t, dw, false);
  return t.val(discriminate_forward(t, t.leaf(image), label, db));
}

}  // namespace edit
