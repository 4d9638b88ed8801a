#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "edit/autodiff.hpp"
#include "edit/core.hpp"
#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit {

// ---------------------------------------------------------------------------
// Dynamic-parameter bookkeeping
// ---------------------------------------------------------------------------

/// One convolution's worth of parameters inside the flat dynamic vector:
/// [flattened kernel, bias, norm scale, norm shift], in block order.
/// Residual blocks contribute two consecutive conv groups.
struct ConvSlice {
  int block_index = 0;
  int conv_in_block = 0;  // 0, or 1 for a resblock's second conv
  int64_t kernel_offset = 0;
  int64_t bias_offset = 0;
  int64_t scale_offset = -1;  // -1 when the conv carries no norm affine
  int64_t shift_offset = -1;
  int in_ch = 0, out_ch = 0, kernel = 0;
};

/// Contiguous span of one dynamic block inside the flat vector.
struct DynBlockSpan {
  int block_index = 0;
  int64_t offset = 0;
  int64_t length = 0;
};

struct DynamicLayout {
  std::vector<ConvSlice> convs;
  std::vector<DynBlockSpan> blocks;
  int64_t total = 0;
};

inline DynamicLayout dynamic_layout(const GeneratorSpec& spec) {
  DynamicLayout layout;
  int64_t off = 0;
  for (size_t bi = 0; bi < spec.blocks.size(); ++bi) {
    const BlockSpec& b = spec.blocks[bi];
    if (!b.dynamic) continue;
    int64_t block_start = off;
    const int convs_in_block = b.kind == BlockKind::resblock ? 2 : 1;
    for (int ci = 0; ci < convs_in_block; ++ci) {
      ConvSlice s;
      s.block_index = static_cast<int>(bi);
      s.conv_in_block = ci;
      // resblock interior convs run out_ch -> out_ch
      s.in_ch = (b.kind == BlockKind::resblock && ci == 1) ? b.out_ch : b.in_ch;
      s.out_ch = b.out_ch;
      s.kernel = b.kernel;
      s.kernel_offset = off;
      off += static_cast<int64_t>(s.kernel) * s.kernel * s.in_ch * s.out_ch;
      s.bias_offset = off;
      off += s.out_ch;
      if (b.norm == NormKind::instance) {
        s.scale_offset = off;
        off += s.out_ch;
        s.shift_offset = off;
        off += s.out_ch;
      }
      layout.convs.push_back(s);
    }
    layout.blocks.push_back(
        {static_cast<int>(bi), block_start, off - block_start});
  }
  layout.total = off;
  return layout;
}

/// Number of parameters the parameter network must emit for this spec.
inline int64_t param_count(const GeneratorSpec& spec) {
  return dynamic_layout(spec).total;
}

// ---------------------------------------------------------------------------
// Shared weights
// ---------------------------------------------------------------------------

struct SharedWeights {
  NamedTensors tensors;
};

namespace detail {

inline std::string block_key(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "generator.shared.%02d", index);
  return buf;
}

}  // namespace detail

/// Gaussian(0, 0.02) kernels, zero biases, identity norm affine.
inline SharedWeights init_shared_weights(const GeneratorSpec& spec, Rng& rng) {
  SharedWeights sw;
  for (size_t bi = 0; bi < spec.blocks.size(); ++bi) {
    const BlockSpec& b = spec.blocks[bi];
    if (b.dynamic) continue;
    std::string key = detail::block_key(static_cast<int>(bi));
    auto add_conv = [&](const std::string& suffix, int in_ch, int out_ch,
                        bool with_norm) {
      Tensor w({out_ch, in_ch, b.kernel, b.kernel});
      rng.fill_normal(w, 0.0, 0.02);
      sw.tensors[key + suffix + ".weight"] = std::move(w);
      sw.tensors[key + suffix + ".bias"] = Tensor::zeros({out_ch});
      if (with_norm) {
        sw.tensors[key + suffix + ".norm_scale"] = Tensor::full({out_ch}, 1.0);
        sw.tensors[key + suffix + ".norm_shift"] = Tensor::zeros({out_ch});
      }
    };
    if (b.kind == BlockKind::resblock) {
      add_conv(".conv1", b.in_ch, b.out_ch, b.norm == NormKind::instance);
      add_conv(".conv2", b.out_ch, b.out_ch, b.norm == NormKind::instance);
    } else {
      add_conv("", b.in_ch, b.out_ch, b.norm == NormKind::instance);
    }
  }
  return sw;
}

// ---------------------------------------------------------------------------
// Tape-level forward
// ---------------------------------------------------------------------------

/// Shared tensors registered as tape leaves for one graph build.
struct GeneratorBinding {
  std::map<std::string, ad::Var> vars;

  static GeneratorBinding bind(ad::Tape& tape, const SharedWeights& sw,
                               bool trainable) {
    GeneratorBinding gb;
    for (const auto& [name, tensor] : sw.tensors)
      gb.vars[name] = tape.leaf(tensor, trainable);
    return gb;
  }

  ad::Var at(const std::string& name) const {
    auto it = vars.find(name);
    require(it != vars.end(), ErrorKind::shape,
            "missing shared tensor: " + name);
    return it->second;
  }
};

namespace detail {

struct ConvParams {
  ad::Var weight, bias;
  ad::Var scale, shift;  // invalid when no norm affine
};

inline ad::Var apply_conv_in_act(ad::Tape& t, ad::Var x, const ConvParams& p,
                                 int stride, int pad, NormKind norm,
                                 ActKind act) {
  ad::Var y = t.conv2d(x, p.weight, p.bias, stride, pad, ad::Pad::reflect);
  if (norm == NormKind::instance) y = t.instance_norm(y, p.scale, p.shift);
  switch (act) {
    case ActKind::relu: y = t.relu(y); break;
    case ActKind::tanh: y = t.tanh_op(y); break;
    case ActKind::none: break;
  }
  return y;
}

/// Pull one conv group (kernel/bias/affine) out of the flat dynamic vector.
inline ConvParams slice_conv_params(ad::Tape& t, ad::Var flat,
                                    const ConvSlice& s, int64_t base) {
  ConvParams p;
  int64_t klen = static_cast<int64_t>(s.kernel) * s.kernel * s.in_ch * s.out_ch;
  p.weight = t.reshape(t.slice_flat(flat, s.kernel_offset - base, klen),
                       {s.out_ch, s.in_ch, s.kernel, s.kernel});
  p.bias = t.slice_flat(flat, s.bias_offset - base, s.out_ch);
  if (s.scale_offset >= 0) {
    p.scale = t.slice_flat(flat, s.scale_offset - base, s.out_ch);
    p.shift = t.slice_flat(flat, s.shift_offset - base, s.out_ch);
  }
  return p;
}

inline ad::Var apply_block(ad::Tape& t, ad::Var x, const BlockSpec& b,
                           const ConvParams& c1, const ConvParams& c2) {
  const int pad = (b.kernel - 1) / 2;
  switch (b.kind) {
    case BlockKind::conv:
    case BlockKind::output:
      return apply_conv_in_act(t, x, c1, b.stride, pad, b.norm, b.activation);
    case BlockKind::upconv: {
      ad::Var up = t.upsample_nearest2(x);
      return apply_conv_in_act(t, up, c1, 1, pad, b.norm, b.activation);
    }
    case BlockKind::resblock: {
      // conv+norm+relu, conv+norm, additive skip, no activation after the add
      ad::Var h = apply_conv_in_act(t, x, c1, 1, pad, b.norm, ActKind::relu);
      ad::Var h2 = apply_conv_in_act(t, h, c2, 1, pad, b.norm, ActKind::none);
      return t.add(x, h2);
    }
  }
  fail(ErrorKind::shape, "unreachable block kind");
}

}  // namespace detail

/// Run one block given its slice of a flat parameter vector. `flat_params`
/// must be exactly the block's span of the dynamic layout.
inline ad::Var functional_conv_block(ad::Tape& t, ad::Var x, ad::Var flat_params,
                                     const BlockSpec& block) {
  GeneratorSpec probe;
  probe.blocks = {block};
  probe.blocks[0].dynamic = true;
  DynamicLayout layout = dynamic_layout(probe);
  const Tensor& fp = t.val(flat_params);
  require(fp.numel() == layout.total, ErrorKind::shape,
          "functional_conv_block: expected " + std::to_string(layout.total) +
              " parameters, got " + std::to_string(fp.numel()));
  require(fp.all_finite(), ErrorKind::numeric,
          "functional_conv_block: non-finite parameters");
  detail::ConvParams c1 = detail::slice_conv_params(t, flat_params,
                                                    layout.convs[0], 0);
  detail::ConvParams c2;
  if (layout.convs.size() > 1)
    c2 = detail::slice_conv_params(t, flat_params, layout.convs[1], 0);
  return detail::apply_block(t, x, block, c1, c2);
}

/// Full generator pass: shared encoder/trunk plus dynamic decoder blocks
/// parameterized by the flat theta_p vector.
inline ad::Var generator_forward(ad::Tape& t, ad::Var image,
                                 const GeneratorSpec& spec,
                                 const GeneratorBinding& shared,
                                 ad::Var theta_p) {
  const Tensor& img = t.val(image);
  require(img.ndim() == 4, ErrorKind::shape, "generator: input must be NCHW");
  require(img.dim(1) == spec.input_channels(), ErrorKind::shape,
          "generator: input channel mismatch");
  require(img.dim(2) % 4 == 0 && img.dim(3) % 4 == 0, ErrorKind::shape,
          "generator: input H and W must be multiples of 4");
  DynamicLayout layout = dynamic_layout(spec);
  require(t.val(theta_p).numel() == layout.total, ErrorKind::shape,
          "generator: dynamic parameter vector has " +
              std::to_string(t.val(theta_p).numel()) + " entries, expected " +
              std::to_string(layout.total));
  require(t.val(theta_p).all_finite(), ErrorKind::numeric,
          "generator: non-finite dynamic parameters");

  size_t next_conv = 0;
  ad::Var x = image;
  for (size_t bi = 0; bi < spec.blocks.size(); ++bi) {
    const BlockSpec& b = spec.blocks[bi];
    detail::ConvParams c1, c2;
    if (b.dynamic) {
      c1 = detail::slice_conv_params(t, theta_p, layout.convs[next_conv++], 0);
      if (b.kind == BlockKind::resblock)
        c2 = detail::slice_conv_params(t, theta_p, layout.convs[next_conv++], 0);
    } else {
      std::string key = detail::block_key(static_cast<int>(bi));
      auto load = [&](const std::string& suffix) {
        detail::ConvParams p;
        p.weight = shared.at(key + suffix + ".weight");
        p.bias = shared.at(key + suffix + ".bias");
        if (b.norm == NormKind::instance) {
          p.scale = shared.at(key + suffix + ".norm_scale");
          p.shift = shared.at(key + suffix + ".norm_shift");
        }
        return p;
      };
      if (b.kind == BlockKind::resblock) {
        c1 = load(".conv1");
        c2 = load(".conv2");
      } else {
        c1 = load("");
      }
    }
    x = detail::apply_block(t, x, b, c1, c2);
  }
  return x;
}

/// Inference entry point: deterministic, pure, no gradient bookkeeping kept.
inline Tensor generator_apply(const Tensor& image, const GeneratorSpec& spec,
                              const SharedWeights& shared,
                              const Tensor& theta_p) {
  ad::Tape t;
  GeneratorBinding gb = GeneratorBinding::bind(t, shared, false);
  ad::Var out = generator_forward(t, t.leaf(image), spec, gb, t.leaf(theta_p));
  return t.val(out);
}

}  // namespace edit
