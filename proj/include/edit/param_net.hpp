#pragma once

#include <set>
#include <string>
#include <vector>

#include "edit/autodiff.hpp"
#include "edit/backbone.hpp"
#include "edit/core.hpp"
#include "edit/errors.hpp"
#include "edit/generator.hpp"
#include "edit/tensor.hpp"

namespace edit {

// The exemplar-domain aware parameter network: a frozen backbone, one fully
// connected layer from [pooled features ++ one-hot] to a style embedding,
// and one independent head per dynamic generator block emitting that block's
// slice of the flat parameter vector.

struct ParamNetWeights {
  NamedTensors tensors;
  std::set<std::string> frozen;  // backbone tensor names
  int embed_dim = 128;
  int num_domains = 2;

  bool is_frozen(const std::string& name) const {
    return frozen.count(name) > 0;
  }
};

namespace detail {

inline std::string head_key(int block_index) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "param_net.head.%02d", block_index);
  return buf;
}

}  // namespace detail

/// Head biases start each dynamic conv near a Gaussian(0, 0.02) kernel with
/// identity norm affine, so an untrained parameter network already drives
/// the generator into a sane regime. Head weights are Gaussian(0, 1e-3).
inline ParamNetWeights init_param_net(const GeneratorSpec& spec, int embed_dim,
                                      int num_domains, Rng& rng) {
  ParamNetWeights pw;
  pw.embed_dim = embed_dim;
  pw.num_domains = num_domains;

  pw.tensors = init_backbone_tensors();
  for (const auto& [name, _] : pw.tensors) pw.frozen.insert(name);

  Tensor fc_w({embed_dim, kBackboneFeatureDim + num_domains});
  rng.fill_normal(fc_w, 0.0, 0.02);
  pw.tensors["param_net.fc.weight"] = std::move(fc_w);
  pw.tensors["param_net.fc.bias"] = Tensor::zeros({embed_dim});

  DynamicLayout layout = dynamic_layout(spec);
  for (const DynBlockSpan& span : layout.blocks) {
    std::string key = detail::head_key(span.block_index);
    Tensor w({static_cast<int>(span.length), embed_dim});
    rng.fill_normal(w, 0.0, 1e-3);
    pw.tensors[key + ".weight"] = std::move(w);

    Tensor b({static_cast<int>(span.length)});
    for (const ConvSlice& s : layout.convs) {
      if (s.block_index != span.block_index) continue;
      int64_t klen =
          static_cast<int64_t>(s.kernel) * s.kernel * s.in_ch * s.out_ch;
      for (int64_t i = 0; i < klen; ++i)
        b[s.kernel_offset - span.offset + i] = rng.normal(0.0, 0.02);
      // conv bias entries stay 0
      if (s.scale_offset >= 0)
        for (int64_t i = 0; i < s.out_ch; ++i)
          b[s.scale_offset - span.offset + i] = 1.0;
      // shift entries stay 0
    }
    pw.tensors[key + ".bias"] = std::move(b);
  }
  return pw;
}

struct ParamNetBinding {
  BackboneBinding backbone;
  ad::Var fc_weight, fc_bias;
  std::vector<std::pair<int, std::pair<ad::Var, ad::Var>>> heads;  // block -> (w, b)
  std::map<std::string, ad::Var> vars;  // every tensor, frozen ones included

  static ParamNetBinding bind(ad::Tape& tape, const ParamNetWeights& pw,
                              bool trainable) {
    ParamNetBinding pb;
    pb.backbone = BackboneBinding::bind(tape, pw.tensors);
    for (int conv = 0; conv < kBackboneNumTaps; ++conv) {
      pb.vars[backbone_tensor_name(conv, "weight")] =
          pb.backbone.weights[static_cast<size_t>(conv)];
      pb.vars[backbone_tensor_name(conv, "bias")] =
          pb.backbone.biases[static_cast<size_t>(conv)];
    }
    pb.fc_weight = tape.leaf(pw.tensors.at("param_net.fc.weight"), trainable);
    pb.fc_bias = tape.leaf(pw.tensors.at("param_net.fc.bias"), trainable);
    pb.vars["param_net.fc.weight"] = pb.fc_weight;
    pb.vars["param_net.fc.bias"] = pb.fc_bias;
    for (const auto& [name, tensor] : pw.tensors) {
      if (name.rfind("param_net.head.", 0) != 0) continue;
      if (name.size() < 8 || name.substr(name.size() - 7) != ".weight") continue;
      int block = std::stoi(name.substr(15, 2));
      ad::Var w = tape.leaf(tensor, trainable);
      ad::Var b = tape.leaf(
          pw.tensors.at(detail::head_key(block) + ".bias"), trainable);
      pb.vars[name] = w;
      pb.vars[detail::head_key(block) + ".bias"] = b;
      pb.heads.emplace_back(block, std::make_pair(w, b));
    }
    return pb;
  }
};

/// Style embedding: FC([global-pooled backbone features ++ one-hot label]).
inline ad::Var embed_forward(ad::Tape& t, ad::Var exemplar,
                             const DomainLabel& label,
                             const ParamNetBinding& pb, int num_domains) {
  require(label.num_domains() == num_domains, ErrorKind::shape,
          "embed: label has " + std::to_string(label.num_domains()) +
              " domains, expected " + std::to_string(num_domains));
  std::vector<ad::Var> taps = backbone_taps(t, exemplar, pb.backbone);
  ad::Var pooled = t.global_avg_pool(taps.back());
  ad::Var joined = t.concat_cols_const(pooled, label.onehot);
  return t.linear(joined, pb.fc_weight, pb.fc_bias);
}

/// Flat dynamic parameter vector for a single exemplar ([1,3,H,W] input).
inline ad::Var generate_params_forward(ad::Tape& t, ad::Var exemplar,
                                       const DomainLabel& label,
                                       const ParamNetBinding& pb,
                                       const GeneratorSpec& spec,
                                       int num_domains) {
  require(t.val(exemplar).dim(0) == 1, ErrorKind::shape,
          "generate_params: one exemplar at a time");
  ad::Var emb = embed_forward(t, exemplar, label, pb, num_domains);
  DynamicLayout layout = dynamic_layout(spec);
  require(pb.heads.size() == layout.blocks.size(), ErrorKind::shape,
          "parameter network heads do not match the generator spec");
  std::vector<ad::Var> parts;
  for (size_t i = 0; i < layout.blocks.size(); ++i) {
    const auto& [block, wb] = pb.heads[i];
    require(block == layout.blocks[i].block_index, ErrorKind::shape,
            "parameter network head order mismatch");
    ad::Var slice = t.linear(emb, wb.first, wb.second);  // [1, span]
    parts.push_back(
        t.reshape(slice, {static_cast<int>(layout.blocks[i].length)}));
  }
  return t.concat_flat(parts);
}

// ---- plain (inference) wrappers ----

inline Tensor embed(const Tensor& exemplar, const DomainLabel& label,
                    const ParamNetWeights& pw) {
  ad::Tape t;
  ParamNetBinding pb = ParamNetBinding::bind(t, pw, false);
  return t.val(
      embed_forward(t, t.leaf(exemplar), label, pb, pw.num_domains));
}

inline Tensor generate_params(const Tensor& exemplar, const DomainLabel& label,
                              const ParamNetWeights& pw,
                              const GeneratorSpec& spec) {
  ad::Tape t;
  ParamNetBinding pb = ParamNetBinding::bind(t, pw, false);
  return t.val(generate_params_forward(t, t.leaf(exemplar), label, pb, spec,
                                       pw.num_domains));
}

/// Linear blend of two generated parameter vectors. Endpoints return exact
/// copies so interpolation sweeps are bitwise-stable at alpha 0 and 1.
inline Tensor interpolate(const Tensor& theta_a, const Tensor& theta_b,
                          double alpha, bool allow_extrapolation = false) {
  require(theta_a.numel() == theta_b.numel(), ErrorKind::shape,
          "interpolate: parameter vectors differ in length");
  if (!allow_extrapolation)
    require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::domain,
            "interpolate: alpha outside [0, 1] (pass allow_extrapolation)");
  if (alpha == 0.0) return theta_a;
  if (alpha == 1.0) return theta_b;
  Tensor out(theta_a.shape);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (1.0 - alpha) * theta_a.data[i] + alpha * theta_b.data[i];
  return out;
}

}  // namespace edit
