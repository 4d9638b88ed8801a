#pragma once

#include <string>
#include <vector>

#include "edit/autodiff.hpp"
#include "edit/core.hpp"
#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit {

// Fixed feature extractor: five 3x3 conv+ReLU stages with deterministic
// seeded weights, never trained. It feeds both the parameter network (last
// tap, pooled) and the style statistics (all five taps). A weight file in
// the tensor-container format can replace the seeded weights.

constexpr int kBackboneNumTaps = 5;
constexpr int kBackboneChannels[kBackboneNumTaps] = {16, 32, 64, 64, 128};
constexpr int kBackboneStrides[kBackboneNumTaps] = {1, 2, 2, 1, 2};
constexpr int kBackboneFeatureDim = 128;  // channels of the last tap
constexpr uint64_t kBackboneSeed = 0x0edb5eedULL;

inline std::string backbone_tensor_name(int conv, const char* kind) {
  return "param_net.backbone.conv" + std::to_string(conv + 1) + "." + kind;
}

/// He-initialized from the fixed seed; independent of any run configuration.
inline NamedTensors init_backbone_tensors() {
  NamedTensors out;
  Rng rng(kBackboneSeed);
  int in_ch = 3;
  for (int i = 0; i < kBackboneNumTaps; ++i) {
    int out_ch = kBackboneChannels[i];
    Tensor w({out_ch, in_ch, 3, 3});
    rng.fill_normal(w, 0.0, std::sqrt(2.0 / (9.0 * in_ch)));
    out[backbone_tensor_name(i, "weight")] = std::move(w);
    out[backbone_tensor_name(i, "bias")] = Tensor::zeros({out_ch});
    in_ch = out_ch;
  }
  return out;
}

/// Validate a replacement weight set (shapes must match the fixed stack).
inline void validate_backbone_tensors(const NamedTensors& tensors) {
  int in_ch = 3;
  for (int i = 0; i < kBackboneNumTaps; ++i) {
    int out_ch = kBackboneChannels[i];
    auto wit = tensors.find(backbone_tensor_name(i, "weight"));
    auto bit = tensors.find(backbone_tensor_name(i, "bias"));
    require(wit != tensors.end() && bit != tensors.end(), ErrorKind::format,
            "backbone weights missing conv" + std::to_string(i + 1));
    require(wit->second.shape == std::vector<int>({out_ch, in_ch, 3, 3}),
            ErrorKind::shape,
            "backbone conv" + std::to_string(i + 1) + " kernel shape mismatch");
    require(bit->second.shape == std::vector<int>({out_ch}), ErrorKind::shape,
            "backbone conv" + std::to_string(i + 1) + " bias shape mismatch");
    in_ch = out_ch;
  }
}

struct BackboneBinding {
  std::vector<ad::Var> weights, biases;

  /// Backbone leaves are always frozen; gradients flow through the
  /// activations but never into these tensors.
  static BackboneBinding bind(ad::Tape& tape, const NamedTensors& tensors) {
    BackboneBinding bb;
    for (int i = 0; i < kBackboneNumTaps; ++i) {
      bb.weights.push_back(
          tape.leaf(tensors.at(backbone_tensor_name(i, "weight")), false));
      bb.biases.push_back(
          tape.leaf(tensors.at(backbone_tensor_name(i, "bias")), false));
    }
    return bb;
  }
};

/// All five post-ReLU activation maps.
inline std::vector<ad::Var> backbone_taps(ad::Tape& t, ad::Var image,
                                          const BackboneBinding& bb) {
  std::vector<ad::Var> taps;
  ad::Var x = image;
  for (int i = 0; i < kBackboneNumTaps; ++i) {
    x = t.conv2d(x, bb.weights[static_cast<size_t>(i)],
                 bb.biases[static_cast<size_t>(i)], kBackboneStrides[i], 1,
                 ad::Pad::zero);
    x = t.relu(x);
    taps.push_back(x);
  }
  return taps;
}

}  // namespace edit
