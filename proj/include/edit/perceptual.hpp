#pragma once

#include <functional>
#include <vector>

#include "edit/autodiff.hpp"
#include "edit/backbone.hpp"
#include "edit/core.hpp"
#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit {

// Feature-statistics kernels shared by the style loss and the evaluation
// metrics: tapped activations, per-channel mean/std, Gram matrices.

struct FeatureStack {
  std::vector<Tensor> layers;  // each [N, M_l, H_l, W_l]
};

struct ChannelStats {
  std::vector<Tensor> mean;   // per layer [N, M_l]
  std::vector<Tensor> stdev;  // per layer [N, M_l]
};

/// Anything that maps an image batch to a feature stack; tests inject
/// synthetic extractors through this to probe the metric formulas.
using FeatureExtractor = std::function<FeatureStack(const Tensor&)>;

/// Activations of the fixed backbone at the configured tap points.
inline FeatureStack extract(const Tensor& image, const NamedTensors& backbone,
                            const std::vector<int>& style_layers) {
  ad::Tape t;
  BackboneBinding bb = BackboneBinding::bind(t, backbone);
  std::vector<ad::Var> taps = backbone_taps(t, t.leaf(image), bb);
  FeatureStack fs;
  for (int l : style_layers) {
    require(l >= 0 && l < static_cast<int>(taps.size()), ErrorKind::domain,
            "style layer index out of range");
    fs.layers.push_back(t.val(taps[static_cast<size_t>(l)]));
  }
  return fs;
}

inline FeatureExtractor make_extractor(const NamedTensors& backbone,
                                       std::vector<int> style_layers) {
  return [backbone, style_layers](const Tensor& image) {
    return extract(image, backbone, style_layers);
  };
}

/// Spatial mean and population standard deviation per channel.
inline ChannelStats channel_stats(const FeatureStack& fs) {
  ChannelStats cs;
  for (const Tensor& f : fs.layers) {
    require(f.ndim() == 4, ErrorKind::shape, "channel_stats: want NCHW");
    const int n = f.dim(0), c = f.dim(1);
    const int64_t m = static_cast<int64_t>(f.dim(2)) * f.dim(3);
    Tensor mu({n, c}), sd({n, c});
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic) {
        const double* p = f.data.data() + (static_cast<int64_t>(in) * c + ic) * m;
        double mean = 0.0;
        for (int64_t i = 0; i < m; ++i) mean += p[i];
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; ++i) {
          double d = p[i] - mean;
          var += d * d;
        }
        var /= static_cast<double>(m);
        mu[static_cast<int64_t>(in) * c + ic] = mean;
        sd[static_cast<int64_t>(in) * c + ic] = std::sqrt(var);
      }
    cs.mean.push_back(std::move(mu));
    cs.stdev.push_back(std::move(sd));
  }
  return cs;
}

/// Unnormalized Gram matrix F F^T of one single-sample layer tensor,
/// F = [M_l, H_l*W_l]. Normalization lives in the style-error formula.
inline Tensor gram(const Tensor& layer) {
  require(layer.ndim() == 4 && layer.dim(0) == 1, ErrorKind::shape,
          "gram: want a single-sample [1,C,H,W] tensor");
  const int c = layer.dim(1);
  const int64_t m = static_cast<int64_t>(layer.dim(2)) * layer.dim(3);
  Tensor g({c, c});
  ad::CMapMat f(layer.data.data(), c, m);
  ad::MapMat gm(g.data.data(), c, c);
  gm.noalias() = f * f.transpose();
  return g;
}

}  // namespace edit
