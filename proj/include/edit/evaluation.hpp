#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "edit/core.hpp"
#include "edit/data.hpp"
#include "edit/errors.hpp"
#include "edit/generator.hpp"
#include "edit/param_net.hpp"
#include "edit/perceptual.hpp"
#include "edit/tensor.hpp"
#include "edit/trainer.hpp"

namespace edit {

// Quantitative metrics: feature-space content error, Gram-matrix style
// error, parameter counting, and inference timing.

struct EvalReport {
  double content_mean = 0.0, content_std = 0.0;
  double style_mean = 0.0, style_std = 0.0;
  int64_t shared_param_count = 0;
  int64_t dynamic_param_count = 0;
  int64_t paramnet_param_count = 0;
  double ms_per_image = 0.0;
  int image_size = 0;
  int num_images = 0;
  std::string hardware_note;
};

/// L2 distance between single-layer feature maps of the two images.
inline double content_error(const Tensor& input, const Tensor& output,
                            const FeatureExtractor& extract_features,
                            int layer_position = 0) {
  FeatureStack fa = extract_features(input);
  FeatureStack fb = extract_features(output);
  require(layer_position >= 0 &&
              layer_position < static_cast<int>(fa.layers.size()),
          ErrorKind::domain, "content_error: layer position out of range");
  const Tensor& a = fa.layers[static_cast<size_t>(layer_position)];
  const Tensor& b = fb.layers[static_cast<size_t>(layer_position)];
  require(a.same_shape(b), ErrorKind::shape,
          "content_error: feature shapes differ");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Mean over layers of ||Gram_l(exemplar) - Gram_l(output)||_F^2 scaled by
/// 1 / (4 M_l^2 H_l^2 W_l^2).
inline double style_error(const Tensor& output, const Tensor& exemplar,
                          const FeatureExtractor& extract_features) {
  FeatureStack fo = extract_features(output);
  FeatureStack fe = extract_features(exemplar);
  require(fo.layers.size() == fe.layers.size() && !fo.layers.empty(),
          ErrorKind::shape, "style_error: layer count mismatch");
  double total = 0.0;
  for (size_t l = 0; l < fo.layers.size(); ++l) {
    const Tensor& a = fo.layers[l];
    const Tensor& b = fe.layers[l];
    require(a.dim(1) == b.dim(1), ErrorKind::shape,
            "style_error: channel count mismatch");
    Tensor ga = gram(a);
    Tensor gb = gram(b);
    double m = static_cast<double>(a.dim(1));
    double ha = static_cast<double>(a.dim(2)), wa = static_cast<double>(a.dim(3));
    double frob2 = 0.0;
    for (size_t i = 0; i < ga.data.size(); ++i) {
      double d = gb.data[i] - ga.data[i];
      frob2 += d * d;
    }
    total += frob2 / (4.0 * m * m * ha * ha * wa * wa);
  }
  return total / static_cast<double>(fo.layers.size());
}

// ---- parameter counting ----

inline int64_t count_shared_params(const GeneratorSpec& spec) {
  int64_t total = 0;
  for (const BlockSpec& b : spec.blocks) {
    if (b.dynamic) continue;
    const int convs = b.kind == BlockKind::resblock ? 2 : 1;
    for (int ci = 0; ci < convs; ++ci) {
      int in_ch = (b.kind == BlockKind::resblock && ci == 1) ? b.out_ch : b.in_ch;
      total += static_cast<int64_t>(b.kernel) * b.kernel * in_ch * b.out_ch +
               b.out_ch;
      if (b.norm == NormKind::instance) total += 2 * b.out_ch;
    }
  }
  return total;
}

inline int64_t count_paramnet_params(const GeneratorSpec& spec, int embed_dim,
                                     int num_domains) {
  int64_t total = 0;
  // fixed backbone
  int in_ch = 3;
  for (int i = 0; i < kBackboneNumTaps; ++i) {
    total += static_cast<int64_t>(9) * in_ch * kBackboneChannels[i] +
             kBackboneChannels[i];
    in_ch = kBackboneChannels[i];
  }
  // shared FC
  total += static_cast<int64_t>(embed_dim) * (kBackboneFeatureDim + num_domains) +
           embed_dim;
  // per-block heads
  for (const DynBlockSpan& span : dynamic_layout(spec).blocks)
    total += span.length * embed_dim + span.length;
  return total;
}

/// Exact element counts of theta_s, theta_p, and psi in a live state.
struct ParamCounts {
  int64_t shared = 0, dynamic = 0, paramnet = 0;
};

inline ParamCounts count_params(const TrainState& st) {
  ParamCounts c;
  for (const auto& [name, t] : st.shared.tensors) c.shared += t.numel();
  c.dynamic = param_count(st.spec);
  for (const auto& [name, t] : st.pnet.tensors) c.paramnet += t.numel();
  return c;
}

// ---- full evaluation pass ----

struct EvalOptions {
  int content_layer_position = 2;  // third tap unless configured otherwise
  int max_exemplars = 10;
  int timing_calls = 30;
};

/// Translate every source-domain image with a fixed set of target-domain
/// exemplars; aggregate the content error against the input and the style
/// error against the conditioning exemplar.
inline EvalReport evaluate_pair(const TrainState& st,
                                const TrainingDomain& source,
                                const TrainingDomain& target,
                                const EvalOptions& opts = {}) {
  FeatureExtractor fx =
      make_extractor(st.pnet.tensors, st.config.style_layers);
  Rng rng(st.config.seed);

  const int n_ex = std::min(opts.max_exemplars, target.count);
  std::vector<Tensor> thetas;
  std::vector<Tensor> exemplars;
  for (int e = 0; e < n_ex; ++e) {
    Tensor ex = target.batch({e}, false, rng);
    exemplars.push_back(ex);
    thetas.push_back(generate_params(ex, target.label, st.pnet, st.spec));
  }

  std::vector<double> cerr, serr;
  for (int i = 0; i < source.count; ++i) {
    Tensor input = source.batch({i}, false, rng);
    for (int e = 0; e < n_ex; ++e) {
      Tensor out = generator_apply(input, st.spec, st.shared, thetas[e]);
      cerr.push_back(content_error(input, out, fx,
                                   opts.content_layer_position));
      serr.push_back(style_error(out, exemplars[static_cast<size_t>(e)], fx));
    }
  }

  auto mean_std = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::make_pair(mean, std::sqrt(var));
  };

  EvalReport rep;
  std::tie(rep.content_mean, rep.content_std) = mean_std(cerr);
  std::tie(rep.style_mean, rep.style_std) = mean_std(serr);
  ParamCounts counts = count_params(st);
  rep.shared_param_count = counts.shared;
  rep.dynamic_param_count = counts.dynamic;
  rep.paramnet_param_count = counts.paramnet;
  rep.image_size = st.config.image_size;
  rep.num_images = static_cast<int>(cerr.size());
  rep.hardware_note = "single CPU core, 64-bit floats";

  // median wall time over warm inference calls
  {
    Tensor input = source.batch({0}, false, rng);
    Tensor warm = generator_apply(input, st.spec, st.shared, thetas[0]);
    (void)warm;
    std::vector<double> times;
    for (int i = 0; i < std::max(30, opts.timing_calls); ++i) {
      auto t0 = std::chrono::steady_clock::now();
      Tensor out = generator_apply(input, st.spec, st.shared,
                                   thetas[static_cast<size_t>(i) % thetas.size()]);
      auto t1 = std::chrono::steady_clock::now();
      times.push_back(
          std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    rep.ms_per_image = times[times.size() / 2];
  }
  return rep;
}

inline std::string eval_report_text(const EvalReport& r) {
  char buf[768];
  std::snprintf(
      buf, sizeof(buf),
      "translation quality (%d translated images at %dx%d)\n"
      "  content error : %.6g +/- %.6g\n"
      "  style error   : %.6g +/- %.6g\n"
      "model size (parameter elements)\n"
      "  shared (theta_s)    : %lld\n"
      "  dynamic (theta_p)   : %lld\n"
      "  param net (psi)     : %lld\n"
      "timing\n"
      "  median ms/image     : %.3f  (%s)\n",
      r.num_images, r.image_size, r.image_size, r.content_mean, r.content_std,
      r.style_mean, r.style_std, static_cast<long long>(r.shared_param_count),
      static_cast<long long>(r.dynamic_param_count),
      static_cast<long long>(r.paramnet_param_count), r.ms_per_image,
      r.hardware_note.c_str());
  return buf;
}

inline std::string eval_report_kv(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "content_error_mean=%.10g\ncontent_error_std=%.10g\n"
                "style_error_mean=%.10g\nstyle_error_std=%.10g\n"
                "shared_param_count=%lld\ndynamic_param_count=%lld\n"
                "paramnet_param_count=%lld\nms_per_image=%.6g\n"
                "image_size=%d\nnum_images=%d\n",
                r.content_mean, r.content_std, r.style_mean, r.style_std,
                static_cast<long long>(r.shared_param_count),
                static_cast<long long>(r.dynamic_param_count),
                static_cast<long long>(r.paramnet_param_count), r.ms_per_image,
                r.image_size, r.num_images);
  return buf;
}

}  // namespace edit
