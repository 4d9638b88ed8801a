#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "edit/autodiff.hpp"
#include "edit/errors.hpp"
#include "edit/perceptual.hpp"
#include "edit/tensor.hpp"

namespace edit {

// Training losses. Every reduction is a mean (over batch, pixels, patches)
// so the loss weights stay scale-free across image sizes. The generator uses
// the non-saturating objective -log D(fake); kSaturatingGeneratorLoss
// switches back to the literal log(1 - D(fake)) form.

struct LossReport {
  double cyc = 0.0;
  double sty = 0.0;
  double adv_d = 0.0;
  double adv_g = 0.0;
  double total = 0.0;
};

inline constexpr bool kSaturatingGeneratorLoss = false;

// ---- plain scalar versions ----

/// Mean-reduced L1 over both cycle pairs.
inline double cycle_loss(const Tensor& x_cycled, const Tensor& x,
                         const Tensor& y_cycled, const Tensor& y) {
  require(x_cycled.same_shape(x) && y_cycled.same_shape(y), ErrorKind::shape,
          "cycle_loss: shape mismatch");
  auto l1 = [](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
      s += std::fabs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.numel());
  };
  return l1(x_cycled, x) + l1(y_cycled, y);
}

/// One direction of the statistics-matching style loss:
/// sum_l sum_m [(mu_g - mu_r)^2 + (sd_g - sd_r)^2] / (N_L * M_l),
/// averaged over the batch dimension.
inline double style_loss(const ChannelStats& gen, const ChannelStats& ref) {
  require(gen.mean.size() == ref.mean.size(), ErrorKind::shape,
          "style_loss: layer count mismatch");
  const double nl = static_cast<double>(gen.mean.size());
  double total = 0.0;
  for (size_t l = 0; l < gen.mean.size(); ++l) {
    const Tensor& mg = gen.mean[l];
    const Tensor& mr = ref.mean[l];
    require(mg.same_shape(mr) && gen.stdev[l].same_shape(ref.stdev[l]),
            ErrorKind::shape, "style_loss: channel layout mismatch");
    const int n = mg.dim(0), c = mg.dim(1);
    double acc = 0.0;
    for (int64_t i = 0; i < mg.numel(); ++i) {
      double dm = mg[i] - mr[i];
      double ds = gen.stdev[l][i] - ref.stdev[l][i];
      acc += dm * dm + ds * ds;
    }
    total += acc / (nl * c * n);
  }
  return total;
}

namespace detail {

inline double mean_log_sig(const Tensor& logits) {
  double s = 0.0;
  for (double l : logits.data) {
    double p = std::clamp(1.0 / (1.0 + std::exp(-l)), ad::Tape::kProbEps,
                          1.0 - ad::Tape::kProbEps);
    s += std::log(p);
  }
  return s / static_cast<double>(logits.numel());
}

inline double mean_log_one_minus_sig(const Tensor& logits) {
  double s = 0.0;
  for (double l : logits.data) {
    double q = std::clamp(1.0 - 1.0 / (1.0 + std::exp(-l)), ad::Tape::kProbEps,
                          1.0 - ad::Tape::kProbEps);
    s += std::log(q);
  }
  return s / static_cast<double>(logits.numel());
}

}  // namespace detail

/// Standard GAN objective over the four logit sets of one iteration.
/// adv_d is what the discriminator minimizes; adv_g is the generator side
/// (non-saturating by default). Callers feed buffered fakes for adv_d and
/// fresh fakes for adv_g.
inline std::pair<double, double> adversarial_losses(const Tensor& logits_real_x,
                                                    const Tensor& logits_fake_in_y,
                                                    const Tensor& logits_real_y,
                                                    const Tensor& logits_fake_in_x) {
  double adv_d = -(detail::mean_log_sig(logits_real_x) +
                   detail::mean_log_one_minus_sig(logits_fake_in_y) +
                   detail::mean_log_sig(logits_real_y) +
                   detail::mean_log_one_minus_sig(logits_fake_in_x));
  double adv_g;
  if (kSaturatingGeneratorLoss)
    adv_g = detail::mean_log_one_minus_sig(logits_fake_in_y) +
            detail::mean_log_one_minus_sig(logits_fake_in_x);
  else
    adv_g = -(detail::mean_log_sig(logits_fake_in_y) +
              detail::mean_log_sig(logits_fake_in_x));
  return {adv_d, adv_g};
}

inline double total_loss(double adv_g, double cyc, double sty, double lambda,
                         double eta) {
  return adv_g + lambda * cyc + eta * sty;
}

// ---- tape versions (used by the trainer) ----

inline ad::Var l1_mean_op(ad::Tape& t, ad::Var a, ad::Var b) {
  return t.mean_all(t.abs_op(t.sub(a, b)));
}

inline ad::Var cycle_loss_op(ad::Tape& t, ad::Var x_cycled, ad::Var x,
                             ad::Var y_cycled, ad::Var y) {
  return t.add(l1_mean_op(t, x_cycled, x), l1_mean_op(t, y_cycled, y));
}

/// One direction over tapped features of the generated and reference images.
inline ad::Var style_loss_op(ad::Tape& t, const std::vector<ad::Var>& taps_gen,
                             const std::vector<ad::Var>& taps_ref) {
  require(taps_gen.size() == taps_ref.size() && !taps_gen.empty(),
          ErrorKind::shape, "style_loss_op: tap mismatch");
  const double nl = static_cast<double>(taps_gen.size());
  std::vector<ad::Var> terms;
  for (size_t l = 0; l < taps_gen.size(); ++l) {
    const Tensor& f = t.val(taps_gen[l]);
    const int n = f.dim(0), c = f.dim(1);
    ad::Var dm = t.sub(t.channel_mean(taps_gen[l]), t.channel_mean(taps_ref[l]));
    ad::Var ds = t.sub(t.channel_std(taps_gen[l]), t.channel_std(taps_ref[l]));
    ad::Var sum = t.add(t.sum_all(t.square(dm)), t.sum_all(t.square(ds)));
    terms.push_back(t.scale(sum, 1.0 / (nl * c * n)));
  }
  return t.add_many(terms);
}

inline ad::Var adv_g_op(ad::Tape& t, ad::Var logits_fake_in_y,
                        ad::Var logits_fake_in_x) {
  if (kSaturatingGeneratorLoss)
    return t.add(t.mean_log_one_minus_sigmoid(logits_fake_in_y),
                 t.mean_log_one_minus_sigmoid(logits_fake_in_x));
  return t.scale(t.add(t.mean_log_sigmoid(logits_fake_in_y),
                       t.mean_log_sigmoid(logits_fake_in_x)),
                 -1.0);
}

inline ad::Var adv_d_op(ad::Tape& t, ad::Var logits_real_x,
                        ad::Var logits_fake_in_y, ad::Var logits_real_y,
                        ad::Var logits_fake_in_x) {
  return t.scale(
      t.add_many({t.mean_log_sigmoid(logits_real_x),
                  t.mean_log_one_minus_sigmoid(logits_fake_in_y),
                  t.mean_log_sigmoid(logits_real_y),
                  t.mean_log_one_minus_sigmoid(logits_fake_in_x)}),
      -1.0);
}

}  // namespace edit
