#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "edit/checkpoint.hpp"
#include "edit/core.hpp"
#include "edit/data.hpp"
#include "edit/discriminator.hpp"
#include "edit/generator.hpp"
#include "edit/image_io.hpp"
#include "edit/losses.hpp"
#include "edit/param_net.hpp"
#include "edit/perceptual.hpp"
#include "edit/tensor.hpp"

namespace edit {

// ---------------------------------------------------------------------------
// Replay buffer of historic fakes
// ---------------------------------------------------------------------------

/// Below capacity: store and return the fresh image. At capacity: with
/// probability 0.5 swap the fresh image against a uniformly chosen stored
/// one and return the old image, otherwise return the fresh one.
struct ReplayBuffer {
  int capacity = 50;
  std::vector<Tensor> storage;

  Tensor query(const Tensor& fresh, Rng& rng) {
    if (static_cast<int>(storage.size()) < capacity) {
      storage.push_back(fresh);
      return fresh;
    }
    if (rng.bernoulli(0.5)) {
      int j = rng.uniform_int(0, capacity - 1);
      Tensor old = std::move(storage[static_cast<size_t>(j)]);
      storage[static_cast<size_t>(j)] = fresh;
      return old;
    }
    return fresh;
  }
};

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct LRSchedule {
  double base_lr = 0.001;
  int total_epochs = 100;
  int decay_start_epoch = 50;
};

/// Constant until decay starts, then linear to 0 at total_epochs.
inline double lr_at(const LRSchedule& s, int epoch) {
  require(epoch >= 0 && epoch <= s.total_epochs, ErrorKind::domain,
          "lr_at: epoch outside [0, total_epochs]");
  if (epoch < s.decay_start_epoch) return s.base_lr;
  if (s.total_epochs == s.decay_start_epoch)
    return epoch == s.total_epochs ? 0.0 : s.base_lr;
  return s.base_lr * static_cast<double>(s.total_epochs - epoch) /
         static_cast<double>(s.total_epochs - s.decay_start_epoch);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  NamedTensors m, v;
  int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam step over the named parameters whose gradients are supplied.
/// Returns the global gradient L2 norm (pre-clip) for diagnostics.
inline double adam_step(AdamState& opt,
                        const std::map<std::string, Tensor*>& params,
                        const std::map<std::string, const Tensor*>& grads,
                        double lr, double clip = 0.0) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g->data) sq += v * v;
  double norm = std::sqrt(sq);
  require(std::isfinite(norm), ErrorKind::numeric,
          "non-finite gradients in optimizer step");
  double scale = 1.0;
  if (clip > 0.0 && norm > clip) scale = clip / norm;

  opt.t += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
  for (const auto& [name, g] : grads) {
    Tensor& p = *params.at(name);
    Tensor& m = opt.m.try_emplace(name, Tensor(p.shape)).first->second;
    Tensor& v = opt.v.try_emplace(name, Tensor(p.shape)).first->second;
    for (size_t i = 0; i < p.data.size(); ++i) {
      double gi = g->data[i] * scale;
      m.data[i] = opt.beta1 * m.data[i] + (1.0 - opt.beta1) * gi;
      v.data[i] = opt.beta2 * v.data[i] + (1.0 - opt.beta2) * gi * gi;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training state
// ---------------------------------------------------------------------------

struct TrainState {
  Config config;
  GeneratorSpec spec;
  SharedWeights shared;
  ParamNetWeights pnet;
  DiscriminatorWeights disc;
  AdamState opt_g, opt_d;
  std::vector<ReplayBuffer> buffers;  // one per domain
  int64_t step = 0;
};

inline TrainState init_train_state(const Config& cfg) {
  cfg.validate();
  TrainState st;
  st.config = cfg;
  st.spec = default_generator_spec(cfg.base_width, cfg.num_resblocks);
  Rng rng(cfg.seed);
  st.shared = init_shared_weights(st.spec, rng);
  st.pnet = init_param_net(st.spec, cfg.embed_dim, cfg.num_domains(), rng);
  if (!cfg.backbone_weights.empty()) {
    CheckpointData file = read_tensor_container_file(cfg.backbone_weights);
    validate_backbone_tensors(file.tensors);
    for (const std::string& name : st.pnet.frozen)
      st.pnet.tensors[name] = file.tensors.at(name);
  }
  st.disc = init_discriminator({cfg.base_width, cfg.num_domains(), true}, rng);
  st.buffers.assign(static_cast<size_t>(cfg.num_domains()),
                    ReplayBuffer{cfg.buffer_capacity, {}});
  return st;
}

// ---------------------------------------------------------------------------
// Objective construction (exposed so tests can probe the graph directly)
// ---------------------------------------------------------------------------

struct GeneratorObjective {
  ad::Var total, cyc, sty, adv_g;
  ad::Var fake_y, fake_x;  // fresh fakes, for the replay buffers
  GeneratorBinding gen;
  ParamNetBinding pnet;
  DiscriminatorBinding disc;
};

namespace detail {

/// First sample of a batch as a [1,3,H,W] exemplar (contiguous prefix).
inline ad::Var first_sample(ad::Tape& t, ad::Var batch) {
  const Tensor& b = t.val(batch);
  if (b.dim(0) == 1) return batch;
  int64_t one = static_cast<int64_t>(b.dim(1)) * b.dim(2) * b.dim(3);
  return t.reshape(t.slice_flat(batch, 0, one), {1, b.dim(1), b.dim(2), b.dim(3)});
}

inline std::vector<ad::Var> select_taps(const std::vector<ad::Var>& taps,
                                        const std::vector<int>& layers) {
  std::vector<ad::Var> out;
  for (int l : layers) out.push_back(taps[static_cast<size_t>(l)]);
  return out;
}

}  // namespace detail

/// Builds the full generator-side graph of one iteration: both translation
/// directions, both cycles, statistics-matching style terms, and the
/// adversarial term against a read-only discriminator.
inline GeneratorObjective build_generator_objective(
    ad::Tape& t, TrainState& st, const Tensor& batch_x,
    const DomainLabel& label_x, const Tensor& batch_y,
    const DomainLabel& label_y, double lambda, double eta) {
  GeneratorObjective obj;
  obj.gen = GeneratorBinding::bind(t, st.shared, true);
  obj.pnet = ParamNetBinding::bind(t, st.pnet, true);
  obj.disc = DiscriminatorBinding::bind(t, st.disc, false);
  const int D = st.config.num_domains();

  ad::Var ix = t.leaf(batch_x);
  ad::Var iy = t.leaf(batch_y);

  // Exemplars: the other domain's batch conditions the forward mapping; the
  // cycle back conditions on the original source image itself.
  ad::Var theta_y =
      generate_params_forward(t, detail::first_sample(t, iy), label_y,
                              obj.pnet, st.spec, D);
  ad::Var theta_x =
      generate_params_forward(t, detail::first_sample(t, ix), label_x,
                              obj.pnet, st.spec, D);

  obj.fake_y = generator_forward(t, ix, st.spec, obj.gen, theta_y);
  obj.fake_x = generator_forward(t, iy, st.spec, obj.gen, theta_x);
  ad::Var cycled_x = generator_forward(t, obj.fake_y, st.spec, obj.gen, theta_x);
  ad::Var cycled_y = generator_forward(t, obj.fake_x, st.spec, obj.gen, theta_y);

  obj.cyc = cycle_loss_op(t, cycled_x, ix, cycled_y, iy);

  const std::vector<int>& layers = st.config.style_layers;
  auto taps_of = [&](ad::Var img) {
    return detail::select_taps(backbone_taps(t, img, obj.pnet.backbone), layers);
  };
  ad::Var sty_xy = style_loss_op(t, taps_of(obj.fake_y), taps_of(iy));
  ad::Var sty_yx = style_loss_op(t, taps_of(obj.fake_x), taps_of(ix));
  obj.sty = t.add(sty_xy, sty_yx);

  ad::Var logits_fy = discriminate_forward(t, obj.fake_y, label_y, obj.disc);
  ad::Var logits_fx = discriminate_forward(t, obj.fake_x, label_x, obj.disc);
  obj.adv_g = adv_g_op(t, logits_fy, logits_fx);

  obj.total = t.add_many(
      {obj.adv_g, t.scale(obj.cyc, lambda), t.scale(obj.sty, eta)});
  return obj;
}

// ---------------------------------------------------------------------------
// One optimization step
// ---------------------------------------------------------------------------

struct StepOptions {
  double lambda = 10.0;
  double eta = 0.05;
  double lr = 0.001;
  bool update_discriminator = true;
};

namespace detail {

[[noreturn]] inline void nan_abort(const TrainState& st, const LossReport& r,
                                   double grad_norm_g, double grad_norm_d) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "non-finite loss at step %lld: cyc=%g sty=%g adv_d=%g adv_g=%g "
                "total=%g |grad_g|=%g |grad_d|=%g",
                static_cast<long long>(st.step), r.cyc, r.sty, r.adv_d,
                r.adv_g, r.total, grad_norm_g, grad_norm_d);
  fail(ErrorKind::numeric, buf);
}

inline std::map<std::string, const Tensor*> collect_grads(
    ad::Tape& t, const std::map<std::string, ad::Var>& vars,
    const std::set<std::string>* skip = nullptr) {
  std::map<std::string, const Tensor*> grads;
  for (const auto& [name, var] : vars) {
    if (skip && skip->count(name)) continue;
    grads[name] = &t.grad(var);
  }
  return grads;
}

inline double grad_norm(const std::map<std::string, const Tensor*>& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g->data) sq += v * v;
  return std::sqrt(sq);
}

}  // namespace detail

/// One alternation: generator + parameter network first, then the
/// discriminator on buffered fakes. Buffered images carry no gradient
/// history (values are detached copies).
inline LossReport train_step(TrainState& st, const Tensor& batch_x,
                             const DomainLabel& label_x, const Tensor& batch_y,
                             const DomainLabel& label_y, Rng& buffer_rng,
                             const StepOptions& opts) {
  LossReport report;

  // ---- generator/parameter-network phase ----
  Tensor fake_y_value, fake_x_value;
  double grad_norm_g = 0.0;
  {
    ad::Tape tape;
    GeneratorObjective obj = build_generator_objective(
        tape, st, batch_x, label_x, batch_y, label_y, opts.lambda, opts.eta);
    report.cyc = tape.val(obj.cyc)[0];
    report.sty = tape.val(obj.sty)[0];
    report.adv_g = tape.val(obj.adv_g)[0];
    report.total = tape.val(obj.total)[0];
    if (!std::isfinite(report.total))
      detail::nan_abort(st, report, 0.0, 0.0);

    tape.backward(obj.total);

    auto grads = detail::collect_grads(tape, obj.gen.vars);
    auto pgrads = detail::collect_grads(tape, obj.pnet.vars, &st.pnet.frozen);
    grads.insert(pgrads.begin(), pgrads.end());
    grad_norm_g = detail::grad_norm(grads);
    if (!std::isfinite(grad_norm_g))
      detail::nan_abort(st, report, grad_norm_g, 0.0);
    std::map<std::string, Tensor*> params;
    for (auto& [name, tensor] : st.shared.tensors) params[name] = &tensor;
    for (auto& [name, tensor] : st.pnet.tensors)
      if (!st.pnet.is_frozen(name)) params[name] = &tensor;
    adam_step(st.opt_g, params, grads, opts.lr, st.config.grad_clip);

    fake_y_value = tape.val(obj.fake_y);
    fake_x_value = tape.val(obj.fake_x);
  }

  // ---- discriminator phase ----
  {
    // per-image replay query, batched back together
    auto buffer_batch = [&](const Tensor& fresh, int domain_index) {
      Tensor mixed(fresh.shape);
      const int n = fresh.dim(0);
      int64_t one = fresh.numel() / n;
      for (int i = 0; i < n; ++i) {
        Tensor single({1, fresh.dim(1), fresh.dim(2), fresh.dim(3)});
        std::copy(fresh.data.begin() + i * one,
                  fresh.data.begin() + (i + 1) * one, single.data.begin());
        Tensor out = st.buffers[static_cast<size_t>(domain_index)].query(
            single, buffer_rng);
        std::copy(out.data.begin(), out.data.end(),
                  mixed.data.begin() + i * one);
      }
      return mixed;
    };
    Tensor buf_fy = buffer_batch(fake_y_value, label_y.index);
    Tensor buf_fx = buffer_batch(fake_x_value, label_x.index);

    ad::Tape tape;
    DiscriminatorBinding db = DiscriminatorBinding::bind(tape, st.disc, true);
    ad::Var l_real_x = discriminate_forward(tape, tape.leaf(batch_x), label_x, db);
    ad::Var l_real_y = discriminate_forward(tape, tape.leaf(batch_y), label_y, db);
    ad::Var l_fake_y = discriminate_forward(tape, tape.leaf(buf_fy), label_y, db);
    ad::Var l_fake_x = discriminate_forward(tape, tape.leaf(buf_fx), label_x, db);
    ad::Var adv_d = adv_d_op(tape, l_real_x, l_fake_y, l_real_y, l_fake_x);
    report.adv_d = tape.val(adv_d)[0];
    if (!std::isfinite(report.adv_d))
      detail::nan_abort(st, report, grad_norm_g, 0.0);

    if (opts.update_discriminator) {
      tape.backward(adv_d);
      auto grads = detail::collect_grads(tape, db.vars);
      double norm = detail::grad_norm(grads);
      if (!std::isfinite(norm))
        detail::nan_abort(st, report, grad_norm_g, norm);
      std::map<std::string, Tensor*> params;
      for (auto& [name, tensor] : st.disc.tensors) params[name] = &tensor;
      adam_step(st.opt_d, params, grads, opts.lr, st.config.grad_clip);
    }
  }

  st.step += 1;
  return report;
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

inline void save_checkpoint(const TrainState& st, const std::string& path) {
  CheckpointData d;
  d.header = json{{"config", to_json(st.config)},
                  {"generator_spec", to_json(st.spec)},
                  {"step", st.step},
                  {"opt_g_t", st.opt_g.t},
                  {"opt_d_t", st.opt_d.t}};
  for (const auto& [name, tensor] : st.shared.tensors) d.tensors[name] = tensor;
  for (const auto& [name, tensor] : st.pnet.tensors) d.tensors[name] = tensor;
  for (const auto& [name, tensor] : st.disc.tensors) d.tensors[name] = tensor;
  for (const auto& [name, tensor] : st.opt_g.m) d.tensors["opt_g.m." + name] = tensor;
  for (const auto& [name, tensor] : st.opt_g.v) d.tensors["opt_g.v." + name] = tensor;
  for (const auto& [name, tensor] : st.opt_d.m) d.tensors["opt_d.m." + name] = tensor;
  for (const auto& [name, tensor] : st.opt_d.v) d.tensors["opt_d.v." + name] = tensor;
  write_tensor_container_file(path, d);
}

inline TrainState load_checkpoint(const std::string& path) {
  CheckpointData d = read_tensor_container_file(path);
  TrainState st;
  try {
    st.config = config_from_json(d.header.at("config"));
    st.spec = generator_spec_from_json(d.header.at("generator_spec"));
    st.step = d.header.at("step").get<int64_t>();
    st.opt_g.t = d.header.at("opt_g_t").get<int64_t>();
    st.opt_d.t = d.header.at("opt_d_t").get<int64_t>();
  } catch (const json::exception& e) {
    fail(ErrorKind::integrity,
         std::string("checkpoint header incomplete: ") + e.what());
  }

  st.pnet.embed_dim = st.config.embed_dim;
  st.pnet.num_domains = st.config.num_domains();
  st.disc.opts = {st.config.base_width, st.config.num_domains(), true};
  for (auto& [name, tensor] : d.tensors) {
    if (name.rfind("generator.shared.", 0) == 0)
      st.shared.tensors[name] = std::move(tensor);
    else if (name.rfind("param_net.", 0) == 0)
      st.pnet.tensors[name] = std::move(tensor);
    else if (name.rfind("discriminator.", 0) == 0)
      st.disc.tensors[name] = std::move(tensor);
    else if (name.rfind("opt_g.m.", 0) == 0)
      st.opt_g.m[name.substr(8)] = std::move(tensor);
    else if (name.rfind("opt_g.v.", 0) == 0)
      st.opt_g.v[name.substr(8)] = std::move(tensor);
    else if (name.rfind("opt_d.m.", 0) == 0)
      st.opt_d.m[name.substr(8)] = std::move(tensor);
    else if (name.rfind("opt_d.v.", 0) == 0)
      st.opt_d.v[name.substr(8)] = std::move(tensor);
    else
      fail(ErrorKind::integrity, "unexpected tensor in checkpoint: " + name);
  }
  for (const std::string& name : {std::string("param_net.fc.weight"),
                                  std::string("param_net.fc.bias")})
    require(st.pnet.tensors.count(name) == 1, ErrorKind::integrity,
            "checkpoint missing tensor: " + name);
  for (int i = 0; i < kBackboneNumTaps; ++i) {
    st.pnet.frozen.insert(backbone_tensor_name(i, "weight"));
    st.pnet.frozen.insert(backbone_tensor_name(i, "bias"));
  }
  validate_backbone_tensors(st.pnet.tensors);
  st.buffers.assign(static_cast<size_t>(st.config.num_domains()),
                    ReplayBuffer{st.config.buffer_capacity, {}});
  return st;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

class Trainer {
 public:
  Trainer(TrainState state, std::vector<TrainingDomain> domains)
      : st_(std::move(state)),
        domains_(std::move(domains)),
        data_rng_(st_.config.seed ^ 0x9e3779b97f4a7c15ull),
        buffer_rng_(st_.config.seed ^ 0x2545f4914f6cdd1dull) {
    require(static_cast<int>(domains_.size()) == st_.config.num_domains(),
            ErrorKind::domain, "trainer: domain count mismatch");
    pairs_ = st_.config.effective_pairs();
    require(!pairs_.empty(), ErrorKind::domain,
            "trainer: no domain pairs to train on");
    reshuffle();
  }

  TrainState& state() { return st_; }
  const TrainState& state() const { return st_; }

  int steps_per_epoch() const {
    int64_t total = 0;
    for (auto [a, b] : pairs_)
      total += std::min(domains_[static_cast<size_t>(a)].count,
                        domains_[static_cast<size_t>(b)].count);
    return std::max<int>(1, static_cast<int>(total / st_.config.batch_size));
  }

  int current_epoch() const {
    return static_cast<int>(st_.step / steps_per_epoch());
  }

  /// One iteration on the next round-robin domain pair.
  LossReport run_one_step() {
    auto [a, b] = pairs_[static_cast<size_t>(next_pair_)];
    next_pair_ = (next_pair_ + 1) % static_cast<int>(pairs_.size());

    const int bs = st_.config.batch_size;
    Tensor batch_x = next_batch(a, bs);
    Tensor batch_y = next_batch(b, bs);

    StepOptions opts;
    opts.lambda = st_.config.lambda_cyc;
    opts.eta = st_.config.eta_sty;
    LRSchedule sched{st_.config.lr, st_.config.total_epochs,
                     st_.config.decay_start_epoch};
    opts.lr = lr_at(sched, std::min(current_epoch(), st_.config.total_epochs));
    opts.update_discriminator = true;

    return train_step(st_, batch_x, domains_[static_cast<size_t>(a)].label,
                      batch_y, domains_[static_cast<size_t>(b)].label,
                      buffer_rng_, opts);
  }

  /// Runs `num_steps` iterations, appending one CSV line per log_every to
  /// `csv` when given. The header is written when the stream is at offset 0.
  void run_steps(int num_steps, std::ostream* csv = nullptr) {
    if (csv && csv->tellp() == 0)
      (*csv) << "step,lr,cyc,sty,adv_d,adv_g,total\n";
    for (int i = 0; i < num_steps; ++i) {
      LRSchedule sched{st_.config.lr, st_.config.total_epochs,
                       st_.config.decay_start_epoch};
      double lr = lr_at(sched, std::min(current_epoch(), st_.config.total_epochs));
      LossReport r = run_one_step();
      if (csv && st_.step % st_.config.log_every == 0) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                      static_cast<long long>(st_.step), lr, r.cyc, r.sty,
                      r.adv_d, r.adv_g, r.total);
        (*csv) << line;
      }
      if (st_.config.sample_every > 0 && !sample_dir_.empty() &&
          st_.step % st_.config.sample_every == 0)
        write_sample_grid();
      history_.push_back(r);
    }
  }

  /// Full config-driven run: epochs, CSV log, samples, periodic checkpoints.
  void run(const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    sample_dir_ = out_dir;
    std::ofstream csv(fs::path(out_dir) / "train_log.csv",
                      st_.step == 0 ? std::ios::trunc : std::ios::app);
    const int spe = steps_per_epoch();
    while (current_epoch() < st_.config.total_epochs) {
      int epoch = current_epoch();
      run_steps(spe, &csv);
      csv.flush();
      if ((epoch + 1) % st_.config.checkpoint_every_epochs == 0 ||
          epoch + 1 == st_.config.total_epochs) {
        char name[64];
        std::snprintf(name, sizeof(name), "edit_epoch_%03d.ckpt", epoch + 1);
        save_checkpoint(st_, (fs::path(out_dir) / name).string());
        save_checkpoint(st_, (fs::path(out_dir) / "latest.ckpt").string());
      }
    }
  }

  const std::vector<LossReport>& history() const { return history_; }

 private:
  void reshuffle() {
    orders_.clear();
    cursors_.assign(domains_.size(), 0);
    for (const TrainingDomain& d : domains_)
      orders_.push_back(data_rng_.permutation(d.count));
  }

  Tensor next_batch(int domain, int bs) {
    std::vector<int> idx;
    for (int i = 0; i < bs; ++i) {
      size_t di = static_cast<size_t>(domain);
      if (cursors_[di] >= orders_[di].size()) {
        orders_[di] = data_rng_.permutation(domains_[di].count);
        cursors_[di] = 0;
      }
      idx.push_back(orders_[di][cursors_[di]++]);
    }
    return domains_[static_cast<size_t>(domain)].batch(idx, true, data_rng_);
  }

  void write_sample_grid() {
    auto [a, b] = pairs_[0];
    Tensor x = domains_[static_cast<size_t>(a)].batch({0}, false, data_rng_);
    Tensor y = domains_[static_cast<size_t>(b)].batch({0}, false, data_rng_);
    Tensor theta_y = generate_params(y, domains_[static_cast<size_t>(b)].label,
                                     st_.pnet, st_.spec);
    Tensor theta_x = generate_params(x, domains_[static_cast<size_t>(a)].label,
                                     st_.pnet, st_.spec);
    Tensor fake_y = generator_apply(x, st_.spec, st_.shared, theta_y);
    Tensor fake_x = generator_apply(y, st_.spec, st_.shared, theta_x);
    Tensor cyc_x = generator_apply(fake_y, st_.spec, st_.shared, theta_x);
    Tensor cyc_y = generator_apply(fake_x, st_.spec, st_.shared, theta_y);
    ImageU8 grid = tile_grid({x, fake_y, cyc_x, y, fake_x, cyc_y}, 3);
    char name[64];
    std::snprintf(name, sizeof(name), "samples_%06lld.png",
                  static_cast<long long>(st_.step));
    write_png((std::filesystem::path(sample_dir_) / name).string(), grid);
  }

  TrainState st_;
  std::vector<TrainingDomain> domains_;
  std::vector<std::pair<int, int>> pairs_;
  int next_pair_ = 0;
  Rng data_rng_;
  Rng buffer_rng_;
  std::vector<std::vector<int>> orders_;
  std::vector<size_t> cursors_;
  std::vector<LossReport> history_;
  std::string sample_dir_;
};

}  // namespace edit
