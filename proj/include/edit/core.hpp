#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edit/errors.hpp"
#include "edit/tensor.hpp"

namespace edit {

using json = nlohmann::json;

/// Named weight store shared by checkpoints and the network bindings.
/// std::map keeps iteration deterministic.
using NamedTensors = std::map<std::string, Tensor>;

// ---------------------------------------------------------------------------
// Domain labels
// ---------------------------------------------------------------------------

struct DomainLabel {
  int index = 0;
  std::vector<double> onehot;
  std::string name;

  int num_domains() const { return static_cast<int>(onehot.size()); }
};

inline DomainLabel make_onehot(int index, int num_domains,
                               std::string name = {}) {
  require(num_domains >= 2, ErrorKind::domain,
          "make_onehot: need at least two domains");
  require(index >= 0 && index < num_domains, ErrorKind::domain,
          "make_onehot: index " + std::to_string(index) + " outside [0, " +
              std::to_string(num_domains) + ")");
  DomainLabel label;
  label.index = index;
  label.onehot.assign(static_cast<size_t>(num_domains), 0.0);
  label.onehot[static_cast<size_t>(index)] = 1.0;
  label.name = std::move(name);
  return label;
}

// ---------------------------------------------------------------------------
// Generator architecture description
// ---------------------------------------------------------------------------

enum class BlockKind { conv, resblock, upconv, output };
enum class NormKind { instance, none };
enum class ActKind { relu, tanh, none };

struct BlockSpec {
  BlockKind kind = BlockKind::conv;
  int kernel = 3;
  int stride = 1;
  int in_ch = 0;
  int out_ch = 0;
  bool dynamic = false;
  NormKind norm = NormKind::instance;
  ActKind activation = ActKind::relu;
};

struct GeneratorSpec {
  std::vector<BlockSpec> blocks;
  int base_width = 64;

  void validate() const {
    require(!blocks.empty(), ErrorKind::shape, "generator spec has no blocks");
    bool any_dynamic = false, any_shared = false;
    for (size_t i = 0; i < blocks.size(); ++i) {
      const BlockSpec& b = blocks[i];
      require(b.kernel >= 1 && b.kernel % 2 == 1, ErrorKind::shape,
              "block kernels must be odd (reflection padding)");
      require(b.stride == 1 || b.stride == 2, ErrorKind::shape,
              "block stride must be 1 or 2");
      require(b.in_ch >= 1 && b.out_ch >= 1, ErrorKind::shape,
              "block channel counts must be positive");
      if (b.kind == BlockKind::resblock)
        require(b.in_ch == b.out_ch, ErrorKind::shape,
                "residual blocks must preserve channels");
      if (i + 1 < blocks.size())
        require(b.out_ch == blocks[i + 1].in_ch, ErrorKind::shape,
                "adjacent blocks' channel counts must chain");
      (b.dynamic ? any_dynamic : any_shared) = true;
    }
    require(any_dynamic, ErrorKind::shape,
            "generator spec needs at least one dynamic block");
    require(any_shared, ErrorKind::shape,
            "generator spec needs at least one shared block");
  }

  int input_channels() const { return blocks.front().in_ch; }
  int output_channels() const { return blocks.back().out_ch; }
};

/// Stock layout: c7s1-W encoder, two stride-2 downsamplers, a run of
/// residual blocks at 4W, then a dynamically parameterized decoder
/// (two resize-conv upsamplers and a 7x7 tanh output head).
inline GeneratorSpec default_generator_spec(int base_width = 64,
                                            int num_resblocks = 9) {
  require(base_width >= 1, ErrorKind::domain, "base_width must be positive");
  require(num_resblocks >= 1, ErrorKind::domain,
          "need at least one residual block");
  const int w = base_width;
  GeneratorSpec spec;
  spec.base_width = w;
  spec.blocks.push_back({BlockKind::conv, 7, 1, 3, w, false,
                         NormKind::instance, ActKind::relu});
  spec.blocks.push_back({BlockKind::conv, 3, 2, w, 2 * w, false,
                         NormKind::instance, ActKind::relu});
  spec.blocks.push_back({BlockKind::conv, 3, 2, 2 * w, 4 * w, false,
                         NormKind::instance, ActKind::relu});
  for (int i = 0; i < num_resblocks; ++i)
    spec.blocks.push_back({BlockKind::resblock, 3, 1, 4 * w, 4 * w, false,
                           NormKind::instance, ActKind::relu});
  spec.blocks.push_back({BlockKind::upconv, 3, 1, 4 * w, 2 * w, true,
                         NormKind::instance, ActKind::relu});
  spec.blocks.push_back({BlockKind::upconv, 3, 1, 2 * w, w, true,
                         NormKind::instance, ActKind::relu});
  spec.blocks.push_back(
      {BlockKind::output, 7, 1, w, 3, true, NormKind::none, ActKind::tanh});
  return spec;
}

// ---- JSON round trip for specs ----

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::conv: return "conv";
    case BlockKind::resblock: return "resblock";
    case BlockKind::upconv: return "upconv";
    case BlockKind::output: return "output";
  }
  return "conv";
}
inline const char* to_string(NormKind k) {
  return k == NormKind::instance ? "instance" : "none";
}
inline const char* to_string(ActKind k) {
  switch (k) {
    case ActKind::relu: return "relu";
    case ActKind::tanh: return "tanh";
    case ActKind::none: return "none";
  }
  return "none";
}

inline BlockKind block_kind_from(const std::string& s) {
  if (s == "conv") return BlockKind::conv;
  if (s == "resblock") return BlockKind::resblock;
  if (s == "upconv") return BlockKind::upconv;
  if (s == "output") return BlockKind::output;
  fail(ErrorKind::format, "unknown block kind: " + s);
}
inline NormKind norm_kind_from(const std::string& s) {
  if (s == "instance") return NormKind::instance;
  if (s == "none") return NormKind::none;
  fail(ErrorKind::format, "unknown norm kind: " + s);
}
inline ActKind act_kind_from(const std::string& s) {
  if (s == "relu") return ActKind::relu;
  if (s == "tanh") return ActKind::tanh;
  if (s == "none") return ActKind::none;
  fail(ErrorKind::format, "unknown activation kind: " + s);
}

inline json to_json(const GeneratorSpec& spec) {
  json blocks = json::array();
  for (const BlockSpec& b : spec.blocks)
    blocks.push_back({{"kind", to_string(b.kind)},
                      {"kernel", b.kernel},
                      {"stride", b.stride},
                      {"in_ch", b.in_ch},
                      {"out_ch", b.out_ch},
                      {"dynamic", b.dynamic},
                      {"norm", to_string(b.norm)},
                      {"activation", to_string(b.activation)}});
  return json{{"base_width", spec.base_width}, {"blocks", blocks}};
}

inline GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec spec;
  spec.base_width = j.at("base_width").get<int>();
  for (const json& bj : j.at("blocks")) {
    BlockSpec b;
    b.kind = block_kind_from(bj.at("kind").get<std::string>());
    b.kernel = bj.at("kernel").get<int>();
    b.stride = bj.at("stride").get<int>();
    b.in_ch = bj.at("in_ch").get<int>();
    b.out_ch = bj.at("out_ch").get<int>();
    b.dynamic = bj.at("dynamic").get<bool>();
    b.norm = norm_kind_from(bj.at("norm").get<std::string>());
    b.activation = act_kind_from(bj.at("activation").get<std::string>());
    spec.blocks.push_back(b);
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct Config {
  std::vector<std::string> domains;
  int image_size = 256;
  int base_width = 64;
  int num_resblocks = 9;
  double lambda_cyc = 10.0;
  double eta_sty = 0.05;
  double lr = 0.001;
  int total_epochs = 100;
  int decay_start_epoch = 50;
  int buffer_capacity = 50;
  uint64_t seed = 0;
  std::vector<int> style_layers = {0, 1, 2, 3, 4};
  int embed_dim = 128;

  // artifact plumbing
  int batch_size = 1;
  std::vector<std::pair<int, int>> domain_pairs;  // empty -> consecutive pairs
  std::string data_root = "synthetic";
  std::string output_dir = "runs/default";
  int synthetic_per_domain = 100;
  int log_every = 1;
  int sample_every = 0;  // 0 = off
  int checkpoint_every_epochs = 1;
  double grad_clip = 0.0;  // 0 = off
  std::string backbone_weights;  // optional tensor-container file

  int num_domains() const { return static_cast<int>(domains.size()); }

  std::vector<std::pair<int, int>> effective_pairs() const {
    if (!domain_pairs.empty()) return domain_pairs;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i + 1 < num_domains(); i += 2) pairs.emplace_back(i, i + 1);
    return pairs;
  }

  DomainLabel label(int index) const {
    return make_onehot(index, num_domains(), domains[static_cast<size_t>(index)]);
  }

  int domain_index(const std::string& name) const {
    for (int i = 0; i < num_domains(); ++i)
      if (domains[static_cast<size_t>(i)] == name) return i;
    std::string known;
    for (const std::string& d : domains) known += (known.empty() ? "" : ", ") + d;
    fail(ErrorKind::usage,
         "unknown domain \"" + name + "\" (registered: " + known + ")");
  }

  void validate() const {
    require(num_domains() >= 2, ErrorKind::domain,
            "config: need at least two domains");
    require(image_size >= 8 && image_size % 4 == 0, ErrorKind::domain,
            "config: image_size must be a positive multiple of 4");
    require(base_width >= 1, ErrorKind::domain,
            "config: base_width must be positive");
    require(num_resblocks >= 1, ErrorKind::domain,
            "config: num_resblocks must be positive");
    require(lambda_cyc > 0.0, ErrorKind::domain,
            "config: lambda_cyc must be > 0");
    require(eta_sty > 0.0, ErrorKind::domain, "config: eta_sty must be > 0");
    require(lr > 0.0, ErrorKind::domain, "config: lr must be > 0");
    require(total_epochs >= 1, ErrorKind::domain,
            "config: total_epochs must be >= 1");
    require(decay_start_epoch >= 0 && decay_start_epoch <= total_epochs,
            ErrorKind::domain,
            "config: decay_start_epoch must lie in [0, total_epochs]");
    require(buffer_capacity >= 1, ErrorKind::domain,
            "config: buffer_capacity must be >= 1");
    require(embed_dim >= 1, ErrorKind::domain,
            "config: embed_dim must be >= 1");
    require(batch_size >= 1, ErrorKind::domain,
            "config: batch_size must be >= 1");
    require(synthetic_per_domain >= 1, ErrorKind::domain,
            "config: synthetic_per_domain must be >= 1");
    require(!style_layers.empty(), ErrorKind::domain,
            "config: style_layers must not be empty");
    for (int l : style_layers)
      require(l >= 0 && l < 5, ErrorKind::domain,
              "config: style_layers indices must lie in [0, 5)");
    for (auto [a, b] : domain_pairs) {
      require(a >= 0 && a < num_domains() && b >= 0 && b < num_domains(),
              ErrorKind::domain, "config: domain pair index out of range");
      require(a != b, ErrorKind::domain,
              "config: domain pair must name two distinct domains");
    }
    require(grad_clip >= 0.0, ErrorKind::domain,
            "config: grad_clip must be >= 0");
  }
};

inline json to_json(const Config& c) {
  json pairs = json::array();
  for (auto [a, b] : c.domain_pairs) pairs.push_back({a, b});
  return json{{"domains", c.domains},
              {"image_size", c.image_size},
              {"base_width", c.base_width},
              {"num_resblocks", c.num_resblocks},
              {"lambda_cyc", c.lambda_cyc},
              {"eta_sty", c.eta_sty},
              {"lr", c.lr},
              {"total_epochs", c.total_epochs},
              {"decay_start_epoch", c.decay_start_epoch},
              {"buffer_capacity", c.buffer_capacity},
              {"seed", c.seed},
              {"style_layers", c.style_layers},
              {"embed_dim", c.embed_dim},
              {"batch_size", c.batch_size},
              {"domain_pairs", pairs},
              {"data_root", c.data_root},
              {"output_dir", c.output_dir},
              {"synthetic_per_domain", c.synthetic_per_domain},
              {"log_every", c.log_every},
              {"sample_every", c.sample_every},
              {"checkpoint_every_epochs", c.checkpoint_every_epochs},
              {"grad_clip", c.grad_clip},
              {"backbone_weights", c.backbone_weights}};
}

inline Config config_from_json(const json& j) {
  Config c;
  j.at("domains").get_to(c.domains);
  c.image_size = j.value("image_size", c.image_size);
  c.base_width = j.value("base_width", c.base_width);
  c.num_resblocks = j.value("num_resblocks", c.num_resblocks);
  c.lambda_cyc = j.value("lambda_cyc", c.lambda_cyc);
  c.eta_sty = j.value("eta_sty", c.eta_sty);
  c.lr = j.value("lr", c.lr);
  c.total_epochs = j.value("total_epochs", c.total_epochs);
  c.decay_start_epoch = j.value("decay_start_epoch", c.decay_start_epoch);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.seed = j.value("seed", c.seed);
  if (j.contains("style_layers"))
    j.at("style_layers").get_to(c.style_layers);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.batch_size = j.value("batch_size", c.batch_size);
  if (j.contains("domain_pairs")) {
    c.domain_pairs.clear();
    for (const json& p : j.at("domain_pairs"))
      c.domain_pairs.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  }
  c.data_root = j.value("data_root", c.data_root);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.synthetic_per_domain = j.value("synthetic_per_domain", c.synthetic_per_domain);
  c.log_every = j.value("log_every", c.log_every);
  c.sample_every = j.value("sample_every", c.sample_every);
  c.checkpoint_every_epochs =
      j.value("checkpoint_every_epochs", c.checkpoint_every_epochs);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.backbone_weights = j.value("backbone_weights", c.backbone_weights);
  c.validate();
  return c;
}

/// Validate a batch of images against the [N,3,H,W] in [-1,1] contract.
inline void validate_image_tensor(const Tensor& t) {
  require(t.ndim() == 4, ErrorKind::shape, "image tensor must be [N,C,H,W]");
  require(t.dim(1) == 3, ErrorKind::shape, "image tensor must have 3 channels");
  require(t.dim(2) % 4 == 0 && t.dim(3) % 4 == 0, ErrorKind::shape,
          "image height/width must be multiples of 4");
  require(t.all_finite(), ErrorKind::numeric,
          "image tensor contains non-finite values");
}

}  // namespace edit
