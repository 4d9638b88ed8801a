#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "edit/core.hpp"
#include "edit/data.hpp"
#include "edit/errors.hpp"
#include "edit/evaluation.hpp"
#include "edit/generator.hpp"
#include "edit/image_io.hpp"
#include "edit/param_net.hpp"
#include "edit/trainer.hpp"

namespace edit::cli {

// Batch-oriented command layer. Each run_* function validates its inputs
// before touching weights and throws edit::Error on failure; the binary in
// tools/ maps error kinds onto exit codes.

struct TrainCmd {
  std::string config_path;
  std::string resume_path;  // optional
  std::string output_dir;   // optional override
  int64_t seed_override = -1;
  int max_steps = 0;  // 0 = run the configured epochs
};

struct TranslateCmd {
  std::string checkpoint;
  std::string input;
  std::string exemplar;  // optional; empty -> black image (domain-only mode)
  std::string domain;
  std::string output;
};

struct InterpolateCmd {
  std::string checkpoint;
  std::string input;
  std::string exemplar_a;
  std::string exemplar_b;
  std::string domain;
  int steps = 5;
  std::string output_dir;
};

struct EvaluateCmd {
  std::string checkpoint;
  std::string dataset;  // directory or "synthetic"
  std::string domain_pair;  // "source:target"
  std::string output;
};

struct InspectCmd {
  std::string checkpoint;
};

namespace detail {

inline Tensor load_input_image(const std::string& path) {
  Tensor img = image_to_tensor(read_image(path));
  int h = img.dim(2), w = img.dim(3);
  int h4 = std::max(4, (h + 2) / 4 * 4);
  int w4 = std::max(4, (w + 2) / 4 * 4);
  if (h4 != h || w4 != w) {
    std::fprintf(stderr,
                 "warning: %s is %dx%d; resizing to %dx%d (multiple of 4)\n",
                 path.c_str(), w, h, w4, h4);
    img = resize_bilinear(img, h4, w4);
  }
  return img;
}

/// Exemplars are normalized to the training resolution before embedding.
inline Tensor load_exemplar(const std::string& path, int image_size) {
  Tensor img = image_to_tensor(read_image(path));
  if (img.dim(2) != image_size || img.dim(3) != image_size) {
    std::fprintf(stderr, "warning: exemplar %s resized to %dx%d\n",
                 path.c_str(), image_size, image_size);
    img = resize_bilinear(img, image_size, image_size);
  }
  return img;
}

inline Tensor black_exemplar(int image_size) {
  return Tensor::full({1, 3, image_size, image_size}, -1.0);
}

inline std::pair<std::string, std::string> split_pair(const std::string& s) {
  size_t colon = s.find(':');
  require(colon != std::string::npos && colon > 0 && colon + 1 < s.size(),
          ErrorKind::usage, "domain pair must look like source:target");
  return {s.substr(0, colon), s.substr(colon + 1)};
}

}  // namespace detail

inline std::string effective_data_root(const std::string& configured) {
  if (const char* env = std::getenv("EDIT_DATA_ROOT"); env && *env)
    return env;
  return configured;
}

// ---- train ----

inline void run_train(const TrainCmd& cmd) {
  require(!cmd.config_path.empty(), ErrorKind::usage, "train needs --config");
  std::ifstream is(cmd.config_path);
  require(static_cast<bool>(is), ErrorKind::data,
          "cannot open config: " + cmd.config_path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    fail(ErrorKind::format,
         "config is not valid JSON: " + std::string(e.what()));
  }
  Config cfg = config_from_json(j);
  cfg.data_root = effective_data_root(cfg.data_root);
  if (cmd.seed_override >= 0) cfg.seed = static_cast<uint64_t>(cmd.seed_override);
  if (!cmd.output_dir.empty()) cfg.output_dir = cmd.output_dir;

  TrainState st;
  if (!cmd.resume_path.empty()) {
    st = load_checkpoint(cmd.resume_path);
    st.config.data_root = cfg.data_root;
    st.config.output_dir = cfg.output_dir;
  } else {
    st = init_train_state(cfg);
  }

  std::vector<TrainingDomain> domains = make_domains(st.config, Split::train);
  std::string out_dir = st.config.output_dir;
  Trainer trainer(std::move(st), std::move(domains));
  if (cmd.max_steps > 0) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "train_log.csv");
    trainer.run_steps(cmd.max_steps, &csv);
    save_checkpoint(trainer.state(), (fs::path(out_dir) / "latest.ckpt").string());
  } else {
    trainer.run(out_dir);
  }
  std::printf("trained to step %lld; artifacts in %s\n",
              static_cast<long long>(trainer.state().step), out_dir.c_str());
}

// ---- translate ----

inline void run_translate(const TranslateCmd& cmd) {
  require(!cmd.checkpoint.empty() && !cmd.input.empty() && !cmd.output.empty(),
          ErrorKind::usage, "translate needs --checkpoint, --input, --output");
  require(!cmd.domain.empty(), ErrorKind::usage, "translate needs --domain");
  TrainState st = load_checkpoint(cmd.checkpoint);
  int domain = st.config.domain_index(cmd.domain);
  DomainLabel label = st.config.label(domain);

  Tensor input = detail::load_input_image(cmd.input);
  Tensor exemplar = cmd.exemplar.empty()
                        ? detail::black_exemplar(st.config.image_size)
                        : detail::load_exemplar(cmd.exemplar,
                                                st.config.image_size);
  Tensor theta = generate_params(exemplar, label, st.pnet, st.spec);
  Tensor out = generator_apply(input, st.spec, st.shared, theta);
  write_png(cmd.output, tensor_to_image(out));
  std::printf("wrote %s\n", cmd.output.c_str());
}

// ---- interpolate ----

inline std::vector<std::string> run_interpolate(const InterpolateCmd& cmd) {
  require(!cmd.checkpoint.empty() && !cmd.input.empty(), ErrorKind::usage,
          "interpolate needs --checkpoint and --input");
  require(!cmd.exemplar_a.empty() && !cmd.exemplar_b.empty(), ErrorKind::usage,
          "interpolate needs --exemplar-a and --exemplar-b");
  require(cmd.steps >= 2, ErrorKind::usage,
          "interpolate needs --steps >= 2");
  require(!cmd.output_dir.empty(), ErrorKind::usage,
          "interpolate needs --output");
  TrainState st = load_checkpoint(cmd.checkpoint);
  int domain = st.config.domain_index(cmd.domain);
  DomainLabel label = st.config.label(domain);

  Tensor input = detail::load_input_image(cmd.input);
  Tensor ex_a = detail::load_exemplar(cmd.exemplar_a, st.config.image_size);
  Tensor ex_b = detail::load_exemplar(cmd.exemplar_b, st.config.image_size);
  Tensor theta_a = generate_params(ex_a, label, st.pnet, st.spec);
  Tensor theta_b = generate_params(ex_b, label, st.pnet, st.spec);

  std::filesystem::create_directories(cmd.output_dir);
  std::vector<std::string> written;
  for (int i = 0; i < cmd.steps; ++i) {
    double alpha = static_cast<double>(i) / (cmd.steps - 1);
    Tensor theta = interpolate(theta_a, theta_b, alpha);
    Tensor out = generator_apply(input, st.spec, st.shared, theta);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.png", i);
    std::string path = (std::filesystem::path(cmd.output_dir) / name).string();
    write_png(path, tensor_to_image(out));
    written.push_back(path);
  }
  std::printf("wrote %d frames to %s\n", cmd.steps, cmd.output_dir.c_str());
  return written;
}

// ---- evaluate ----

inline EvalReport run_evaluate(const EvaluateCmd& cmd) {
  require(!cmd.checkpoint.empty(), ErrorKind::usage,
          "evaluate needs --checkpoint");
  require(!cmd.domain_pair.empty(), ErrorKind::usage,
          "evaluate needs --domain-pair source:target");
  require(!cmd.output.empty(), ErrorKind::usage, "evaluate needs --output");
  TrainState st = load_checkpoint(cmd.checkpoint);
  auto [src_name, dst_name] = detail::split_pair(cmd.domain_pair);
  int src = st.config.domain_index(src_name);
  int dst = st.config.domain_index(dst_name);

  std::string root = effective_data_root(
      cmd.dataset.empty() ? st.config.data_root : cmd.dataset);
  std::vector<TrainingDomain> domains;
  if (root == "synthetic") {
    Config test_cfg = st.config;
    test_cfg.seed = st.config.seed + 7777;  // held-out synthetic split
    domains = make_synthetic_domains(test_cfg);
  } else {
    domains = make_disk_domains(st.config, root, Split::test);
  }

  EvalOptions opts;
  EvalReport rep = evaluate_pair(st, domains[static_cast<size_t>(src)],
                                 domains[static_cast<size_t>(dst)], opts);
  std::ofstream os(cmd.output);
  require(static_cast<bool>(os), ErrorKind::data,
          "cannot write report: " + cmd.output);
  os << eval_report_text(rep);
  std::ofstream kv(cmd.output + ".kv");
  kv << eval_report_kv(rep);
  std::printf("%s", eval_report_text(rep).c_str());
  return rep;
}

// ---- inspect ----

inline void run_inspect(const InspectCmd& cmd, std::ostream& os = std::cout) {
  require(!cmd.checkpoint.empty(), ErrorKind::usage,
          "inspect needs --checkpoint");
  TrainState st = load_checkpoint(cmd.checkpoint);
  ParamCounts counts = count_params(st);
  os << "checkpoint: " << cmd.checkpoint << "\n";
  os << "step: " << st.step << "\n";
  os << "domains:";
  for (const std::string& d : st.config.domains) os << " " << d;
  os << "\n";
  os << "image_size: " << st.config.image_size
     << "  base_width: " << st.config.base_width << "\n";
  os << "shared_param_count: " << counts.shared << "\n";
  os << "dynamic_param_count: " << counts.dynamic << "\n";
  os << "paramnet_param_count: " << counts.paramnet << "\n";
  os << "dynamic blocks:\n";
  DynamicLayout layout = dynamic_layout(st.spec);
  for (const DynBlockSpan& span : layout.blocks) {
    const BlockSpec& b = st.spec.blocks[static_cast<size_t>(span.block_index)];
    os << "  block " << span.block_index << " (" << to_string(b.kind) << " "
       << b.in_ch << "->" << b.out_ch << ", k" << b.kernel << "): offset "
       << span.offset << ", length " << span.length << "\n";
  }
}

}  // namespace edit::cli
