// edit: exemplar-domain aware image-to-image translation toolkit.
//
// Subcommands: train, translate, interpolate, evaluate, inspect.
// Exit codes: 0 ok, 2 usage, 3 data/format, 4 numeric abort.

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "edit/cli.hpp"
#include "edit/errors.hpp"

namespace {

void validate_device(const std::string& device) {
  edit::require(device == "cpu", edit::ErrorKind::usage,
                "only --device cpu is supported");
}

int exit_code_for(edit::ErrorKind kind) {
  switch (kind) {
    case edit::ErrorKind::usage: return 2;
    case edit::ErrorKind::numeric: return 4;
    default: return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EDIT: exemplar-domain aware image-to-image translation"};
  app.require_subcommand(1);

  std::string device = "cpu";
  app.add_option("--device", device, "compute device (cpu)");

  edit::cli::TrainCmd train_cmd;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", train_cmd.config_path, "config JSON file")
      ->required();
  train->add_option("--resume", train_cmd.resume_path, "checkpoint to resume");
  train->add_option("--output", train_cmd.output_dir, "output directory override");
  train->add_option("--seed", train_cmd.seed_override, "seed override");
  train->add_option("--max-steps", train_cmd.max_steps,
                    "stop after N steps (0 = full epoch schedule)");

  edit::cli::TranslateCmd translate_cmd;
  CLI::App* translate = app.add_subcommand("translate", "translate one image");
  translate->add_option("--checkpoint", translate_cmd.checkpoint)->required();
  translate->add_option("--input", translate_cmd.input)->required();
  translate->add_option("--exemplar", translate_cmd.exemplar,
                        "style exemplar image (omit for domain-only mode)");
  translate->add_option("--domain", translate_cmd.domain)->required();
  translate->add_option("--output", translate_cmd.output)->required();

  edit::cli::InterpolateCmd interp_cmd;
  CLI::App* interp =
      app.add_subcommand("interpolate", "sweep between two exemplar styles");
  interp->add_option("--checkpoint", interp_cmd.checkpoint)->required();
  interp->add_option("--input", interp_cmd.input)->required();
  interp->add_option("--exemplar-a", interp_cmd.exemplar_a)->required();
  interp->add_option("--exemplar-b", interp_cmd.exemplar_b)->required();
  interp->add_option("--domain", interp_cmd.domain)->required();
  interp->add_option("--steps", interp_cmd.steps, "number of frames (>= 2)");
  interp->add_option("--output", interp_cmd.output_dir, "output directory")
      ->required();

  edit::cli::EvaluateCmd eval_cmd;
  CLI::App* evaluate = app.add_subcommand("evaluate", "compute metrics");
  evaluate->add_option("--checkpoint", eval_cmd.checkpoint)->required();
  evaluate->add_option("--dataset", eval_cmd.dataset,
                       "dataset root or 'synthetic' (default: from config)");
  evaluate->add_option("--domain-pair", eval_cmd.domain_pair,
                       "source:target domain names")
      ->required();
  evaluate->add_option("--output", eval_cmd.output, "report file")->required();

  edit::cli::InspectCmd inspect_cmd;
  CLI::App* inspect = app.add_subcommand("inspect", "describe a checkpoint");
  inspect->add_option("--checkpoint", inspect_cmd.checkpoint)->required();

  try {
    app.parse(argc, argv);
    validate_device(device);
    if (*train) edit::cli::run_train(train_cmd);
    if (*translate) edit::cli::run_translate(translate_cmd);
    if (*interp) edit::cli::run_interpolate(interp_cmd);
    if (*evaluate) edit::cli::run_evaluate(eval_cmd);
    if (*inspect) edit::cli::run_inspect(inspect_cmd);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "error[usage]: %s\n", e.what());
    return 2;
  } catch (const edit::Error& e) {
    std::fprintf(stderr, "%s\n", e.formatted().c_str());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 3;
  }
  return 0;
}
