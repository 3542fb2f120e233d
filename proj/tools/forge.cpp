// culture-forge command-line entry point.
//
// forge augment|assemble|finetune|evaluate --config <path>
//       [--replay <cassette>] [--out <dir>]

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "forge/forge.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string replay;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file")
      ->required();
  cmd->add_option("--out", args.out_dir,
                  "output directory (overrides config out_dir)");
  cmd->add_option("--replay", args.replay,
                  "answer provider requests from this cassette only");
}

forge::RunConfig load(const CommonArgs& args) {
  forge::RunConfig cfg = forge::load_run_config(args.config_path);
  if (!args.out_dir.empty()) {
    cfg.out_dir = std::filesystem::absolute(args.out_dir);
  } else if (!cfg.out_dir.empty()) {
    cfg.out_dir = cfg.resolve(cfg.out_dir);
  } else {
    throw forge::ConfigError("config.out_dir or --out is required");
  }
  return cfg;
}

int dispatch(const std::string& name, const CommonArgs& args) {
  std::optional<std::filesystem::path> replay;
  if (!args.replay.empty()) replay = std::filesystem::path(args.replay);

  forge::RunConfig cfg = load(args);
  try {
    if (name == "augment") return forge::run_augment(cfg, replay);
    if (name == "assemble") return forge::run_assemble(cfg);
    if (name == "finetune") return forge::run_finetune(cfg);
    if (name == "evaluate") return forge::run_evaluate(cfg, replay);
  } catch (const forge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    forge::write_error_report(cfg.out_dir, "config", e.what());
    return forge::kExitConfigError;
  } catch (const forge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    forge::write_error_report(cfg.out_dir, "runtime", e.what());
    return forge::kExitConfigError;
  }
  return forge::kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"culture-forge: survey-seeded augmentation, fine-tuning "
               "dataset assembly, and evaluation"};
  app.require_subcommand(1);

  CommonArgs augment_args, assemble_args, finetune_args, evaluate_args;
  add_common(app.add_subcommand("augment",
                                "generate filtered augmented samples"),
             augment_args);
  add_common(app.add_subcommand("assemble",
                                "build fine-tuning dataset exports"),
             assemble_args);
  add_common(app.add_subcommand("finetune",
                                "submit datasets to the fine-tune provider"),
             finetune_args);
  add_common(app.add_subcommand("evaluate",
                                "run benchmark and generation evaluations"),
             evaluate_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("augment")) return dispatch("augment", augment_args);
    if (app.got_subcommand("assemble"))
      return dispatch("assemble", assemble_args);
    if (app.got_subcommand("finetune"))
      return dispatch("finetune", finetune_args);
    if (app.got_subcommand("evaluate"))
      return dispatch("evaluate", evaluate_args);
  } catch (const forge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return forge::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return forge::kExitConfigError;
  }
  return forge::kExitConfigError;
}
