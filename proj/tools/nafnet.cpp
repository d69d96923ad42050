#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "naf/checkpoint.hpp"
#include "naf/commands.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::string> out;
  std::optional<int> subset;

  void attach(CLI::App* cmd, bool with_config = true) {
    if (with_config) {
      cmd->add_option("--config", config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    }
    cmd->add_option("--seed", seed, "Training seed (init and batch order)");
    cmd->add_flag("--deterministic", deterministic, "Force deterministic mode");
    cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--subset", subset, "Number of training images");
  }

  naf::RunConfig resolve() const {
    naf::CliOverrides o{seed, deterministic, out, subset};
    return naf::resolve_config(config.empty() ? std::nullopt
                                              : std::optional<std::filesystem::path>(config),
                               o);
  }
};

}  // namespace

int main(int argc, char** argv) {
  naf::retain_freed_memory();

  CLI::App app{"NAF-block image restoration: training, evaluation and ablation"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "Train one variant");
  train_flags.attach(train);

  std::string eval_ckpt;
  std::optional<int> eval_subset;
  std::optional<std::string> eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--subset", eval_subset, "Number of test images");
  eval->add_option("--out", eval_out, "Directory for eval_results.csv");

  CommonFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every requested variant");
  ablate_flags.attach(ablate);

  std::string r_ckpt, r_in, r_out;
  auto* restore = app.add_subcommand("restore", "Restore one 32x32 PPM image");
  restore->add_option("checkpoint", r_ckpt, "Checkpoint file")->required();
  restore->add_option("input", r_in, "Input image (binary PPM)")->required();
  restore->add_option("output", r_out, "Output image (binary PPM)")->required();

  std::string fault;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every op");
  gradcheck->add_option("--inject-fault", fault, "Corrupt the backward rule of OP")
      ->group("");

  std::string synth_out = "data/cifar-10-batches-bin";
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand(
      "synth-data", "Write a synthetic dataset in the CIFAR-10 binary layout");
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--seed", synth_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return naf::cmd_train(train_flags.resolve(), std::cout, std::cerr);
    if (*eval) {
      std::optional<std::filesystem::path> dir;
      if (eval_out) dir = *eval_out;
      return naf::cmd_eval(eval_ckpt, eval_subset, dir, std::cout, std::cerr);
    }
    if (*ablate) return naf::cmd_ablate(ablate_flags.resolve(), std::cout, std::cerr);
    if (*restore) return naf::cmd_restore(r_ckpt, r_in, r_out, std::cout, std::cerr);
    if (*gradcheck) return naf::cmd_gradcheck(fault, std::cout, std::cerr);
    if (*synth) return naf::cmd_synth_data(synth_out, synth_seed, std::cout);
  } catch (const naf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const naf::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
