#include <cstdio>
#include <fstream>
#include <string>

#include "CLI11.hpp"
#include "sparselab/experiments.hpp"
#include "sparselab/report.hpp"

namespace {

using sparselab::RunConfig;

struct CommonFlags {
  std::string preset;
  std::string config_file;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::string mode;
  std::string data_dir;
  std::string out_dir;
  std::string scope;
  std::int64_t steps = -1;
  std::int64_t tasks = -1;
  std::int64_t steps_per_task = -1;
  std::int64_t retrain_steps = -1;
  double gamma = -1.0;
  double lr = 0.0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--preset", flags.preset, "named preset")
      ->check(CLI::IsMember(sparselab::preset_names()));
  cmd->add_option("--config", flags.config_file, "JSON config file");
  cmd->add_option("--seed", flags.seed, "run seed");
  cmd->add_option("--alpha", flags.alpha, "powerprop exponent");
  cmd->add_option("--mode", flags.mode,
                  "baseline | powerprop-naive | powerprop-virtual-target");
  cmd->add_option("--data-dir", flags.data_dir, "directory with IDX files");
  cmd->add_option("--out-dir", flags.out_dir, "output directory");
  cmd->add_option("--scope", flags.scope, "layerwise | global");
  cmd->add_option("--steps", flags.steps, "training steps");
  cmd->add_option("--tasks", flags.tasks, "number of tasks");
  cmd->add_option("--steps-per-task", flags.steps_per_task, "steps per task");
  cmd->add_option("--retrain-steps", flags.retrain_steps, "retraining steps per task");
  cmd->add_option("--gamma", flags.gamma, "target performance factor");
  cmd->add_option("--lr", flags.lr, "learning rate");
}

RunConfig build_config(const CLI::App* cmd, const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.preset.empty()) cfg = sparselab::preset(flags.preset);
  if (!flags.config_file.empty()) {
    // config file overrides the preset, flags override both
    nlohmann::json merged = sparselab::to_json(cfg);
    std::ifstream in(flags.config_file);
    if (!in) throw sparselab::ConfigError("cannot open config file " + flags.config_file);
    nlohmann::json file_json;
    try {
      in >> file_json;
    } catch (const nlohmann::json::exception& e) {
      throw sparselab::ConfigError("cannot parse config file: " + std::string(e.what()));
    }
    merged.update(file_json);
    cfg = sparselab::run_config_from_json(merged);
  }
  if (cmd->count("--seed") > 0) cfg.seed = flags.seed;
  if (cmd->count("--alpha") > 0) cfg.alpha = flags.alpha;
  if (cmd->count("--mode") > 0) cfg.mode = flags.mode;
  if (cmd->count("--data-dir") > 0) cfg.data_dir = flags.data_dir;
  if (cmd->count("--out-dir") > 0) cfg.out_dir = flags.out_dir;
  if (cmd->count("--scope") > 0) cfg.scope = flags.scope;
  if (cmd->count("--steps") > 0) cfg.steps = static_cast<std::size_t>(flags.steps);
  if (cmd->count("--tasks") > 0) cfg.tasks = static_cast<std::size_t>(flags.tasks);
  if (cmd->count("--steps-per-task") > 0) {
    cfg.steps_per_task = static_cast<std::size_t>(flags.steps_per_task);
  }
  if (cmd->count("--retrain-steps") > 0) {
    cfg.retrain_steps = static_cast<std::size_t>(flags.retrain_steps);
  }
  if (cmd->count("--gamma") > 0) cfg.gamma = flags.gamma;
  if (cmd->count("--lr") > 0) cfg.lr = flags.lr;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparselab: powerprop training, magnitude pruning and continual learning"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string checkpoint_path, state_dir;

  CLI::App* gen = app.add_subcommand("gen-data", "write synthetic digit IDX files");
  add_common(gen, flags);

  CLI::App* train = app.add_subcommand("train", "train a classifier, write checkpoints");
  add_common(train, flags);

  CLI::App* sweep = app.add_subcommand("prune-sweep",
                                       "one-shot sparsity sweep of a trained checkpoint");
  add_common(sweep, flags);
  sweep->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();

  CLI::App* continual = app.add_subcommand("continual", "sequential task training");
  add_common(continual, flags);

  CLI::App* infer = app.add_subcommand("infer-task", "entropy-based task inference");
  add_common(infer, flags);
  infer->add_option("--state", state_dir, "continual state directory")->required();

  CLI::App* appendix = app.add_subcommand("appendix-a",
                                          "direct-vs-corrected optimizer comparison");
  add_common(appendix, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      sparselab::cmd_gen_data(build_config(gen, flags));
    } else if (train->parsed()) {
      const auto out = sparselab::cmd_train(build_config(train, flags));
      std::printf("final test accuracy %.4f\ncheckpoint %s\n", out.final_test_accuracy,
                  out.checkpoint.string().c_str());
    } else if (sweep->parsed()) {
      const auto out = sparselab::cmd_prune_sweep(build_config(sweep, flags), checkpoint_path);
      for (const auto& report : out.reports) {
        std::printf("keep %.3f accuracy %.4f\n", report.keep_fraction, report.accuracy);
      }
    } else if (continual->parsed()) {
      const auto out = sparselab::cmd_continual(build_config(continual, flags));
      std::printf("average accuracy after %zu tasks: %.4f\n", out.average_accuracy.size(),
                  out.average_accuracy.back());
      std::printf("protected fraction: %.4f\nstate %s\n", out.protected_fraction.back(),
                  out.state_dir.string().c_str());
    } else if (infer->parsed()) {
      const auto out = sparselab::cmd_infer_task(build_config(infer, flags), state_dir);
      std::printf("task-id accuracy %.4f class accuracy %.4f max rounds %zu\n",
                  out.task_id_accuracy, out.class_accuracy, out.max_rounds);
    } else if (appendix->parsed()) {
      const auto out = sparselab::cmd_appendix_a(build_config(appendix, flags));
      for (std::size_t m = 0; m < out.modes.size(); ++m) {
        std::printf("%s dense accuracy %.4f\n", out.modes[m].c_str(), out.dense_accuracy[m]);
      }
    }
  } catch (const sparselab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const sparselab::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const sparselab::NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
