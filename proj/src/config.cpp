#include "sparselab/config.hpp"

#include <algorithm>
#include <fstream>

namespace sparselab {

std::vector<double> default_keep_schedule() {
  std::vector<double> schedule;
  for (int i = 1; i <= 14; ++i) schedule.push_back(i / 100.0);
  for (int i = 15; i <= 25; i += 5) schedule.push_back(i / 100.0);
  for (int i = 30; i <= 90; i += 10) schedule.push_back(i / 100.0);
  return schedule;
}

std::vector<std::string> preset_names() {
  return {"mnist-fig1", "mnist-fig1-desk", "appendix-a",    "appendix-a-desk",
          "permuted-long", "permuted-desk", "split-class-inc", "split-desk"};
}

RunConfig preset(const std::string& name) {
  RunConfig cfg;
  cfg.keep_schedule = default_keep_schedule();
  if (name == "mnist-fig1" || name == "mnist-fig1-desk") {
    cfg.widths = {784, 300, 100, 10};
    cfg.mode = "powerprop-virtual-target";
    cfg.alpha = 2.0;
    cfg.optimizer = "momentum";
    cfg.momentum = 0.9;
    cfg.lr = 0.0025;
    cfg.batch_size = 60;
    cfg.steps = name == "mnist-fig1" ? 50000 : 20000;
    cfg.scope = "layerwise";
    cfg.output_layer_factor = 0.5;
  } else if (name == "appendix-a" || name == "appendix-a-desk") {
    cfg.widths = {784, 300, 100, 10};
    cfg.mode = "powerprop-virtual-target";
    cfg.alpha = 3.0;
    cfg.optimizer = "adam";
    cfg.lr = 1e-3;
    cfg.batch_size = 60;
    cfg.steps = name == "appendix-a" ? 50000 : 20000;
    cfg.scope = "layerwise";
    cfg.output_layer_factor = 0.5;
  } else if (name == "permuted-long" || name == "permuted-desk") {
    cfg.task_kind = "permuted";
    cfg.mode = "powerprop-virtual-target";
    cfg.alpha = 1.5;
    cfg.optimizer = "sgd";
    cfg.lr = 0.05;
    cfg.batch_size = 64;
    cfg.gamma = 0.9;
    cfg.tasks = 10;
    cfg.scope = "global";
    cfg.per_task_heads = false;
    if (name == "permuted-long") {
      cfg.widths = {784, 1000, 1000, 10};
      cfg.steps_per_task = 50000;
      cfg.retrain_steps = 50000;
    } else {
      cfg.widths = {784, 300, 100, 10};
      cfg.steps_per_task = 10000;
      cfg.retrain_steps = 2500;
    }
  } else if (name == "split-class-inc" || name == "split-desk") {
    cfg.task_kind = "split";
    cfg.mode = "powerprop-virtual-target";
    cfg.alpha = 1.375;
    cfg.optimizer = "sgd";
    cfg.lr = 0.05;
    cfg.batch_size = 64;
    cfg.gamma = 0.99;
    cfg.tasks = 5;
    cfg.scope = "global";
    cfg.per_task_heads = true;
    if (name == "split-class-inc") {
      cfg.widths = {784, 1000, 1000, 10};
      cfg.steps_per_task = 50000;
      cfg.retrain_steps = 50000;
    } else {
      cfg.widths = {784, 300, 100, 10};
      cfg.steps_per_task = 4000;
      cfg.retrain_steps = 1000;
    }
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  return cfg;
}

void validate(const RunConfig& cfg) {
  if (cfg.widths.size() < 2) throw ConfigError("widths: need at least input and output");
  for (std::size_t w : cfg.widths) {
    if (w == 0) throw ConfigError("widths: zero-width layer");
  }
  param_mode_from_string(cfg.mode);  // throws on bad value
  if (cfg.mode != "baseline" && !(cfg.alpha >= 1.0 && cfg.alpha <= 5.0)) {
    throw ConfigError("alpha must be in [1, 5]");
  }
  if (cfg.optimizer != "sgd" && cfg.optimizer != "momentum" && cfg.optimizer != "nesterov" &&
      cfg.optimizer != "adam") {
    throw ConfigError("unknown optimizer: " + cfg.optimizer);
  }
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (cfg.scope != "layerwise" && cfg.scope != "global") {
    throw ConfigError("scope must be layerwise or global");
  }
  for (double f : cfg.keep_fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("keep fractions must be in (0, 1]");
  }
  if (!std::is_sorted(cfg.keep_fractions.rbegin(), cfg.keep_fractions.rend())) {
    throw ConfigError("keep fractions must be sorted descending");
  }
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
  if (cfg.task_kind != "permuted" && cfg.task_kind != "split") {
    throw ConfigError("task_kind must be permuted or split");
  }
  if (cfg.task_kind == "split" && cfg.tasks > 5) {
    throw ConfigError("split task sequences have at most 5 tasks");
  }
  if (cfg.tasks == 0) throw ConfigError("tasks must be positive");
  if (!cfg.keep_schedule.empty() &&
      !std::is_sorted(cfg.keep_schedule.begin(), cfg.keep_schedule.end())) {
    throw ConfigError("keep schedule must be ascending");
  }
  if (cfg.infer_batch == 0) throw ConfigError("infer_batch must be positive");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must be set");
}

nlohmann::json to_json(const RunConfig& cfg) {
  return {
      {"seed", cfg.seed},
      {"widths", cfg.widths},
      {"alpha", cfg.alpha},
      {"mode", cfg.mode},
      {"optimizer", cfg.optimizer},
      {"lr", cfg.lr},
      {"momentum", cfg.momentum},
      {"beta1", cfg.beta1},
      {"beta2", cfg.beta2},
      {"eps", cfg.eps},
      {"batch_size", cfg.batch_size},
      {"steps", cfg.steps},
      {"eval_interval", cfg.eval_interval},
      {"keep_fractions", cfg.keep_fractions},
      {"scope", cfg.scope},
      {"output_layer_factor", cfg.output_layer_factor},
      {"histogram_sample", cfg.histogram_sample},
      {"histogram_bins", cfg.histogram_bins},
      {"histogram_keep_fraction", cfg.histogram_keep_fraction},
      {"task_kind", cfg.task_kind},
      {"tasks", cfg.tasks},
      {"steps_per_task", cfg.steps_per_task},
      {"retrain_steps", cfg.retrain_steps},
      {"gamma", cfg.gamma},
      {"keep_schedule", cfg.keep_schedule},
      {"per_task_heads", cfg.per_task_heads},
      {"freeze_biases_after_first", cfg.freeze_biases_after_first},
      {"reinitialise_pruned", cfg.reinitialise_pruned},
      {"permute_seed", cfg.permute_seed},
      {"infer_batch", cfg.infer_batch},
      {"validation_count", cfg.validation_count},
      {"data_dir", cfg.data_dir},
      {"synth_train", cfg.synth_train},
      {"synth_test", cfg.synth_test},
      {"synth_seed", cfg.synth_seed},
      {"out_dir", cfg.out_dir},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.widths = j.value("widths", cfg.widths);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.mode = j.value("mode", cfg.mode);
    cfg.optimizer = j.value("optimizer", cfg.optimizer);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.eps = j.value("eps", cfg.eps);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.eval_interval = j.value("eval_interval", cfg.eval_interval);
    cfg.keep_fractions = j.value("keep_fractions", cfg.keep_fractions);
    cfg.scope = j.value("scope", cfg.scope);
    cfg.output_layer_factor = j.value("output_layer_factor", cfg.output_layer_factor);
    cfg.histogram_sample = j.value("histogram_sample", cfg.histogram_sample);
    cfg.histogram_bins = j.value("histogram_bins", cfg.histogram_bins);
    cfg.histogram_keep_fraction = j.value("histogram_keep_fraction", cfg.histogram_keep_fraction);
    cfg.task_kind = j.value("task_kind", cfg.task_kind);
    cfg.tasks = j.value("tasks", cfg.tasks);
    cfg.steps_per_task = j.value("steps_per_task", cfg.steps_per_task);
    cfg.retrain_steps = j.value("retrain_steps", cfg.retrain_steps);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.keep_schedule = j.value("keep_schedule", cfg.keep_schedule);
    cfg.per_task_heads = j.value("per_task_heads", cfg.per_task_heads);
    cfg.freeze_biases_after_first =
        j.value("freeze_biases_after_first", cfg.freeze_biases_after_first);
    cfg.reinitialise_pruned = j.value("reinitialise_pruned", cfg.reinitialise_pruned);
    cfg.permute_seed = j.value("permute_seed", cfg.permute_seed);
    cfg.infer_batch = j.value("infer_batch", cfg.infer_batch);
    cfg.validation_count = j.value("validation_count", cfg.validation_count);
    cfg.data_dir = j.value("data_dir", cfg.data_dir);
    cfg.synth_train = j.value("synth_train", cfg.synth_train);
    cfg.synth_test = j.value("synth_test", cfg.synth_test);
    cfg.synth_seed = j.value("synth_seed", cfg.synth_seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config file " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

OptimizerConfig optimizer_config(const RunConfig& cfg) {
  OptimizerConfig oc;
  if (cfg.optimizer == "sgd") oc.kind = OptimKind::Sgd;
  else if (cfg.optimizer == "momentum") oc.kind = OptimKind::Momentum;
  else if (cfg.optimizer == "nesterov") oc.kind = OptimKind::Nesterov;
  else if (cfg.optimizer == "adam") oc.kind = OptimKind::Adam;
  else throw ConfigError("unknown optimizer: " + cfg.optimizer);
  oc.momentum = cfg.momentum;
  oc.beta1 = cfg.beta1;
  oc.beta2 = cfg.beta2;
  oc.eps = cfg.eps;
  return oc;
}

TrainOptions train_options(const RunConfig& cfg) {
  TrainOptions opts;
  opts.mode = param_mode_from_string(cfg.mode);
  opts.alpha = cfg.alpha;
  opts.optimizer = optimizer_config(cfg);
  opts.lr = cfg.lr;
  opts.batch_size = cfg.batch_size;
  return opts;
}

ContinualConfig continual_config(const RunConfig& cfg) {
  ContinualConfig cc;
  cc.train = train_options(cfg);
  cc.widths = cfg.widths;
  cc.steps_per_task = cfg.steps_per_task;
  cc.retrain_steps = cfg.retrain_steps;
  cc.gamma = cfg.gamma;
  cc.keep_schedule = cfg.keep_schedule.empty() ? default_keep_schedule() : cfg.keep_schedule;
  cc.scope = scope_from_string(cfg.scope);
  cc.per_task_heads = cfg.per_task_heads;
  cc.freeze_biases_after_first = cfg.freeze_biases_after_first;
  cc.reinitialise_pruned = cfg.reinitialise_pruned;
  return cc;
}

PruneScope scope_from_string(const std::string& name) {
  if (name == "layerwise") return PruneScope::Layerwise;
  if (name == "global") return PruneScope::Global;
  throw ConfigError("scope must be layerwise or global");
}

}  // namespace sparselab
