#include "sparselab/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "sparselab/checkpoint.hpp"
#include "sparselab/report.hpp"

namespace sparselab {

std::filesystem::path synthetic_cache_dir(const RunConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "synthetic-data";
}

namespace {

SyntheticDigitsConfig synth_config(const RunConfig& cfg) {
  SyntheticDigitsConfig sc;
  sc.train_count = cfg.synth_train;
  sc.test_count = cfg.synth_test;
  sc.seed = cfg.synth_seed;
  return sc;
}

bool has_mnist_files(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / "train-images-idx3-ubyte") ||
         std::filesystem::exists(dir / "train-images-idx3-ubyte.gz");
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg) {
  validate(cfg);
  const std::filesystem::path dir =
      cfg.data_dir.empty() ? synthetic_cache_dir(cfg) : std::filesystem::path(cfg.data_dir);
  generate_synthetic_idx(dir, synth_config(cfg));
  write_provenance(dir, to_json(cfg), "gen-data");
}

DataBundle resolve_data(const RunConfig& cfg) {
  std::filesystem::path dir;
  if (!cfg.data_dir.empty()) {
    dir = cfg.data_dir;
  } else {
    dir = synthetic_cache_dir(cfg);
    if (!has_mnist_files(dir)) generate_synthetic_idx(dir, synth_config(cfg));
  }
  return {load_mnist_dir(dir, false), load_mnist_dir(dir, true)};
}

TrainOutputs cmd_train(const RunConfig& cfg) {
  validate(cfg);
  const DataBundle data = resolve_data(cfg);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  Rng seed_rng(cfg.seed);
  Rng init_rng = seed_rng.fork(0);
  Rng data_rng = seed_rng.fork(1);

  TrainOptions opts = train_options(cfg);
  Network net = make_network_for_mode(cfg.widths, opts.mode, opts.alpha);
  init_glorot_gaussian(net, init_rng);

  nlohmann::json meta;
  meta["run_config"] = to_json(cfg);
  meta["git_describe"] = git_describe();

  TrainOutputs out;
  out.init_checkpoint = out_dir / "checkpoint-init.ckpt";
  save_checkpoint(out.init_checkpoint, net, meta);

  const auto metrics =
      run_supervised(net, data.train, data.test, opts, cfg.steps, cfg.eval_interval, data_rng);

  out.checkpoint = out_dir / "checkpoint.ckpt";
  save_checkpoint(out.checkpoint, net, meta);

  CsvWriter csv({"step", "train_loss", "test_accuracy"});
  for (const MetricRow& row : metrics) {
    csv.add_row({CsvWriter::num(row.step), CsvWriter::num(row.train_loss),
                 CsvWriter::num(row.test_accuracy)});
  }
  out.metrics_csv = out_dir / "metrics.csv";
  csv.write(out.metrics_csv);
  write_provenance(out_dir, to_json(cfg), "train");
  out.final_test_accuracy = metrics.empty() ? 0.0 : metrics.back().test_accuracy;
  return out;
}

SweepOutputs cmd_prune_sweep(const RunConfig& cfg, const std::filesystem::path& checkpoint) {
  validate(cfg);
  const DataBundle data = resolve_data(cfg);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  Network net = load_checkpoint(checkpoint);
  const std::filesystem::path init_path =
      checkpoint.parent_path() / "checkpoint-init.ckpt";
  Network init_net = load_checkpoint(init_path);

  const PruneScope scope = scope_from_string(cfg.scope);
  SweepOutputs out;
  out.reports = sparsity_sweep(net, data.test, cfg.keep_fractions, scope,
                               cfg.output_layer_factor);

  CsvWriter sweep_csv([&] {
    std::vector<std::string> header = {"keep_fraction", "test_accuracy"};
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      header.push_back("density_layer_" + std::to_string(l));
    }
    return header;
  }());
  for (const SparsityReport& report : out.reports) {
    std::vector<std::string> row = {CsvWriter::num(report.keep_fraction),
                                    CsvWriter::num(report.accuracy)};
    for (double d : report.layer_density) row.push_back(CsvWriter::num(d));
    sweep_csv.add_row(row);
  }
  out.sweep_csv = out_dir / "sweep.csv";
  sweep_csv.write(out.sweep_csv);

  // init-vs-final mask overlap at every fraction of the sweep
  CsvWriter overlap_csv([&] {
    std::vector<std::string> header = {"keep_fraction", "overlap"};
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      header.push_back("overlap_layer_" + std::to_string(l));
    }
    return header;
  }());
  for (double keep : cfg.keep_fractions) {
    MaskSet final_mask = magnitude_mask(net, keep, scope, cfg.output_layer_factor);
    MaskSet init_mask = magnitude_mask(init_net, keep, scope, cfg.output_layer_factor);
    const double pooled = mask_overlap(init_mask, final_mask);
    out.overlaps.push_back(pooled);
    std::vector<std::string> row = {CsvWriter::num(keep), CsvWriter::num(pooled)};
    for (double v : mask_overlap_per_layer(init_mask, final_mask)) {
      row.push_back(CsvWriter::num(v));
    }
    overlap_csv.add_row(row);
  }
  out.overlap_csv = out_dir / "overlap.csv";
  overlap_csv.write(out.overlap_csv);

  // weight distribution split by survival at the histogram fraction
  Rng hist_rng = Rng(cfg.seed).fork(2);
  MaskSet survived =
      magnitude_mask(net, cfg.histogram_keep_fraction, scope, cfg.output_layer_factor);
  WeightHistogram hist =
      weight_histogram(net, survived, cfg.histogram_sample, hist_rng, cfg.histogram_bins);
  if (hist.clamped) {
    std::fprintf(stderr, "warning: histogram sample clamped to %zu weights\n",
                 hist.sample_size);
  }
  CsvWriter hist_csv({"bin_lo", "bin_hi", "kept_count", "pruned_count"});
  for (std::size_t b = 0; b + 1 < hist.edges.size(); ++b) {
    hist_csv.add_row({CsvWriter::num(hist.edges[b]), CsvWriter::num(hist.edges[b + 1]),
                      CsvWriter::num(hist.kept[b]), CsvWriter::num(hist.pruned[b])});
  }
  out.histogram_csv = out_dir / "histogram.csv";
  hist_csv.write(out.histogram_csv);

  write_provenance(out_dir, to_json(cfg), "prune-sweep");
  return out;
}

namespace {

struct TaskData {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Builds one task's splits on demand; permuted task tensors are large, so
// callers should hold at most one instance at a time.
class TaskSource {
 public:
  TaskSource(const RunConfig& cfg, const DataBundle& data) : cfg_(cfg) {
    const std::size_t val =
        std::min(cfg.validation_count, std::max<std::size_t>(1, data.train.count() / 4));
    auto [head, tail] = carve_validation(data.train, val);
    train_base_ = std::move(head);
    validation_base_ = std::move(tail);
    test_base_ = data.test;
    if (cfg_.task_kind == "split") {
      split_train_ = make_split_tasks(train_base_);
      split_validation_ = make_split_tasks(validation_base_);
      split_test_ = make_split_tasks(test_base_);
    }
  }

  std::size_t task_count() const {
    return cfg_.task_kind == "split" ? split_train_.size() : cfg_.tasks;
  }

  TaskData task(std::size_t t) const {
    if (cfg_.task_kind == "split") {
      return {split_train_[t].data, split_validation_[t].data, split_test_[t].data};
    }
    return {make_permuted_task(train_base_, t, cfg_.permute_seed),
            make_permuted_task(validation_base_, t, cfg_.permute_seed),
            make_permuted_task(test_base_, t, cfg_.permute_seed)};
  }

  Dataset task_test(std::size_t t) const {
    if (cfg_.task_kind == "split") return split_test_[t].data;
    return make_permuted_task(test_base_, t, cfg_.permute_seed);
  }

 private:
  RunConfig cfg_;
  Dataset train_base_, validation_base_, test_base_;
  std::vector<SplitTask> split_train_, split_validation_, split_test_;
};

}  // namespace

ContinualOutputs cmd_continual(const RunConfig& cfg) {
  validate(cfg);
  const DataBundle data = resolve_data(cfg);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  TaskSource source(cfg, data);
  const std::size_t task_count = std::min<std::size_t>(cfg.tasks, source.task_count());

  ContinualState state(continual_config(cfg), Rng(cfg.seed).fork(0));

  ContinualOutputs out;
  for (std::size_t t = 0; t < task_count; ++t) {
    Rng task_rng = Rng(cfg.seed).fork(100 + t);
    {
      const TaskData td = source.task(t);
      state.train_task(td.train, task_rng);
      const auto found = state.sparsity_search(td.validation);
      if (found.warning) {
        std::fprintf(stderr,
                     "warning: task %zu missed gamma*dense even at keep %.3f\n", t,
                     found.keep_fraction);
      }
      state.finish_task(found, td.train, task_rng);
      out.chosen_keep.push_back(found.keep_fraction);
    }
    std::vector<double> row;
    double sum = 0.0;
    for (std::size_t j = 0; j <= t; ++j) {
      const double acc = state.evaluate_task(j, source.task_test(j));
      row.push_back(acc);
      sum += acc;
    }
    out.average_accuracy.push_back(sum / static_cast<double>(row.size()));
    out.protected_fraction.push_back(state.protected_fraction());
    out.accuracy_matrix.push_back(std::move(row));
  }

  CsvWriter matrix_csv([&] {
    std::vector<std::string> header = {"after_task"};
    for (std::size_t j = 0; j < task_count; ++j) header.push_back("task_" + std::to_string(j));
    return header;
  }());
  for (std::size_t i = 0; i < out.accuracy_matrix.size(); ++i) {
    std::vector<std::string> row = {CsvWriter::num(i)};
    for (std::size_t j = 0; j < task_count; ++j) {
      row.push_back(j < out.accuracy_matrix[i].size()
                        ? CsvWriter::num(out.accuracy_matrix[i][j])
                        : std::string());
    }
    matrix_csv.add_row(row);
  }
  out.matrix_csv = out_dir / "accuracy-matrix.csv";
  matrix_csv.write(out.matrix_csv);

  CsvWriter curves_csv(
      {"after_task", "average_accuracy", "protected_fraction", "chosen_keep_fraction"});
  for (std::size_t i = 0; i < out.average_accuracy.size(); ++i) {
    curves_csv.add_row({CsvWriter::num(i), CsvWriter::num(out.average_accuracy[i]),
                        CsvWriter::num(out.protected_fraction[i]),
                        CsvWriter::num(out.chosen_keep[i])});
  }
  out.curves_csv = out_dir / "curves.csv";
  curves_csv.write(out.curves_csv);

  nlohmann::json meta;
  meta["run_config"] = to_json(cfg);
  meta["git_describe"] = git_describe();
  out.state_dir = out_dir / "state";
  state.save(out.state_dir, meta);
  write_provenance(out_dir, to_json(cfg), "continual");
  return out;
}

InferOutputs cmd_infer_task(const RunConfig& cfg, const std::filesystem::path& state_dir) {
  validate(cfg);
  const DataBundle data = resolve_data(cfg);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  ContinualState state = ContinualState::load(state_dir);
  InferenceEngine engine(state);
  TaskSource source(cfg, data);
  const std::size_t task_count = state.tasks_seen();

  // per-task masked networks for the class prediction that follows inference
  std::vector<Network> masked;
  for (std::size_t t = 0; t < task_count; ++t) masked.push_back(state.masked_network(t));

  InferOutputs out;
  CsvWriter csv({"true_task", "example", "predicted_task", "rounds", "true_label",
                 "predicted_label"});
  std::size_t task_hits = 0, class_hits = 0;
  for (std::size_t t = 0; t < task_count; ++t) {
    const Dataset test = source.task_test(t);
    for (std::size_t begin = 0; begin < test.count(); begin += cfg.infer_batch) {
      const std::size_t end = std::min(begin + cfg.infer_batch, test.count());
      Tensor x = Tensor::zeros(end - begin, test.pixels());
      std::copy(test.images.data() + begin * test.pixels(),
                test.images.data() + end * test.pixels(), x.data());
      const InferenceResult r = engine.infer(x);
      out.max_rounds = std::max(out.max_rounds, r.trace.size());
      const std::vector<int> labels = predict(masked[r.predicted_task], x);
      for (std::size_t i = begin; i < end; ++i) {
        ++out.examples;
        const bool task_ok = r.predicted_task == t;
        const bool class_ok = labels[i - begin] == test.labels[i];
        task_hits += task_ok;
        class_hits += class_ok;
        csv.add_row({CsvWriter::num(t), CsvWriter::num(i), CsvWriter::num(r.predicted_task),
                     CsvWriter::num(r.trace.size()), CsvWriter::num(std::size_t(test.labels[i])),
                     CsvWriter::num(std::size_t(labels[i - begin]))});
      }
    }
  }
  out.task_id_accuracy = static_cast<double>(task_hits) / static_cast<double>(out.examples);
  out.class_accuracy = static_cast<double>(class_hits) / static_cast<double>(out.examples);
  out.report_csv = out_dir / "inference.csv";
  csv.write(out.report_csv);
  write_provenance(out_dir, to_json(cfg), "infer-task");
  return out;
}

AppendixAOutputs cmd_appendix_a(const RunConfig& cfg) {
  validate(cfg);
  const DataBundle data = resolve_data(cfg);
  const std::filesystem::path out_dir = cfg.out_dir;
  std::filesystem::create_directories(out_dir);

  AppendixAOutputs out;
  out.modes = {"baseline", "powerprop-naive", "powerprop-virtual-target"};
  const PruneScope scope = scope_from_string(cfg.scope);
  for (const std::string& mode : out.modes) {
    RunConfig variant = cfg;
    variant.mode = mode;
    TrainOptions opts = train_options(variant);
    Network net = make_network_for_mode(cfg.widths, opts.mode, opts.alpha);
    Rng seed_rng(cfg.seed);
    Rng init_rng = seed_rng.fork(0);
    Rng data_rng = seed_rng.fork(1);  // identical batch order across the three variants
    init_glorot_gaussian(net, init_rng);
    const auto metrics =
        run_supervised(net, data.train, data.test, opts, cfg.steps, cfg.eval_interval, data_rng);
    out.dense_accuracy.push_back(metrics.back().test_accuracy);
    out.sweeps.push_back(sparsity_sweep(net, data.test, cfg.keep_fractions, scope,
                                        cfg.output_layer_factor));
  }

  CsvWriter csv({"keep_fraction", "baseline_adam", "powerprop_naive_adam",
                 "powerprop_virtual_target_adam"});
  for (std::size_t f = 0; f < cfg.keep_fractions.size(); ++f) {
    csv.add_row({CsvWriter::num(cfg.keep_fractions[f]),
                 CsvWriter::num(out.sweeps[0][f].accuracy),
                 CsvWriter::num(out.sweeps[1][f].accuracy),
                 CsvWriter::num(out.sweeps[2][f].accuracy)});
  }
  out.csv = out_dir / "appendix-a.csv";
  csv.write(out.csv);
  write_provenance(out_dir, to_json(cfg), "appendix-a");
  return out;
}

}  // namespace sparselab
