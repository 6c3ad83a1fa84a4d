#include "sparselab/continual.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "sparselab/checkpoint.hpp"

namespace sparselab {

nlohmann::json continual_config_to_json(const ContinualConfig& cfg) {
  const char* optim = "sgd";
  switch (cfg.train.optimizer.kind) {
    case OptimKind::Sgd: optim = "sgd"; break;
    case OptimKind::Momentum: optim = "momentum"; break;
    case OptimKind::Nesterov: optim = "nesterov"; break;
    case OptimKind::Adam: optim = "adam"; break;
  }
  return {
      {"mode", to_string(cfg.train.mode)},
      {"alpha", cfg.train.alpha},
      {"optimizer", optim},
      {"momentum", cfg.train.optimizer.momentum},
      {"beta1", cfg.train.optimizer.beta1},
      {"beta2", cfg.train.optimizer.beta2},
      {"eps", cfg.train.optimizer.eps},
      {"lr", cfg.train.lr},
      {"batch_size", cfg.train.batch_size},
      {"widths", cfg.widths},
      {"steps_per_task", cfg.steps_per_task},
      {"retrain_steps", cfg.retrain_steps},
      {"gamma", cfg.gamma},
      {"keep_schedule", cfg.keep_schedule},
      {"scope", cfg.scope == PruneScope::Global ? "global" : "layerwise"},
      {"per_task_heads", cfg.per_task_heads},
      {"freeze_biases_after_first", cfg.freeze_biases_after_first},
      {"reinitialise_pruned", cfg.reinitialise_pruned},
  };
}

ContinualConfig continual_config_from_json(const nlohmann::json& j) {
  ContinualConfig cfg;
  cfg.train.mode = param_mode_from_string(j.at("mode").get<std::string>());
  cfg.train.alpha = j.at("alpha").get<double>();
  const auto optim = j.at("optimizer").get<std::string>();
  if (optim == "sgd") cfg.train.optimizer.kind = OptimKind::Sgd;
  else if (optim == "momentum") cfg.train.optimizer.kind = OptimKind::Momentum;
  else if (optim == "nesterov") cfg.train.optimizer.kind = OptimKind::Nesterov;
  else if (optim == "adam") cfg.train.optimizer.kind = OptimKind::Adam;
  else throw ConfigError("unknown optimizer: " + optim);
  cfg.train.optimizer.momentum = j.value("momentum", 0.9);
  cfg.train.optimizer.beta1 = j.value("beta1", 0.9);
  cfg.train.optimizer.beta2 = j.value("beta2", 0.999);
  cfg.train.optimizer.eps = j.value("eps", 1e-8);
  cfg.train.lr = j.at("lr").get<double>();
  cfg.train.batch_size = j.at("batch_size").get<std::size_t>();
  cfg.widths = j.at("widths").get<std::vector<std::size_t>>();
  cfg.steps_per_task = j.at("steps_per_task").get<std::size_t>();
  cfg.retrain_steps = j.at("retrain_steps").get<std::size_t>();
  cfg.gamma = j.at("gamma").get<double>();
  cfg.keep_schedule = j.at("keep_schedule").get<std::vector<double>>();
  cfg.scope = j.at("scope").get<std::string>() == "global" ? PruneScope::Global
                                                           : PruneScope::Layerwise;
  cfg.per_task_heads = j.at("per_task_heads").get<bool>();
  cfg.freeze_biases_after_first = j.at("freeze_biases_after_first").get<bool>();
  cfg.reinitialise_pruned = j.value("reinitialise_pruned", true);
  return cfg;
}

ContinualState::ContinualState(const ContinualConfig& cfg, Rng init_rng) : cfg_(cfg) {
  if (!std::is_sorted(cfg_.keep_schedule.begin(), cfg_.keep_schedule.end())) {
    throw ConfigError("keep schedule must be ascending");
  }
  net_ = make_network_for_mode(cfg_.widths, cfg_.train.mode, cfg_.train.alpha);
  init_glorot_gaussian(net_, init_rng);
  rebuild_backward_free();
}

bool ContinualState::layer_maskable(std::size_t l) const {
  return !(cfg_.per_task_heads && l == head_layer());
}

std::vector<std::uint8_t> ContinualState::bias_trainable_for(std::size_t task_index) const {
  std::vector<std::uint8_t> flags(net_.layers.size(), 1);
  if (cfg_.freeze_biases_after_first && task_index > 0) {
    for (std::size_t l = 0; l < flags.size(); ++l) {
      flags[l] = (cfg_.per_task_heads && l == head_layer()) ? 1 : 0;
    }
  }
  return flags;
}

void ContinualState::rebuild_backward_free() {
  backward_free_.assign(net_.layers.size(), Tensor());
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    if (!layer_maskable(l)) continue;
    Tensor bits = Tensor::zeros_like(net_.layers[l].weight);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      bool covered = false;
      for (const TaskRecord& rec : tasks_) {
        if (rec.mask[l].bits[i] != 0.0) {
          covered = true;
          break;
        }
      }
      bits[i] = covered ? 0.0 : 1.0;
    }
    backward_free_[l] = std::move(bits);
  }
}

void ContinualState::train_task(const Dataset& train_data, Rng& rng) {
  if (train_data.count() == 0) throw DataError("train_task: empty task data");
  const std::size_t task_index = tasks_.size();
  if (cfg_.per_task_heads && task_index > 0) {
    // fresh head for the new task; the previous one lives in its snapshot
    Layer& head = net_.layers[head_layer()];
    const double std = std::sqrt(2.0 / static_cast<double>(head.fan_in() + head.fan_out()));
    Tensor theta = sample_gaussian(rng, head.fan_in(), head.fan_out(), 0.0, std);
    head.weight = head.is_powerprop() ? powerprop::psi_inverse(theta, head.alpha)
                                      : std::move(theta);
    head.bias = Tensor::zeros(head.fan_out());
  }
  Trainer trainer(net_, cfg_.train);  // optimizer slots reset at the task switch
  const auto bias_flags = bias_trainable_for(task_index);
  for (std::size_t s = 0; s < cfg_.steps_per_task; ++s) {
    trainer.step(sample_batch(train_data, cfg_.train.batch_size, rng,
                              static_cast<int>(task_index)),
                 &backward_free_, &bias_flags);
  }
}

MaskSet ContinualState::task_mask_at(double keep_fraction) const {
  std::vector<Tensor> weights;
  std::vector<std::size_t> which;
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    if (!layer_maskable(l)) continue;
    weights.push_back(net_.layers[l].effective_weight());
    which.push_back(l);
  }
  MaskSet partial = magnitude_mask(weights, keep_fraction, cfg_.scope, 1.0);
  MaskSet full(net_.layers.size());
  for (std::size_t i = 0; i < which.size(); ++i) full[which[i]] = std::move(partial[i]);
  return full;
}

ContinualState::SearchResult ContinualState::sparsity_search(const Dataset& validation) const {
  if (cfg_.keep_schedule.empty()) throw ConfigError("sparsity_search: empty keep schedule");
  if (validation.count() == 0) throw DataError("sparsity_search: empty validation set");
  const double dense = accuracy(net_, validation.images, validation.labels);
  SearchResult best;
  bool have_any = false;
  for (std::size_t l = cfg_.keep_schedule.size(); l-- > 0;) {
    const double keep = cfg_.keep_schedule[l];
    MaskSet candidate = task_mask_at(keep);
    const double sparse =
        accuracy(apply_mask(net_, candidate), validation.images, validation.labels);
    const bool passes = sparse >= cfg_.gamma * dense;
    if (!have_any) {
      // densest entry is the fallback even if it misses the target
      best = {keep, candidate, dense, sparse, !passes};
      have_any = true;
    }
    if (!passes) break;
    best = {keep, std::move(candidate), dense, sparse, false};
  }
  return best;
}

void ContinualState::reinitialise_free_weights(Rng& rng) {
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    if (backward_free_[l].size() == 0) continue;
    Layer& layer = net_.layers[l];
    const double std = std::sqrt(2.0 / static_cast<double>(layer.fan_in() + layer.fan_out()));
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      if (backward_free_[l][i] != 1.0) continue;
      const double theta = std * rng.next_gaussian();
      layer.weight[i] =
          layer.is_powerprop() ? powerprop::psi_inverse(theta, layer.alpha) : theta;
    }
  }
}

void ContinualState::retrain_within_mask(const TaskRecord& record, const MaskBits& free_old,
                                         const Dataset& data, Rng& rng) {
  // Forward passes see phi ⊙ mask: weights outside the task mask are zeroed
  // and restored afterwards. Gradients are confined to positions that are in
  // the mask and were still free before this task claimed them.
  std::vector<std::vector<std::pair<std::size_t, double>>> stash(net_.layers.size());
  MaskBits retrain_mask(net_.layers.size());
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    if (record.mask[l].bits.size() == 0) continue;
    Layer& layer = net_.layers[l];
    retrain_mask[l] = Tensor::zeros_like(layer.weight);
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      if (record.mask[l].bits[i] == 0.0) {
        stash[l].push_back({i, layer.weight[i]});
        layer.weight[i] = 0.0;
      } else if (free_old[l].size() == 0 || free_old[l][i] != 0.0) {
        retrain_mask[l][i] = 1.0;
      }
    }
  }
  Trainer trainer(net_, cfg_.train);
  const auto bias_flags = bias_trainable_for(tasks_.size() - 1);
  for (std::size_t s = 0; s < cfg_.retrain_steps; ++s) {
    trainer.step(sample_batch(data, cfg_.train.batch_size, rng), &retrain_mask, &bias_flags);
  }
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    for (const auto& [i, v] : stash[l]) net_.layers[l].weight[i] = v;
  }
}

void ContinualState::finish_task(const SearchResult& found, const Dataset& retrain_data,
                                 Rng& rng) {
  const MaskBits free_old = backward_free_;
  TaskRecord record;
  record.mask = found.mask;
  record.keep_fraction = found.keep_fraction;
  record.warning = found.warning;
  record.dense_performance = found.dense_performance;
  record.sparse_performance = found.sparse_performance;
  tasks_.push_back(std::move(record));
  rebuild_backward_free();
  if (cfg_.reinitialise_pruned) reinitialise_free_weights(rng);
  if (cfg_.retrain_steps > 0 && retrain_data.count() > 0) {
    retrain_within_mask(tasks_.back(), free_old, retrain_data, rng);
  }
  if (cfg_.per_task_heads) {
    tasks_.back().head_weight = net_.layers[head_layer()].weight;
    tasks_.back().head_bias = net_.layers[head_layer()].bias;
  }
}

Network ContinualState::masked_network(std::size_t task_id) const {
  if (task_id >= tasks_.size()) throw ConfigError("unknown task id");
  const TaskRecord& record = tasks_[task_id];
  Network masked = apply_mask(net_, record.mask);
  if (cfg_.per_task_heads) {
    masked.layers[head_layer()].weight = record.head_weight;
    masked.layers[head_layer()].bias = record.head_bias;
  }
  return masked;
}

double ContinualState::evaluate_task(std::size_t task_id, const Dataset& data) const {
  return accuracy(masked_network(task_id), data.images, data.labels);
}

double ContinualState::protected_fraction() const {
  std::size_t total = 0, covered = 0;
  for (std::size_t l = 0; l < backward_free_.size(); ++l) {
    const Tensor& bits = backward_free_[l];
    total += bits.size();
    for (std::size_t i = 0; i < bits.size(); ++i) covered += bits[i] == 0.0 ? 1 : 0;
  }
  return total == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total);
}

InferenceEngine::InferenceEngine(const ContinualState& state) : state_(state) {
  theta_.resize(state_.net_.layers.size());
  for (std::size_t l = 0; l < state_.net_.layers.size(); ++l) {
    if (state_.layer_maskable(l)) theta_[l] = state_.net_.layers[l].effective_weight();
  }
  if (state_.cfg_.per_task_heads) {
    const Layer& head = state_.net_.layers.back();
    for (const TaskRecord& rec : state_.tasks_) {
      head_theta_.push_back(head.is_powerprop() ? powerprop::psi(rec.head_weight, head.alpha)
                                                : rec.head_weight);
    }
  }
}

const Network& InferenceEngine::mixture_for(const std::vector<std::size_t>& candidates) {
  const auto hit = mixtures_.find(candidates);
  if (hit != mixtures_.end()) return hit->second;
  if (mixtures_.size() > 64) mixtures_.clear();  // long task sequences: bound the memo

  const Network& net = state_.net_;
  const double pi = 1.0 / static_cast<double>(candidates.size());
  Network mix;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    Layer ml;
    ml.activation = layer.activation;
    ml.parameterisation = Parameterisation::Plain;  // mixture lives in effective space
    ml.alpha = 1.0;
    if (!state_.layer_maskable(l)) {
      ml.weight = Tensor::zeros(layer.fan_in(), layer.fan_out());
      ml.bias = Tensor::zeros(layer.fan_out());
      for (std::size_t t : candidates) {
        const Tensor& head_eff = head_theta_[t];
        for (std::size_t i = 0; i < ml.weight.size(); ++i) ml.weight[i] += pi * head_eff[i];
        for (std::size_t i = 0; i < ml.bias.size(); ++i) {
          ml.bias[i] += pi * state_.tasks_[t].head_bias[i];
        }
      }
    } else {
      Tensor combined = Tensor::zeros_like(theta_[l]);
      for (std::size_t t : candidates) {
        const Tensor& bits = state_.tasks_[t].mask[l].bits;
        for (std::size_t i = 0; i < combined.size(); ++i) combined[i] += pi * bits[i];
      }
      for (std::size_t i = 0; i < combined.size(); ++i) combined[i] *= theta_[l][i];
      ml.weight = std::move(combined);
      ml.bias = layer.bias;
    }
    mix.layers.push_back(std::move(ml));
  }
  return mixtures_.emplace(candidates, std::move(mix)).first->second;
}

namespace {

// d(mean entropy)/dlogits for a batch of rows, computed from log-probs so it
// stays finite even when probabilities underflow.
double entropy_and_grad(const Tensor& logits, Tensor* dlogits) {
  const std::size_t rows = logits.rows(), classes = logits.cols();
  double mean_entropy = 0.0;
  std::vector<double> logp(classes);
  for (std::size_t r = 0; r < rows; ++r) {
    double max_logit = logits(r, 0);
    for (std::size_t c = 1; c < classes; ++c) max_logit = std::max(max_logit, logits(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(logits(r, c) - max_logit);
    const double lse = max_logit + std::log(sum);
    double h = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      logp[c] = logits(r, c) - lse;
      h -= std::exp(logp[c]) * logp[c];
    }
    mean_entropy += h;
    if (dlogits != nullptr) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = std::exp(logp[c]);
        (*dlogits)(r, c) = -p * (logp[c] + h) / static_cast<double>(rows);
      }
    }
  }
  return mean_entropy / static_cast<double>(rows);
}

double tensor_dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

InferenceResult InferenceEngine::infer(const Tensor& inputs) {
  const auto& tasks = state_.tasks_;
  if (tasks.empty()) throw ConfigError("infer_task: no tasks stored");
  InferenceResult result;
  std::vector<std::size_t> candidates(tasks.size());
  std::iota(candidates.begin(), candidates.end(), 0);
  if (candidates.size() == 1) return result;  // task 0, empty trace

  while (candidates.size() > 1) {
    std::vector<double> scores(candidates.size(), 0.0);
    bool ok = true;
    try {
      const Network& mix = mixture_for(candidates);
      ForwardTrace trace = forward_trace(mix, inputs);
      Tensor dlogits = Tensor::zeros_like(trace.preacts.back());
      const double entropy = entropy_and_grad(trace.preacts.back(), &dlogits);
      if (!std::isfinite(entropy)) throw NumericalError("non-finite mixture entropy");
      Gradients grads = backward_from_logit_grad(mix, trace, dlogits);
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        const TaskRecord& rec = tasks[candidates[c]];
        double dh_dpi = 0.0;
        for (std::size_t l = 0; l < mix.layers.size(); ++l) {
          if (!state_.layer_maskable(l)) {
            dh_dpi += tensor_dot(grads.weight_theta[l], head_theta_[candidates[c]]);
            dh_dpi += tensor_dot(grads.bias[l], rec.head_bias);
          } else {
            // d(mixture weight)/d pi_t = theta ⊙ mask_t
            const Tensor& bits = rec.mask[l].bits;
            const Tensor& g = grads.weight_theta[l];
            for (std::size_t i = 0; i < g.size(); ++i) dh_dpi += g[i] * theta_[l][i] * bits[i];
          }
        }
        scores[c] = -dh_dpi;
      }
    } catch (const NumericalError&) {
      ok = false;
    }
    if (!ok) {
      // degenerate logits: fall back to each candidate's own masked entropy,
      // eliminating the highest-entropy half
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        Tensor logits = forward(state_.masked_network(candidates[c]), inputs);
        scores[c] = -entropy_and_grad(logits, nullptr);
      }
    }
    result.trace.push_back({candidates, scores});

    const std::size_t drop = candidates.size() / 2;
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] < scores[b];
      return candidates[a] < candidates[b];
    });
    std::vector<bool> eliminated(candidates.size(), false);
    for (std::size_t i = 0; i < drop; ++i) eliminated[order[i]] = true;
    std::vector<std::size_t> survivors;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (!eliminated[c]) survivors.push_back(candidates[c]);
    }
    candidates = std::move(survivors);
  }
  result.predicted_task = candidates[0];
  return result;
}

InferenceResult ContinualState::infer_task(const Tensor& inputs) const {
  InferenceEngine engine(*this);
  return engine.infer(inputs);
}

namespace {

constexpr char kArchiveMagic[8] = {'S', 'L', 'M', 'A', 'S', 'K', '0', '1'};

void append_tensor_payload(std::vector<unsigned char>& payload, const Tensor& t) {
  const auto* raw = reinterpret_cast<const unsigned char*>(t.data());
  payload.insert(payload.end(), raw, raw + t.size() * sizeof(double));
}

}  // namespace

void ContinualState::save(const std::filesystem::path& dir, const nlohmann::json& meta) const {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "model.ckpt", net_, meta);

  nlohmann::json header;
  header["kind"] = "task-mask-archive";
  header["config"] = continual_config_to_json(cfg_);
  header["tasks"] = tasks_.size();
  header["meta"] = meta;
  header["task_meta"] = nlohmann::json::array();
  for (const TaskRecord& rec : tasks_) {
    header["task_meta"].push_back({{"keep_fraction", rec.keep_fraction},
                                   {"warning", rec.warning},
                                   {"dense_performance", rec.dense_performance},
                                   {"sparse_performance", rec.sparse_performance}});
  }

  // payload: per task the mask bits over maskable layers in layer order,
  // packed LSB-first and padded to a byte; head snapshots follow as raw
  // doubles when per-task heads are on
  std::vector<unsigned char> payload;
  for (const TaskRecord& rec : tasks_) {
    unsigned char current = 0;
    int filled = 0;
    for (std::size_t l = 0; l < net_.layers.size(); ++l) {
      if (rec.mask[l].bits.size() == 0) continue;
      for (std::size_t i = 0; i < rec.mask[l].bits.size(); ++i) {
        if (rec.mask[l].bits[i] != 0.0) current |= static_cast<unsigned char>(1u << filled);
        if (++filled == 8) {
          payload.push_back(current);
          current = 0;
          filled = 0;
        }
      }
    }
    if (filled != 0) payload.push_back(current);
  }
  if (cfg_.per_task_heads) {
    for (const TaskRecord& rec : tasks_) {
      append_tensor_payload(payload, rec.head_weight);
      append_tensor_payload(payload, rec.head_bias);
    }
  }
  write_container(dir / "tasks.masks", kArchiveMagic, header, payload);
}

ContinualState ContinualState::load(const std::filesystem::path& dir) {
  auto [header, payload] = read_container(dir / "tasks.masks", kArchiveMagic);
  if (header.value("kind", "") != "task-mask-archive") {
    throw DataError("not a task-mask archive: " + (dir / "tasks.masks").string());
  }
  ContinualState state(continual_config_from_json(header.at("config")));
  state.net_ = load_checkpoint(dir / "model.ckpt");
  const auto task_count = header.at("tasks").get<std::size_t>();

  std::size_t offset = 0;
  for (std::size_t t = 0; t < task_count; ++t) {
    TaskRecord rec;
    const auto& jmeta = header.at("task_meta").at(t);
    rec.keep_fraction = jmeta.at("keep_fraction").get<double>();
    rec.warning = jmeta.at("warning").get<bool>();
    rec.dense_performance = jmeta.at("dense_performance").get<double>();
    rec.sparse_performance = jmeta.at("sparse_performance").get<double>();
    rec.mask.resize(state.net_.layers.size());
    int filled = 0;
    for (std::size_t l = 0; l < state.net_.layers.size(); ++l) {
      if (!state.layer_maskable(l)) continue;
      Tensor bits = Tensor::zeros_like(state.net_.layers[l].weight);
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (offset >= payload.size()) throw DataError("truncated task-mask archive");
        bits[i] = (payload[offset] >> filled) & 1u ? 1.0 : 0.0;
        if (++filled == 8) {
          filled = 0;
          ++offset;
        }
      }
      rec.mask[l] = Mask{std::move(bits)};
    }
    if (filled != 0) ++offset;  // per-task byte padding
    state.tasks_.push_back(std::move(rec));
  }
  if (state.cfg_.per_task_heads) {
    const Layer& head = state.net_.layers.back();
    for (TaskRecord& rec : state.tasks_) {
      rec.head_weight = Tensor::zeros(head.fan_in(), head.fan_out());
      rec.head_bias = Tensor::zeros(head.fan_out());
      for (Tensor* t : {&rec.head_weight, &rec.head_bias}) {
        const std::size_t bytes = t->size() * sizeof(double);
        if (offset + bytes > payload.size()) throw DataError("truncated task-mask archive");
        std::memcpy(t->data(), payload.data() + offset, bytes);
        offset += bytes;
      }
    }
  }
  state.rebuild_backward_free();
  return state;
}

}  // namespace sparselab
