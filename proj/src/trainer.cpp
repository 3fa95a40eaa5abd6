#include "gelgt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "gelgt/batch.hpp"
#include "gelgt/checkpoint.hpp"
#include "gelgt/errors.hpp"
#include "gelgt/metrics.hpp"
#include "gelgt/optimizer.hpp"

namespace gelgt {

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> gather(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (batch_size == 0 || eval_batch_size == 0) throw ConfigError("batch sizes must be positive");
  if (max_steps_per_epoch == 0) throw ConfigError("max_steps_per_epoch must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"weight_decay", c.weight_decay},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"max_steps_per_epoch", c.max_steps_per_epoch},
       {"warmup_steps", c.warmup_steps},
       {"rng_seed", c.rng_seed},
       {"eval_batch_size", c.eval_batch_size}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("lr", c.lr);
  get("weight_decay", c.weight_decay);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("max_steps_per_epoch", c.max_steps_per_epoch);
  get("warmup_steps", c.warmup_steps);
  get("rng_seed", c.rng_seed);
  get("eval_batch_size", c.eval_batch_size);
}

void prepare_dataset(Dataset& out, DatabaseSchema schema, TableData tables, const std::array<double, 3>& fractions) {
  out.schema = std::move(schema);
  out.tables = std::move(tables);
  out.graph = build_graph(out.schema, out.tables);
  out.features = build_features(out.schema, out.tables);
  out.target_table = out.schema.table_index(out.schema.task.target_table);
  out.targets = task_targets(out.schema, out.tables);
  out.seed_times = seed_times(out.schema, out.tables);
  out.seed_nodes.clear();
  for (std::size_t r = 0; r < out.targets.size(); ++r) out.seed_nodes.push_back(out.graph.node_of(out.target_table, r));
  out.split = temporal_split(std::span<const std::int64_t>(out.seed_times), fractions);
}

SampledSubgraph sample_row(const Dataset& data, std::size_t row, const Tensor& embeddings,
                           const SamplingOptions& options, std::uint64_t salt) {
  const NodeId seed = data.seed_nodes.at(row);
  const std::int64_t t = data.seed_times.at(row);
  Candidates c;
  if (options.random_stage1) {
    std::mt19937_64 rng(mix_seed(salt, row));
    c = random_sample(data.graph, seed, t, options.config, rng);
  } else {
    c = structural_sample(data.graph, seed, t, options.config);
  }
  SampledSubgraph sub = options.semantic_refinement ? semantic_refine(data.graph, c, embeddings, options.config)
                                                    : materialize(data.graph, c);
  check_subgraph(data.graph, sub);
  return sub;
}

namespace {

std::vector<double> predict_with(const GelGTModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                                 const Tensor& embeddings, const SamplingOptions& sampling, std::size_t batch_size,
                                 std::uint64_t salt) {
  std::vector<double> scores;
  scores.reserve(rows.size());
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const std::size_t end = std::min(rows.size(), start + batch_size);
    std::vector<SampledSubgraph> subs;
    for (std::size_t i = start; i < end; ++i) subs.push_back(sample_row(data, rows[i], embeddings, sampling, salt));
    const PackedBatch batch = pack(data.graph, subs);
    Tape tape(false);
    tape.set_grad_enabled(false);
    const Tensor& out = model.forward(tape, data.graph, batch).value();
    for (std::size_t i = 0; i < out.size(); ++i) scores.push_back(out[i]);
  }
  return scores;
}

}  // namespace

std::vector<double> predict(const GelGTModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                            const SamplingOptions& sampling, std::size_t batch_size, std::uint64_t salt) {
  const Tensor embeddings = model.encoders().embed_all(data.graph);
  return predict_with(model, data, rows, embeddings, sampling, batch_size, salt);
}

double task_metric(TaskKind kind, const std::vector<double>& scores, const std::vector<double>& targets) {
  return kind == TaskKind::binary_classification ? auc(scores, targets) : mae(scores, targets);
}

bool metric_improves(TaskKind kind, double candidate, double incumbent) {
  return kind == TaskKind::binary_classification ? candidate > incumbent : candidate < incumbent;
}

double evaluate(const GelGTModel& model, const Dataset& data, const std::vector<std::size_t>& rows,
                const SamplingOptions& sampling, std::size_t batch_size) {
  return task_metric(model.config().task, predict(model, data, rows, sampling, batch_size), gather(data.targets, rows));
}

TrainResult train(GelGTModel& model, const Dataset& data, const TrainOptions& options) {
  const TrainConfig& cfg = options.train;
  cfg.validate();
  options.sampling.config.validate();
  const TaskKind kind = model.config().task;

  std::ofstream log_file;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log_file.open(options.out_dir / "metrics.jsonl");
    if (!log_file) throw DataError("cannot write " + (options.out_dir / "metrics.jsonl").string());
  }

  const std::vector<double> val_targets = gather(data.targets, data.split.val);
  // Salt 0 is reserved for evaluation so val/test subgraphs never change
  // with the epoch under random Stage 1 sampling.
  auto validate_with = [&](const Tensor& embeddings) {
    return task_metric(kind,
                       predict_with(model, data, data.split.val, embeddings, options.sampling, cfg.eval_batch_size, 0),
                       val_targets);
  };

  TrainResult result;
  Tensor embeddings = model.encoders().embed_all(data.graph);
  result.best_val = validate_with(embeddings);
  ParameterSet best;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    best.add(model.params()[i].name, model.params()[i].value);
  }

  Adam adam(model.params());
  std::mt19937_64 shuffle_rng(cfg.rng_seed);
  std::vector<std::size_t> order = data.split.train;
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const std::size_t n_steps = std::min(cfg.max_steps_per_epoch, (order.size() + cfg.batch_size - 1) / cfg.batch_size);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t step = 0; step < n_steps; ++step) {
      const std::size_t start = step * cfg.batch_size;
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<SampledSubgraph> subs;
      std::vector<double> targets;
      for (std::size_t i = start; i < end; ++i) {
        subs.push_back(sample_row(data, order[i], embeddings, options.sampling, mix_seed(cfg.rng_seed, epoch)));
        targets.push_back(data.targets[order[i]]);
      }
      const PackedBatch batch = pack(data.graph, subs);

      ++global_step;
      Tape tape(true, mix_seed(cfg.rng_seed ^ 0x5eedULL, global_step));
      model.params().zero_grad();
      Var loss = model.loss(model.forward(tape, data.graph, batch), targets);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step + 1));
      }
      tape.backward(loss);
      adam.step(warmup_lr(cfg.lr, global_step, cfg.warmup_steps), cfg.weight_decay);
      loss_sum += value * static_cast<double>(targets.size());
      loss_count += targets.size();
    }

    // Refreshed once per epoch; reused by validation and the next epoch.
    embeddings = model.encoders().embed_all(data.graph);
    const double val = validate_with(embeddings);
    if (!std::isfinite(val)) throw NumericError("non-finite validation metric at epoch " + std::to_string(epoch));
    if (metric_improves(kind, val, result.best_val)) {
      result.best_val = val;
      result.best_epoch = epoch;
      best.copy_values_from(model.params());
    }

    nlohmann::json record = {{"epoch", epoch},
                             {"variant", options.variant},
                             {"train_loss", loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0},
                             {"val_metric", val},
                             {"eta", model.eta()},
                             {"mu_per_head", model.mu_per_head()},
                             {"sigma_per_head", model.sigma_per_head()}};
    if (log_file.is_open()) log_file << record.dump() << '\n' << std::flush;
    if (options.on_epoch) options.on_epoch(record);
    result.log.push_back(std::move(record));
  }

  model.params().copy_values_from(best);
  if (!options.out_dir.empty()) save_checkpoint(options.out_dir / "best", model.params());
  result.test_metric = evaluate(model, data, data.split.test, options.sampling, cfg.eval_batch_size);
  return result;
}

}  // namespace gelgt
