// gelgt: generate, ingest, sample, train, eval, verify, ablate.
//
// Exit codes: 0 success, 1 verification failure (or other runtime error),
// 2 config/usage error, 3 numeric abort.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "gelgt/checkpoint.hpp"
#include "gelgt/errors.hpp"
#include "gelgt/oracles.hpp"
#include "gelgt/run.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gelgt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool no_gaussian_bias = false;
  bool no_semantic_refinement = false;
  bool no_gnn_branch = false;
  bool no_structural_sampling = false;
};

void add_config_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "run config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "overrides the config seed");
}

void add_ablation_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_flag("--no-gaussian-bias", a.no_gaussian_bias, "plain attention scores");
  cmd->add_flag("--no-semantic-refinement", a.no_semantic_refinement, "skip Stage 2");
  cmd->add_flag("--no-gnn-branch", a.no_gnn_branch, "attention branch only");
  cmd->add_flag("--no-structural-sampling", a.no_structural_sampling, "uniform random Stage 1");
}

RunConfig resolve(const CommonArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.seed) c.seed = *a.seed;
  c.ablations.no_gaussian_bias |= a.no_gaussian_bias;
  c.ablations.no_semantic_refinement |= a.no_semantic_refinement;
  c.ablations.no_gnn_branch |= a.no_gnn_branch;
  c.ablations.no_structural_sampling |= a.no_structural_sampling;
  c.validate();
  return c;
}

void emit(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << '\n';
}

const std::vector<std::size_t>& split_rows(const Dataset& d, const std::string& name) {
  if (name == "train") return d.split.train;
  if (name == "val") return d.split.val;
  if (name == "test") return d.split.test;
  throw ConfigError("unknown split '" + name + "'");
}

int cmd_gen(const CommonArgs& a, const std::string& out) {
  RunConfig c = resolve(a);
  if (a.seed) c.synth.rng_seed = *a.seed;
  c.synth.validate();
  const SynthDatabase db = generate_db(c.synth);
  write_database(out, db);
  std::cerr << "wrote " << db.schema.tables.size() << " tables to " << out << '\n';
  return kExitOk;
}

int cmd_ingest(const CommonArgs& a, const std::string& data_dir, const std::string& out) {
  const RunConfig c = resolve(a);
  const auto data = load_dataset(data_dir, c);
  json tables = json::object();
  for (std::size_t t = 0; t < data->schema.tables.size(); ++t) {
    tables[data->schema.tables[t].name] = data->graph.type_node_count(t);
  }
  json edge_types = json::array();
  for (std::size_t e = 0; e < data->graph.edge_type_count(); ++e) edge_types.push_back(data->graph.edge_type(e).name);
  emit({{"tables", tables},
        {"nodes", data->graph.node_count()},
        {"edges", data->graph.edge_count()},
        {"edge_types", edge_types},
        {"dangling_fk", data->graph.dangling_fk_count()},
        {"task", {{"target_table", data->schema.task.target_table}, {"kind", to_string(data->schema.task.kind)}}},
        {"split", {{"train", data->split.train.size()}, {"val", data->split.val.size()}, {"test", data->split.test.size()}}}},
       out);
  return kExitOk;
}

int cmd_sample(const CommonArgs& a, const std::string& data_dir, std::size_t row, const std::string& checkpoint,
               const std::string& out) {
  const RunConfig c = resolve(a);
  const auto data = load_dataset(data_dir, c);
  if (row >= data->targets.size()) throw ConfigError("row " + std::to_string(row) + " is out of range");
  GelGTModel model(c.model_for(*data), data->features, c.seed);
  if (!checkpoint.empty()) load_checkpoint(checkpoint, model.params());
  const Tensor embeddings = model.encoders().embed_all(data->graph);
  const SampledSubgraph sub = sample_row(*data, row, embeddings, c.sampling_for(data->schema.task.kind), 0);
  json j = to_json(sub);
  j["row"] = row;
  j["seed_node"] = data->seed_nodes[row];
  emit(j, out);
  return kExitOk;
}

int cmd_train(const CommonArgs& a, const std::string& data_dir, const std::string& out) {
  const RunConfig c = resolve(a);
  const auto data = load_dataset(data_dir, c);
  const RunOutcome run = run_training(*data, c, out, [](const json& rec) {
    std::cerr << "epoch " << rec["epoch"] << " loss " << rec["train_loss"] << " val " << rec["val_metric"] << '\n';
  });
  std::cout << result_to_json(run.result, c, data->schema.task.kind).dump() << '\n';
  return kExitOk;
}

int cmd_eval(const CommonArgs& a, const std::string& data_dir, const std::string& checkpoint, const std::string& split,
             const std::string& out) {
  const RunConfig c = resolve(a);
  const auto data = load_dataset(data_dir, c);
  GelGTModel model(c.model_for(*data), data->features, c.seed);
  load_checkpoint(checkpoint, model.params());
  const TaskKind kind = data->schema.task.kind;
  const double value =
      evaluate(model, *data, split_rows(*data, split), c.sampling_for(kind), c.train.eval_batch_size);
  emit({{"split", split},
        {"metric", kind == TaskKind::binary_classification ? "auc" : "mae"},
        {"value", value},
        {"variant", c.ablations.name()},
        {"eta", model.eta()},
        {"mu_per_head", model.mu_per_head()},
        {"sigma_per_head", model.sigma_per_head()}},
       out);
  return kExitOk;
}

int cmd_verify(std::uint64_t seed, const std::string& only, const std::string& report) {
  const std::vector<CheckReport> checks = run_oracle_suite(seed, only);
  if (checks.empty()) throw ConfigError("--only '" + only + "' matches no check");
  bool ok = true;
  for (const auto& r : checks) {
    std::printf("%-4s %-28s trials=%zu worst_margin=%.3e\n", r.passed ? "PASS" : "FAIL", r.check.c_str(), r.trials,
                r.worst_margin);
    if (!r.passed) {
      ok = false;
      std::fprintf(stderr, "check failed: %s\n", r.check.c_str());
    }
  }
  if (!report.empty()) emit({{"seed", seed}, {"passed", ok}, {"checks", checks}}, report);
  return ok ? kExitOk : kExitVerify;
}

// Per-epoch learned Gaussian bias (mu, sigma per head and layer) of a run.
int cmd_verify_run(const std::string& run_dir) {
  const fs::path log = fs::path(run_dir) / "metrics.jsonl";
  std::ifstream in(log);
  if (!in) throw ConfigError("cannot read " + log.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json r = json::parse(line);
    std::printf("epoch %zu eta=%.4f", r.at("epoch").get<std::size_t>(), r.at("eta").get<double>());
    const auto& mu = r.at("mu_per_head");
    const auto& sigma = r.at("sigma_per_head");
    for (std::size_t l = 0; l < mu.size(); ++l) {
      std::printf(" | L%zu", l);
      for (std::size_t h = 0; h < mu[l].size(); ++h) {
        std::printf(" h%zu mu=%.2fd sigma=%.2fd", h, mu[l][h].get<double>(), sigma[l][h].get<double>());
      }
    }
    std::printf("\n");
    ++n;
  }
  if (n == 0) throw DataError(log.string() + " has no epoch records");
  return kExitOk;
}

Ablations variant_by_name(const std::string& name) {
  Ablations a;
  if (name == "full") return a;
  std::stringstream ss(name);
  std::string part;
  while (std::getline(ss, part, '+')) {
    if (part == "no_structural_sampling") a.no_structural_sampling = true;
    else if (part == "no_semantic_refinement") a.no_semantic_refinement = true;
    else if (part == "no_gaussian_bias") a.no_gaussian_bias = true;
    else if (part == "no_gnn_branch") a.no_gnn_branch = true;
    else throw ConfigError("unknown variant '" + part + "'");
  }
  return a;
}

int cmd_ablate(const CommonArgs& a, const std::string& data_dir, const std::string& out,
               const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& variants) {
  const RunConfig base = resolve(a);
  const auto data = load_dataset(data_dir, base);
  const TaskKind kind = data->schema.task.kind;
  fs::create_directories(out);
  std::ofstream csv(fs::path(out) / "ablation.csv");
  csv << "variant,seed,best_epoch,best_val,test_metric\n";
  json summary = json::object();
  for (const auto& v : variants) {
    RunConfig c = base;
    c.ablations = variant_by_name(v);
    std::vector<double> tests;
    for (std::uint64_t s : seeds) {
      c.seed = s;
      const fs::path dir = fs::path(out) / (c.ablations.name() + "_seed" + std::to_string(s));
      const RunOutcome run = run_training(*data, c, dir);
      tests.push_back(run.result.test_metric);
      csv << c.ablations.name() << ',' << s << ',' << run.result.best_epoch << ',' << run.result.best_val << ','
          << run.result.test_metric << '\n';
      std::cerr << c.ablations.name() << " seed " << s << " test " << run.result.test_metric << '\n';
    }
    const double mean = std::accumulate(tests.begin(), tests.end(), 0.0) / static_cast<double>(tests.size());
    summary[c.ablations.name()] = {{"test_metric", tests}, {"mean_test_metric", mean}};
  }
  const json doc = {{"metric", kind == TaskKind::binary_classification ? "auc" : "mae"},
                    {"seeds", seeds},
                    {"variants", summary}};
  emit(doc, (fs::path(out) / "ablation.json").string());
  std::cout << doc.dump() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GelGT: graph transformer for relational databases"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string data_dir, out, checkpoint, only, report, run_dir, split = "test";
  std::size_t row = 0;
  std::uint64_t verify_seed = 0;
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::string> variants{"full", "no_structural_sampling", "no_semantic_refinement", "no_gaussian_bias",
                                    "no_gnn_branch"};

  auto* gen = app.add_subcommand("gen", "write a synthetic planted-signal database");
  add_config_flags(gen, common);
  gen->add_option("--out", out, "output directory")->required();

  auto* ingest = app.add_subcommand("ingest", "load a database and summarize its graph");
  add_config_flags(ingest, common);
  ingest->add_option("--data", data_dir, "database directory")->required()->check(CLI::ExistingDirectory);
  ingest->add_option("--out", out, "summary path (stdout by default)");

  auto* sample = app.add_subcommand("sample", "sample the subgraph of one target row");
  add_config_flags(sample, common);
  add_ablation_flags(sample, common);
  sample->add_option("--data", data_dir, "database directory")->required()->check(CLI::ExistingDirectory);
  sample->add_option("--row", row, "target-table row")->required();
  sample->add_option("--checkpoint", checkpoint, "checkpoint stem for the Stage 2 embeddings");
  sample->add_option("--out", out, "output path (stdout by default)");

  auto* train_cmd = app.add_subcommand("train", "train and keep the best-validation checkpoint");
  add_config_flags(train_cmd, common);
  add_ablation_flags(train_cmd, common);
  train_cmd->add_option("--data", data_dir, "database directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", out, "run directory")->required();

  auto* eval = app.add_subcommand("eval", "score a checkpoint on one split");
  add_config_flags(eval, common);
  add_ablation_flags(eval, common);
  eval->add_option("--data", data_dir, "database directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--checkpoint", checkpoint, "checkpoint stem (e.g. run/best)")->required();
  eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--out", out, "output path (stdout by default)");

  auto* verify = app.add_subcommand("verify", "run the oracle suite");
  verify->add_option("--seed", verify_seed, "fixture seed");
  verify->add_option("--only", only, "run checks whose group contains this text");
  verify->add_option("--report", report, "JSON report path");
  verify->add_option("--run", run_dir, "print the per-epoch mu/sigma of a training run instead")
      ->check(CLI::ExistingDirectory);

  auto* ablate = app.add_subcommand("ablate", "train every variant for every seed");
  add_config_flags(ablate, common);
  ablate->add_option("--data", data_dir, "database directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--out", out, "output directory")->required();
  ablate->add_option("--seeds", seeds, "seeds to run");
  ablate->add_option("--variants", variants, "variant names ('full' or switches joined by '+')");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen(common, out);
    if (*ingest) return cmd_ingest(common, data_dir, out);
    if (*sample) return cmd_sample(common, data_dir, row, checkpoint, out);
    if (*train_cmd) return cmd_train(common, data_dir, out);
    if (*eval) return cmd_eval(common, data_dir, checkpoint, split, out);
    if (*verify) return run_dir.empty() ? cmd_verify(verify_seed, only, report) : cmd_verify_run(run_dir);
    if (*ablate) return cmd_ablate(common, data_dir, out, seeds, variants);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitVerify;
  }
  return kExitOk;
}
