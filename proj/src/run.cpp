#include "gelgt/run.hpp"

#include <fstream>

#include "gelgt/errors.hpp"

namespace gelgt {

std::unique_ptr<Dataset> load_dataset(const std::filesystem::path& dir, const RunConfig& config) {
  auto data = std::make_unique<Dataset>();
  DatabaseSchema schema = load_schema(dir / "schema.json");
  TableData tables = load_tables(schema, dir);
  prepare_dataset(*data, std::move(schema), std::move(tables), config.split);
  return data;
}

std::unique_ptr<Dataset> synth_dataset(const RunConfig& config) {
  auto data = std::make_unique<Dataset>();
  SynthDatabase db = generate_db(config.synth);
  prepare_dataset(*data, std::move(db.schema), std::move(db.tables), config.split);
  return data;
}

nlohmann::json result_to_json(const TrainResult& result, const RunConfig& config, TaskKind kind) {
  return {{"variant", config.ablations.name()},
          {"seed", config.seed},
          {"metric", kind == TaskKind::binary_classification ? "auc" : "mae"},
          {"best_epoch", result.best_epoch},
          {"best_val", result.best_val},
          {"test_metric", result.test_metric}};
}

RunOutcome run_training(const Dataset& data, const RunConfig& config, const std::filesystem::path& out_dir,
                        std::function<void(const nlohmann::json&)> on_epoch) {
  config.validate();
  RunOutcome out;
  out.model = std::make_unique<GelGTModel>(config.model_for(data), data.features, config.seed);

  TrainOptions options;
  options.train = config.train_config();
  options.sampling = config.sampling_for(data.schema.task.kind);
  options.variant = config.ablations.name();
  options.out_dir = out_dir;
  options.on_epoch = std::move(on_epoch);
  out.result = train(*out.model, data, options);

  if (!out_dir.empty()) {
    auto write = [&out_dir](const char* name, const nlohmann::json& j) {
      std::ofstream f(out_dir / name);
      if (!f) throw DataError("cannot write " + (out_dir / name).string());
      f << j.dump(2) << '\n';
    };
    write("config.json", run_config_to_json(config));
    write("result.json", result_to_json(out.result, config, data.schema.task.kind));
  }
  return out;
}

}  // namespace gelgt
