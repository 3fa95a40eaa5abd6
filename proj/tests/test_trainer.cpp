#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "fixtures.hpp"
#include "gelgt/errors.hpp"
#include "gelgt/metrics.hpp"
#include "gelgt/optimizer.hpp"
#include "gelgt/trainer.hpp"

using namespace gelgt;
using namespace gelgt::testing;

namespace {

ModelConfig tiny_model(std::size_t n_types) {
  ModelConfig c;
  c.encoder.d = 8;
  c.encoder.n_node_types = n_types;
  c.encoder.pe_dim = 4;
  c.n_layers = 1;
  c.n_heads = 2;
  c.gnn_layers = 2;
  return c;
}

TrainOptions tiny_options() {
  TrainOptions o;
  o.train.lr = 1e-2;
  o.train.batch_size = 16;
  o.train.epochs = 2;
  o.train.max_steps_per_epoch = 3;
  o.train.warmup_steps = 2;
  o.train.rng_seed = 4;
  o.sampling.config.stage1_budget = 12;
  o.sampling.config.stage2_keep = 8;
  return o;
}

struct TinyData : ::testing::Test {
  Dataset data;
  void SetUp() override {
    SynthConfig sc;
    sc.n_entities = 80;
    sc.rng_seed = 5;
    SynthDatabase db = generate_db(sc);
    prepare_dataset(data, std::move(db.schema), std::move(db.tables));
  }
};

}  // namespace

TEST(Metrics, AucExamples) {
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<double>{0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{1, 2, 3}, std::vector<double>{0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{3, 2, 1}, std::vector<double>{0, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{5, 5, 5, 5}, std::vector<double>{0, 1, 0, 1}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{1, 2}, std::vector<double>{1, 1}), DataError);
}

TEST(Metrics, AucRejectsNonFiniteScores) {
  EXPECT_THROW(auc(std::vector<double>{NAN, 1.0}, std::vector<double>{0, 1}), NumericError);
}

TEST(Metrics, MaeExamples) {
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 5}), 1.0);
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{4}, std::vector<double>{4}), 0.0);
  EXPECT_THROW(mae(std::vector<double>{}, std::vector<double>{}), DataError);
  EXPECT_THROW(mae(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST(Optimizer, WarmupIsLinearThenFlat) {
  EXPECT_DOUBLE_EQ(warmup_lr(1.0, 1, 10), 0.1);
  EXPECT_DOUBLE_EQ(warmup_lr(1.0, 5, 10), 0.5);
  EXPECT_DOUBLE_EQ(warmup_lr(1.0, 10, 10), 1.0);
  EXPECT_DOUBLE_EQ(warmup_lr(1.0, 500, 10), 1.0);
  EXPECT_DOUBLE_EQ(warmup_lr(0.3, 1, 0), 0.3);
}

TEST(Optimizer, FirstAdamStepIsSignTimesLr) {
  ParameterSet params;
  Parameter& p = params.add("p", Tensor::from_rows({{1.0, -2.0, 0.5}}));
  p.grad = Tensor::from_rows({{0.2, -3.0, 0.0}});
  Adam adam(params);
  adam.step(0.1, 0.0);
  EXPECT_NEAR(p.value[0], 0.9, 1e-6);
  EXPECT_NEAR(p.value[1], -1.9, 1e-6);
  EXPECT_DOUBLE_EQ(p.value[2], 0.5);
}

TEST(Optimizer, DecoupledDecayAndLrScale) {
  ParameterSet params;
  Parameter& decayed = params.add("w", Tensor::scalar(2.0));
  Parameter& fast = params.add("mu", Tensor::scalar(0.0));
  fast.weight_decay = false;
  fast.lr_scale = 10.0;
  decayed.grad = Tensor::scalar(0.0);
  fast.grad = Tensor::scalar(-1.0);
  Adam adam(params);
  adam.step(0.01, 0.5);
  EXPECT_DOUBLE_EQ(decayed.value.item(), 2.0 - 0.01 * 0.5 * 2.0);
  EXPECT_NEAR(fast.value.item(), 0.1, 1e-8);
}

TEST_F(TinyData, TrainingIsDeterministicAndLogsEveryEpoch) {
  const auto dir = std::filesystem::temp_directory_path() / "gelgt_trainer_test";
  std::filesystem::remove_all(dir);
  TrainOptions opts = tiny_options();
  opts.out_dir = dir;
  GelGTModel a(tiny_model(data.graph.type_count()), data.features, 1);
  const TrainResult ra = train(a, data, opts);
  opts.out_dir.clear();
  GelGTModel b(tiny_model(data.graph.type_count()), data.features, 1);
  const TrainResult rb = train(b, data, opts);
  ASSERT_EQ(ra.log.size(), 2u);
  EXPECT_EQ(ra.log, rb.log);
  EXPECT_EQ(ra.test_metric, rb.test_metric);
  EXPECT_TRUE(std::filesystem::exists(dir / "metrics.jsonl"));
  std::ifstream in(dir / "metrics.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("mu_per_head"));
    EXPECT_TRUE(j.contains("sigma_per_head"));
    EXPECT_GT(j.at("eta").get<double>(), 0.0);
    ++lines;
  }
  EXPECT_EQ(lines, 2u);
  std::filesystem::remove_all(dir);
}

TEST_F(TinyData, BestCheckpointIsRestored) {
  GelGTModel m(tiny_model(data.graph.type_count()), data.features, 1);
  const TrainOptions opts = tiny_options();
  const TrainResult r = train(m, data, opts);
  EXPECT_DOUBLE_EQ(evaluate(m, data, data.split.val, opts.sampling, opts.train.eval_batch_size), r.best_val);
}

TEST_F(TinyData, NonFiniteLossAborts) {
  GelGTModel m(tiny_model(data.graph.type_count()), data.features, 1);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    Parameter& p = m.params()[i];
    if (p.name.find("head") != std::string::npos) {
      for (double& v : p.value.values()) v = std::numeric_limits<double>::quiet_NaN();
    }
  }
  EXPECT_THROW(train(m, data, tiny_options()), NumericError);
}

TEST_F(TinyData, RandomStageOneStillCausal) {
  SamplingOptions opts = tiny_options().sampling;
  opts.random_stage1 = true;
  const Tensor emb = Tensor::zeros(data.graph.node_count(), 1);
  for (std::size_t r = 0; r < data.targets.size(); ++r) {
    const SampledSubgraph s = sample_row(data, r, emb, opts, 7);
    EXPECT_LE(s.size(), opts.config.stage1_budget);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s.delta_t[i], 0);
  }
}

TEST(TrainConfigCheck, RejectsNonPositive) {
  TrainConfig c;
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
