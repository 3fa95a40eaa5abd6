#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "gelgt/errors.hpp"
#include "gelgt/sampler.hpp"
#include "gelgt/synthgen.hpp"

using namespace gelgt;
using gelgt::testing::make_db;

namespace {

// Self-referencing table: every row may point at a parent row.
const char* kItemsSchema = R"({
  "tables": [{"name": "items", "columns": [
    {"name": "id", "kind": "primary_key"},
    {"name": "parent", "kind": "foreign_key", "target_table": "items"},
    {"name": "ts", "kind": "timestamp"},
    {"name": "y", "kind": "numerical"}]}],
  "task": {"target_table": "items", "target_column": "y", "kind": "binary_classification", "seed_time_column": "ts"}
})";

struct Items {
  gelgt::testing::Db db;
  RelGraph graph;
};

// rows: (parent row index or -1, timestamp)
Items items(const std::vector<std::pair<int, std::int64_t>>& rows) {
  std::string csv = "id,parent,ts,y\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv += "r" + std::to_string(i) + "," + (rows[i].first < 0 ? "" : "r" + std::to_string(rows[i].first)) + "," +
           std::to_string(rows[i].second) + ",0\n";
  }
  Items out{make_db(kItemsSchema, {csv}), {}};
  out.graph = build_graph(out.db.schema, out.db.tables);
  return out;
}

SamplingConfig cfg(std::size_t budget, std::size_t keep, std::size_t max_hop = 2) {
  SamplingConfig c;
  c.stage1_budget = budget;
  c.stage2_keep = keep;
  c.max_hop = max_hop;
  return c;
}

}  // namespace

TEST(Stage1, ChainStopsAtTwoHops) {
  // seed -> a -> b -> c
  const Items it = items({{1, 100}, {2, 50}, {3, 40}, {-1, 30}});
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 200));
  EXPECT_EQ(c.nodes, (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(c.hop, (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(Stage1, FutureAndSimultaneousNeighborsAreExcluded) {
  const Items it = items({{-1, 100}, {0, 99}, {0, 100}, {0, 101}});
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 200));
  EXPECT_EQ(c.nodes, (std::vector<NodeId>{0, 1}));
}

TEST(Stage1, StarBudgetKeepsLowestIds) {
  std::vector<std::pair<int, std::int64_t>> rows(10, {-1, 10});
  rows[0] = {-1, 100};
  for (int leaf : {3, 1, 4, 5, 9}) rows[leaf] = {0, 10};
  const Items it = items(rows);
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(3, 3));
  EXPECT_EQ(c.nodes, (std::vector<NodeId>{0, 1, 3}));
}

TEST(Stage1, IsolatedSeedReturnsItself) {
  const Items it = items({{-1, 100}, {-1, 50}});
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 200));
  EXPECT_EQ(c.nodes, (std::vector<NodeId>{0}));
}

TEST(Similarity, DotProducts) {
  const std::vector<double> e1{1, 0}, e2{0, 1}, a{1, 2}, b{3, -1};
  EXPECT_EQ(semantic_similarity(e1, e1), 1.0);
  EXPECT_EQ(semantic_similarity(e1, e2), 0.0);
  EXPECT_EQ(semantic_similarity(a, b), 1.0);
  const std::vector<double> c3{1, 2, 3};
  EXPECT_THROW(semantic_similarity(a, c3), ShapeError);
}

TEST(Stage2, KeepsTheMostSimilarSecondHop) {
  // seed(0) -> a(1); u1(2), u2(3) -> a
  const Items it = items({{1, 100}, {-1, 50}, {1, 40}, {1, 30}});
  const Tensor emb = Tensor::from_rows({{1, 0}, {0, 0}, {1, 0}, {0, 1}});
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 3));
  ASSERT_EQ(c.nodes.size(), 4u);
  const SampledSubgraph s = semantic_refine(it.graph, c, emb, cfg(300, 3));
  EXPECT_EQ(s.nodes, (std::vector<NodeId>{0, 1, 2}));
}

TEST(Stage2, TiesGoToTheLowerId) {
  // seed(0) -> a(1); nodes 2..5 hang off a. Nodes 3 and 5 tie for the best score.
  const Items it = items({{1, 100}, {-1, 50}, {1, 40}, {1, 30}, {1, 20}, {1, 10}});
  const Tensor emb = Tensor::from_rows({{1, 0}, {0, 0}, {0, 1}, {0.5, 0}, {0, 1}, {0.5, 0}});
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 3));
  const SampledSubgraph s = semantic_refine(it.graph, c, emb, cfg(300, 3));
  EXPECT_EQ(s.nodes, (std::vector<NodeId>{0, 1, 3}));
}

TEST(Stage2, LargeKeepIsANoOp) {
  const Items it = items({{1, 100}, {-1, 50}, {1, 40}, {1, 30}});
  const Tensor emb = Tensor::from_rows({{1, 0}, {0, 0}, {1, 0}, {0, 1}});
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 200));
  EXPECT_EQ(semantic_refine(it.graph, c, emb, cfg(300, 200)), materialize(it.graph, c));
}

TEST(Stage2, OneHopOverflowStillKeepsEveryOneHopNode) {
  std::vector<std::pair<int, std::int64_t>> rows{{-1, 100}};
  for (int i = 0; i < 6; ++i) rows.push_back({0, 10 + i});
  const Items it = items(rows);
  const Tensor emb = Tensor::zeros(7, 2);
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 3));
  const SampledSubgraph s = semantic_refine(it.graph, c, emb, cfg(300, 3));
  EXPECT_EQ(s.size(), 7u);
}

TEST(Stage2, EmbeddingRowCountMustMatchTheGraph) {
  const Items it = items({{1, 100}, {-1, 50}});
  const Candidates c = structural_sample(it.graph, 0, 100, cfg(300, 200));
  EXPECT_THROW(semantic_refine(it.graph, c, Tensor::zeros(1, 2), cfg(300, 200)), ShapeError);
}

TEST(Subgraph, DeltasHopsAndInducedEdges) {
  const Items it = items({{1, 100}, {-1, 40}, {1, 70}});
  const SampledSubgraph s = sample(it.graph, 0, 100, Tensor::zeros(3, 1), cfg(300, 200));
  EXPECT_EQ(s.nodes, (std::vector<NodeId>{0, 1, 2}));
  EXPECT_EQ(s.delta_t, (std::vector<std::int64_t>{0, 60, 30}));
  EXPECT_EQ(s.hop, (std::vector<std::uint32_t>{0, 1, 2}));
  // Two relational edges, both directions.
  EXPECT_EQ(s.edges.size(), 4u);
  for (const auto& e : s.edges) EXPECT_TRUE(it.graph.adjacent(s.nodes[e.src], s.nodes[e.dst]));
  EXPECT_NO_THROW(check_subgraph(it.graph, s));
}

TEST(Subgraph, LeakageIsDetected) {
  const Items it = items({{1, 100}, {-1, 40}, {1, 170}});
  SampledSubgraph s = sample(it.graph, 0, 100, Tensor::zeros(3, 1), cfg(300, 200));
  s.nodes.push_back(2);
  s.hop.push_back(2);
  s.delta_t.push_back(-70);
  EXPECT_THROW(check_subgraph(it.graph, s), std::logic_error);
}

TEST(Subgraph, JsonHasTheInspectableFields) {
  const Items it = items({{1, 100}, {-1, 40}});
  const nlohmann::json j = to_json(sample(it.graph, 0, 100, Tensor::zeros(2, 1), cfg(300, 200)));
  EXPECT_EQ(j.at("nodes"), nlohmann::json::array({0, 1}));
  EXPECT_TRUE(j.contains("hops") && j.contains("delta_t") && j.contains("edges") && j.contains("seed_time"));
}

TEST(Config, Validation) {
  EXPECT_THROW(cfg(10, 20).validate(), ConfigError);
  EXPECT_THROW(cfg(10, 5, 0).validate(), ConfigError);
  EXPECT_EQ(SamplingConfig::for_task(TaskKind::regression).stage1_budget, 500u);
  EXPECT_EQ(SamplingConfig::for_task(TaskKind::binary_classification).stage2_keep, 200u);
}

// Causality, 1-hop preservation, monotone refinement and the budget over
// 10^4 sampled subgraphs of random synthetic databases.
TEST(SamplerProperties, TenThousandSubgraphs) {
  std::size_t sampled = 0;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (std::uint64_t db_seed = 1; sampled < 10000; ++db_seed) {
    SynthConfig sc;
    sc.n_entities = 500;
    sc.rng_seed = db_seed;
    const SynthDatabase db = generate_db(sc);
    const RelGraph g = build_graph(db.schema, db.tables);
    const auto times = seed_times(db.schema, db.tables);
    Tensor emb = Tensor::zeros(g.node_count(), 4);
    for (std::size_t i = 0; i < emb.size(); ++i) emb[i] = normal(rng);
    const SamplingConfig config = cfg(12 + db_seed % 20, 6 + db_seed % 6);

    for (std::size_t row = 0; row < times.size(); ++row) {
      const NodeId seed = g.node_of(0, row);
      const Candidates c = structural_sample(g, seed, times[row], config);
      const SampledSubgraph s = semantic_refine(g, c, emb, config);
      ++sampled;
      for (std::size_t i = 1; i < s.size(); ++i) {
        ASSERT_LT(g.node_time(s.nodes[i]), times[row]);
        ASSERT_GT(s.delta_t[i], 0);
      }
      std::set<NodeId> hop1_before, hop1_after, kept2;
      for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        if (c.hop[i] == 1) hop1_before.insert(c.nodes[i]);
      }
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.hop[i] == 1) hop1_after.insert(s.nodes[i]);
        if (s.hop[i] == 2) kept2.insert(s.nodes[i]);
      }
      ASSERT_EQ(hop1_before, hop1_after);
      if (c.nodes.size() >= config.stage2_keep && 1 + hop1_before.size() <= config.stage2_keep) {
        ASSERT_LE(s.size(), config.stage2_keep);
      }
      double min_kept = 1e300, max_dropped = -1e300;
      for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        if (c.hop[i] != 2) continue;
        const double sim = semantic_similarity(emb.values().subspan(seed * 4, 4), emb.values().subspan(c.nodes[i] * 4, 4));
        if (kept2.contains(c.nodes[i])) {
          min_kept = std::min(min_kept, sim);
        } else {
          max_dropped = std::max(max_dropped, sim);
        }
      }
      ASSERT_GE(min_kept, max_dropped);
      ASSERT_NO_THROW(check_subgraph(g, s));
    }
  }
  EXPECT_GE(sampled, 10000u);
}

TEST(RandomStage1, DrawsFromTheCausalTwoHopSetWithinBudget) {
  SynthConfig sc;
  sc.n_entities = 200;
  const SynthDatabase db = generate_db(sc);
  const RelGraph g = build_graph(db.schema, db.tables);
  const auto times = seed_times(db.schema, db.tables);
  const SamplingConfig config = cfg(8, 6);
  for (std::size_t row = 0; row < times.size(); ++row) {
    const NodeId seed = g.node_of(0, row);
    const Candidates full = structural_sample(g, seed, times[row], cfg(100000, 100000));
    const std::set<NodeId> pool(full.nodes.begin(), full.nodes.end());
    std::mt19937_64 r1(row), r2(row);
    const Candidates c = random_sample(g, seed, times[row], config, r1);
    EXPECT_EQ(c.nodes, random_sample(g, seed, times[row], config, r2).nodes);
    EXPECT_LE(c.nodes.size(), config.stage1_budget);
    EXPECT_EQ(c.nodes.size(), std::min(pool.size(), config.stage1_budget));
    EXPECT_EQ(c.nodes.front(), seed);
    for (NodeId v : c.nodes) EXPECT_TRUE(pool.contains(v));
    EXPECT_NO_THROW(check_subgraph(g, materialize(g, c)));
  }
}

TEST(Sample, RerunIsIdentical) {
  SynthConfig sc;
  sc.n_entities = 100;
  const SynthDatabase db = generate_db(sc);
  const RelGraph g = build_graph(db.schema, db.tables);
  const auto times = seed_times(db.schema, db.tables);
  Tensor emb = Tensor::zeros(g.node_count(), 2);
  for (std::size_t i = 0; i < emb.size(); ++i) emb[i] = std::sin(static_cast<double>(i));
  for (std::size_t row = 0; row < times.size(); ++row) {
    EXPECT_EQ(sample(g, g.node_of(0, row), times[row], emb, cfg(20, 10)),
              sample(g, g.node_of(0, row), times[row], emb, cfg(20, 10)));
  }
}
