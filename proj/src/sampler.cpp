#include "gelgt/sampler.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "gelgt/errors.hpp"

namespace gelgt {

namespace {

bool precedes(const RelGraph& graph, NodeId v, std::int64_t seed_time) {
  return graph.node_time(v) < seed_time;
}

// Full causal BFS levels up to max_hop; `budget` caps the total node count
// (seed included), truncating a level in ascending id order.
Candidates bfs(const RelGraph& graph, NodeId seed, std::int64_t seed_time, std::size_t max_hop, std::size_t budget) {
  if (seed >= graph.node_count()) throw DataError("seed node out of range");
  Candidates c;
  c.seed = seed;
  c.seed_time = seed_time;
  c.nodes.push_back(seed);
  c.hop.push_back(0);
  std::unordered_set<NodeId> visited{seed};
  std::vector<NodeId> frontier{seed};
  for (std::uint32_t hop = 1; hop <= max_hop && !frontier.empty() && c.nodes.size() < budget; ++hop) {
    std::vector<NodeId> next;
    for (NodeId u : frontier) {
      for (NodeId v : graph.all_neighbors(u)) {
        if (!visited.contains(v) && precedes(graph, v, seed_time)) {
          visited.insert(v);
          next.push_back(v);
        }
      }
    }
    std::sort(next.begin(), next.end());
    if (next.size() > budget - c.nodes.size()) next.resize(budget - c.nodes.size());
    for (NodeId v : next) {
      c.nodes.push_back(v);
      c.hop.push_back(hop);
    }
    frontier = std::move(next);
  }
  return c;
}

SampledSubgraph build_subgraph(const RelGraph& graph, const Candidates& c, const std::vector<std::size_t>& keep) {
  SampledSubgraph sub;
  sub.seed_time = c.seed_time;
  std::unordered_map<NodeId, std::uint32_t> local;
  for (std::size_t k : keep) {
    const NodeId v = c.nodes[k];
    local.emplace(v, static_cast<std::uint32_t>(sub.nodes.size()));
    sub.nodes.push_back(v);
    sub.hop.push_back(c.hop[k]);
    const std::int64_t t = graph.node_time(v);
    sub.delta_t.push_back(k == 0 ? 0 : (t == kNoTime ? kUnboundedDelta : c.seed_time - t));
  }
  for (std::uint32_t i = 0; i < sub.nodes.size(); ++i) {
    for (std::size_t et = 0; et < graph.edge_type_count(); ++et) {
      for (NodeId w : graph.neighbors(sub.nodes[i], et)) {
        if (auto it = local.find(w); it != local.end()) {
          sub.edges.push_back({i, it->second, static_cast<std::uint32_t>(et)});
        }
      }
    }
  }
  return sub;
}

}  // namespace

SamplingConfig SamplingConfig::for_task(TaskKind kind) {
  if (kind == TaskKind::regression) return {2, 500, 300};
  return {2, 300, 200};
}

void SamplingConfig::validate() const {
  if (max_hop < 1) throw ConfigError("max_hop must be >= 1");
  if (stage1_budget < 1) throw ConfigError("stage1_budget must be >= 1");
  if (stage2_keep > stage1_budget) throw ConfigError("stage2_keep must not exceed stage1_budget");
  if (stage2_keep < 1) throw ConfigError("stage2_keep must be >= 1");
}

void to_json(nlohmann::json& j, const SamplingConfig& c) {
  j = {{"max_hop", c.max_hop}, {"stage1_budget", c.stage1_budget}, {"stage2_keep", c.stage2_keep}};
}

void from_json(const nlohmann::json& j, SamplingConfig& c) {
  if (j.contains("max_hop")) j.at("max_hop").get_to(c.max_hop);
  if (j.contains("stage1_budget")) j.at("stage1_budget").get_to(c.stage1_budget);
  if (j.contains("stage2_keep")) j.at("stage2_keep").get_to(c.stage2_keep);
}

Candidates structural_sample(const RelGraph& graph, NodeId seed, std::int64_t seed_time, const SamplingConfig& config) {
  config.validate();
  return bfs(graph, seed, seed_time, config.max_hop, config.stage1_budget);
}

Candidates random_sample(const RelGraph& graph, NodeId seed, std::int64_t seed_time, const SamplingConfig& config,
                         std::mt19937_64& rng) {
  config.validate();
  Candidates all = bfs(graph, seed, seed_time, config.max_hop, std::numeric_limits<std::size_t>::max());
  std::vector<std::size_t> pool(all.nodes.size() - 1);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i + 1;
  const std::size_t room = config.stage1_budget - 1;
  if (pool.size() > room) {
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < room; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(room);
    std::sort(pool.begin(), pool.end());
  }
  Candidates c;
  c.seed = seed;
  c.seed_time = seed_time;
  c.nodes.push_back(seed);
  c.hop.push_back(0);
  for (std::size_t k : pool) {
    c.nodes.push_back(all.nodes[k]);
    c.hop.push_back(all.hop[k]);
  }
  return c;
}

double semantic_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("semantic_similarity: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

SampledSubgraph semantic_refine(const RelGraph& graph, const Candidates& candidates, const Tensor& embeddings,
                                const SamplingConfig& config) {
  if (embeddings.rows() != graph.node_count()) throw ShapeError("semantic_refine: need one embedding row per node");
  const std::size_t d = embeddings.cols();
  auto row = [&](NodeId v) { return std::span<const double>(embeddings.data() + static_cast<std::size_t>(v) * d, d); };

  std::vector<std::size_t> keep;
  std::vector<std::pair<double, std::size_t>> ranked;  // (similarity, candidate index)
  const auto seed_row = row(candidates.seed);
  for (std::size_t k = 0; k < candidates.nodes.size(); ++k) {
    if (candidates.hop[k] <= 1) {
      keep.push_back(k);
    } else {
      ranked.emplace_back(semantic_similarity(seed_row, row(candidates.nodes[k])), k);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return candidates.nodes[a.second] < candidates.nodes[b.second];
  });
  for (const auto& [sim, k] : ranked) {
    if (keep.size() >= config.stage2_keep) break;
    keep.push_back(k);
  }
  std::sort(keep.begin(), keep.end());
  return build_subgraph(graph, candidates, keep);
}

SampledSubgraph materialize(const RelGraph& graph, const Candidates& candidates) {
  std::vector<std::size_t> keep(candidates.nodes.size());
  for (std::size_t k = 0; k < keep.size(); ++k) keep[k] = k;
  return build_subgraph(graph, candidates, keep);
}

SampledSubgraph sample(const RelGraph& graph, NodeId seed, std::int64_t seed_time, const Tensor& embeddings,
                       const SamplingConfig& config) {
  SampledSubgraph sub = semantic_refine(graph, structural_sample(graph, seed, seed_time, config), embeddings, config);
  check_subgraph(graph, sub);
  return sub;
}

void check_subgraph(const RelGraph& graph, const SampledSubgraph& sub) {
  if (sub.nodes.empty() || sub.hop.size() != sub.size() || sub.delta_t.size() != sub.size()) {
    throw std::logic_error("subgraph arrays are inconsistent");
  }
  if (sub.hop[0] != 0 || sub.delta_t[0] != 0) throw std::logic_error("subgraph seed must have hop 0 and delta 0");
  for (std::size_t i = 1; i < sub.size(); ++i) {
    if (graph.node_time(sub.nodes[i]) >= sub.seed_time || sub.delta_t[i] <= 0) {
      throw std::logic_error("temporal leakage: node " + std::to_string(sub.nodes[i]) + " is not older than the seed");
    }
  }
  for (const LocalEdge& e : sub.edges) {
    if (e.src >= sub.size() || e.dst >= sub.size() || !graph.adjacent(sub.nodes[e.src], sub.nodes[e.dst])) {
      throw std::logic_error("subgraph edge not present in the graph");
    }
  }
}

nlohmann::json to_json(const SampledSubgraph& sub) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : sub.edges) edges.push_back({e.src, e.dst, e.edge_type});
  nlohmann::json deltas = nlohmann::json::array();
  for (auto d : sub.delta_t) {
    if (d == kUnboundedDelta) {
      deltas.push_back(nullptr);
    } else {
      deltas.push_back(d);
    }
  }
  return {{"seed_time", sub.seed_time}, {"nodes", sub.nodes}, {"hops", sub.hop}, {"delta_t", deltas}, {"edges", edges}};
}

}  // namespace gelgt
