#pragma once

#include <cstdint>
#include <limits>
#include <json.hpp>
#include <random>
#include <span>
#include <vector>

#include "gelgt/relstore.hpp"
#include "gelgt/tensor.hpp"

// Two-stage seed-centred subgraph sampling.
//
// Stage 1 is a temporally causal BFS: only nodes strictly older than the seed
// time are visited, levels are expanded in ascending node id and the level
// that would overflow the budget is truncated in id order.
// Stage 2 keeps the seed and every 1-hop node, then fills the remaining
// budget with 2nd-hop nodes ranked by dot-product similarity to the seed.
namespace gelgt {

struct SamplingConfig {
  std::size_t max_hop = 2;
  std::size_t stage1_budget = 300;
  std::size_t stage2_keep = 200;

  static SamplingConfig for_task(TaskKind kind);
  void validate() const;
};

void to_json(nlohmann::json& j, const SamplingConfig& c);
void from_json(const nlohmann::json& j, SamplingConfig& c);

// Delta for nodes without a timestamp (always in the past).
inline constexpr std::int64_t kUnboundedDelta = std::numeric_limits<std::int64_t>::max();

// Stage-1 output: seed first, then by hop, ascending id within a hop.
struct Candidates {
  NodeId seed = 0;
  std::int64_t seed_time = 0;
  std::vector<NodeId> nodes;
  std::vector<std::uint32_t> hop;
};

struct LocalEdge {
  std::uint32_t src;
  std::uint32_t dst;
  std::uint32_t edge_type;
  bool operator==(const LocalEdge&) const = default;
};

struct SampledSubgraph {
  std::int64_t seed_time = 0;
  std::vector<NodeId> nodes;           // nodes[0] is the seed
  std::vector<std::uint32_t> hop;      // hop[0] == 0
  std::vector<std::int64_t> delta_t;   // seed_time - node time, seconds
  std::vector<LocalEdge> edges;        // induced, both directions, local ids

  std::size_t size() const { return nodes.size(); }
  bool operator==(const SampledSubgraph&) const = default;
};

Candidates structural_sample(const RelGraph& graph, NodeId seed, std::int64_t seed_time, const SamplingConfig& config);

// Uniform random selection of up to stage1_budget - 1 nodes from the full
// causal <= max_hop neighbourhood; used when structural sampling is ablated.
Candidates random_sample(const RelGraph& graph, NodeId seed, std::int64_t seed_time, const SamplingConfig& config,
                         std::mt19937_64& rng);

double semantic_similarity(std::span<const double> a, std::span<const double> b);

// `embeddings` holds one row per global node.
SampledSubgraph semantic_refine(const RelGraph& graph, const Candidates& candidates, const Tensor& embeddings,
                                const SamplingConfig& config);

// Materializes the Stage-1 set unchanged (semantic refinement skipped).
SampledSubgraph materialize(const RelGraph& graph, const Candidates& candidates);

SampledSubgraph sample(const RelGraph& graph, NodeId seed, std::int64_t seed_time, const Tensor& embeddings,
                       const SamplingConfig& config);

// Throws std::logic_error if the subgraph breaks any structural invariant,
// including temporal causality.
void check_subgraph(const RelGraph& graph, const SampledSubgraph& sub);

nlohmann::json to_json(const SampledSubgraph& sub);

}  // namespace gelgt
