#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gelgt/ops.hpp"
#include "gelgt/relstore.hpp"
#include "gelgt/sampler.hpp"

namespace gelgt {

// Several sampled subgraphs stacked row-wise. Subgraph s owns rows
// [offsets[s], offsets[s+1]); its seed is the first of them.
struct PackedBatch {
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> nodes;
  std::vector<std::uint32_t> node_types;
  std::vector<std::uint32_t> hops;
  std::vector<std::int64_t> delta_t;
  // Relational edges merged over edge types, deduplicated, both directions.
  // `sum_adjacency` has unit weights, `mean_adjacency` is row-normalized.
  SparseRows sum_adjacency;
  SparseRows mean_adjacency;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t subgraph_count() const { return offsets.size() - 1; }
  std::size_t subgraph_size(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
  std::vector<std::size_t> seed_rows() const;
};

PackedBatch pack(const RelGraph& graph, std::span<const SampledSubgraph> subgraphs);

}  // namespace gelgt
