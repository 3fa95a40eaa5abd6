#include "gelgt/batch.hpp"

#include <algorithm>

namespace gelgt {

std::vector<std::size_t> PackedBatch::seed_rows() const {
  return {offsets.begin(), offsets.end() - 1};
}

PackedBatch pack(const RelGraph& graph, std::span<const SampledSubgraph> subgraphs) {
  PackedBatch b;
  std::size_t total = 0;
  for (const auto& sub : subgraphs) total += sub.size();
  b.sum_adjacency.n_cols = total;
  b.mean_adjacency.n_cols = total;

  std::vector<std::vector<std::size_t>> neigh;
  for (const auto& sub : subgraphs) {
    const std::size_t base = b.nodes.size();
    for (std::size_t i = 0; i < sub.size(); ++i) {
      b.nodes.push_back(sub.nodes[i]);
      b.node_types.push_back(graph.node_type(sub.nodes[i]));
      b.hops.push_back(sub.hop[i]);
      b.delta_t.push_back(sub.delta_t[i]);
    }
    neigh.assign(sub.size(), {});
    for (const LocalEdge& e : sub.edges) {
      if (e.src != e.dst) neigh[e.src].push_back(e.dst);
    }
    for (auto& list : neigh) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
      const double w = list.empty() ? 0.0 : 1.0 / static_cast<double>(list.size());
      for (std::size_t j : list) {
        b.sum_adjacency.push(base + j, 1.0);
        b.mean_adjacency.push(base + j, w);
      }
      b.sum_adjacency.end_row();
      b.mean_adjacency.end_row();
    }
    b.offsets.push_back(b.nodes.size());
  }
  return b;
}

}  // namespace gelgt
