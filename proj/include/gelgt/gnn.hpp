#pragma once

#include <random>
#include <string>
#include <vector>

#include "gelgt/layers.hpp"
#include "gelgt/ops.hpp"

// Local message passing over the relational edges of the sampled subgraph:
// mean-aggregation (GraphSAGE) layers with norm, GELU, dropout and a
// residual connection.
namespace gelgt {

struct SageLayer {
  Parameter* w_self = nullptr;
  Parameter* w_neigh = nullptr;
  Norm norm;
  double dropout_rate = 0.1;

  // h W_self + mean_neighbors(h) W_neigh; empty neighbourhoods contribute 0.
  Var preactivation(Tape& tape, const Var& h, const SparseRows& mean_adjacency) const;
  // h + dropout(gelu(norm(preactivation)))
  Var apply(Tape& tape, const Var& h, const SparseRows& mean_adjacency) const;
};

SageLayer make_sage_layer(ParameterSet& params, const std::string& name, std::size_t d, double dropout,
                          std::mt19937_64& rng);

// Row-normalized adjacency from an explicit neighbour list per node.
SparseRows mean_adjacency(const std::vector<std::vector<std::size_t>>& neighbors);

class GnnBranch {
 public:
  GnnBranch(const std::string& prefix, std::size_t d, std::size_t n_layers, double dropout, ParameterSet& params,
            std::mt19937_64& rng);

  Var forward(Tape& tape, const Var& h, const SparseRows& mean_adjacency) const;
  const std::vector<SageLayer>& layers() const { return layers_; }

 private:
  std::vector<SageLayer> layers_;
};

}  // namespace gelgt
