#include "gelgt/gnn.hpp"

#include "gelgt/errors.hpp"
#include "gelgt/init.hpp"

namespace gelgt {

Var SageLayer::preactivation(Tape& tape, const Var& h, const SparseRows& mean_adjacency) const {
  if (h.cols() != w_self->value.rows()) throw ShapeError("sage layer: input width mismatch");
  if (mean_adjacency.n_rows != h.rows()) throw ShapeError("sage layer: adjacency does not match node count");
  return add(matmul(h, tape.param(*w_self)), matmul(spmm(mean_adjacency, h), tape.param(*w_neigh)));
}

Var SageLayer::apply(Tape& tape, const Var& h, const SparseRows& mean_adjacency) const {
  return add(h, dropout(gelu(norm.apply(tape, preactivation(tape, h, mean_adjacency))), dropout_rate));
}

SageLayer make_sage_layer(ParameterSet& params, const std::string& name, std::size_t d, double dropout,
                          std::mt19937_64& rng) {
  SageLayer layer;
  layer.w_self = &params.add(name + ".w_self", linear_weight(d, d, rng));
  layer.w_neigh = &params.add(name + ".w_neigh", linear_weight(d, d, rng));
  layer.norm = make_norm(params, name + ".norm", d);
  layer.dropout_rate = dropout;
  return layer;
}

SparseRows mean_adjacency(const std::vector<std::vector<std::size_t>>& neighbors) {
  SparseRows a;
  a.n_cols = neighbors.size();
  for (const auto& list : neighbors) {
    for (std::size_t j : list) {
      if (j >= neighbors.size()) throw ShapeError("mean_adjacency: neighbour index out of range");
      a.push(j, 1.0 / static_cast<double>(list.size()));
    }
    a.end_row();
  }
  return a;
}

GnnBranch::GnnBranch(const std::string& prefix, std::size_t d, std::size_t n_layers, double dropout,
                     ParameterSet& params, std::mt19937_64& rng) {
  for (std::size_t l = 0; l < n_layers; ++l) {
    layers_.push_back(make_sage_layer(params, prefix + ".sage" + std::to_string(l), d, dropout, rng));
  }
}

Var GnnBranch::forward(Tape& tape, const Var& h, const SparseRows& mean_adjacency) const {
  Var x = h;
  for (const SageLayer& layer : layers_) x = layer.apply(tape, x, mean_adjacency);
  return x;
}

}  // namespace gelgt
