#pragma once

#include <cstdint>
#include <json.hpp>
#include <random>
#include <vector>

#include "gelgt/batch.hpp"
#include "gelgt/layers.hpp"
#include "gelgt/relstore.hpp"
#include "gelgt/tape.hpp"

// Node encoders: type and hop lookups, sinusoidal time-difference encoding,
// a residual tabular encoder per table, a GIN positional encoder over the
// local subgraph, and the MLP that mixes the five into one d-vector.
namespace gelgt {

struct EncoderConfig {
  std::size_t d = 512;
  std::size_t n_node_types = 0;
  std::size_t max_hop = 2;
  std::size_t pe_dim = 128;
  std::size_t gin_layers = 2;
  // Seeds the per-node random features of the positional encoder.
  std::uint64_t pe_seed = 0;

  std::size_t time_freqs() const { return d / 2; }
  void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

// omega_j = 10000^(-2j/d), j = 0..d/2-1, in radians per day.
std::vector<double> time_frequencies(std::size_t d);

// Rows [sin(omega_j dt) | cos(omega_j dt)] with dt in days. Rows for
// kUnboundedDelta are left zero (they are replaced by the mask vector).
Tensor time_features(const std::vector<std::int64_t>& delta_seconds, std::size_t d);

// Random initial positional features of a node, a pure function of
// (seed, node id) so that relabeling the subgraph permutes them.
Tensor positional_init(const std::vector<NodeId>& nodes, std::size_t width, std::uint64_t seed);

class Encoders {
 public:
  // `features` must outlive the encoder; one entry per table in schema order.
  Encoders(const EncoderConfig& config, const std::vector<TableFeatures>& features, ParameterSet& params,
           std::mt19937_64& rng);

  const EncoderConfig& config() const { return config_; }

  Var encode_type(Tape& tape, const std::vector<std::uint32_t>& types) const;
  Var encode_hop(Tape& tape, const std::vector<std::uint32_t>& hops) const;
  Var encode_time(Tape& tape, const std::vector<std::int64_t>& delta_seconds) const;
  // Rows of one table.
  Var encode_tabular(Tape& tape, std::size_t table, const std::vector<std::size_t>& rows) const;
  // One row per node, any mix of tables.
  Var encode_tabular_nodes(Tape& tape, const RelGraph& graph, const std::vector<NodeId>& nodes) const;
  // `sum_adjacency` over the same rows as `nodes`.
  Var encode_position(Tape& tape, const std::vector<NodeId>& nodes, const SparseRows& sum_adjacency) const;
  Var mix(Tape& tape, const Var& type_e, const Var& hop_e, const Var& time_e, const Var& tab_e,
          const Var& pos_e) const;

  // Full node representation H for a packed batch.
  Var encode(Tape& tape, const RelGraph& graph, const PackedBatch& batch) const;

  // Tabular embedding of every graph node with current parameters, no
  // gradients; feeds the semantic similarity of the sampler.
  Tensor embed_all(const RelGraph& graph) const;

 private:
  struct TableEncoder {
    Parameter* numeric = nullptr;  // numeric columns x d, absent when none
    Parameter* bias;
    std::vector<Parameter*> categorical;
    std::vector<ResBlock> blocks;
  };
  struct GinLayer {
    Parameter* eps;
    ResBlock mlp;
  };

  EncoderConfig config_;
  const std::vector<TableFeatures>* features_;
  std::vector<double> freqs_;
  Parameter* type_table_;
  Parameter* hop_table_;
  Linear time_proj_;
  Parameter* time_mask_;
  std::vector<TableEncoder> tables_;
  std::vector<GinLayer> gin_;
  Linear pos_out_;
  std::vector<Norm> mix_norms_;
  Linear mix_hidden_;
  Linear mix_out_;
};

}  // namespace gelgt
