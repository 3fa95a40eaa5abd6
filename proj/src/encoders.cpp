#include "gelgt/encoders.hpp"

#include <cmath>

#include "gelgt/errors.hpp"
#include "gelgt/init.hpp"
#include "gelgt/ops.hpp"
#include "gelgt/synthgen.hpp"

namespace gelgt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void EncoderConfig::validate() const {
  if (d == 0 || d % 2 != 0) throw ConfigError("encoder width d must be positive and even");
  if (pe_dim == 0 || pe_dim > d) throw ConfigError("pe_dim must lie in [1, d]");
  if (n_node_types == 0) throw ConfigError("n_node_types must be positive");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"d", c.d}, {"max_hop", c.max_hop}, {"pe_dim", c.pe_dim}, {"gin_layers", c.gin_layers}, {"pe_seed", c.pe_seed}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  if (j.contains("d")) j.at("d").get_to(c.d);
  if (j.contains("max_hop")) j.at("max_hop").get_to(c.max_hop);
  if (j.contains("pe_dim")) j.at("pe_dim").get_to(c.pe_dim);
  if (j.contains("gin_layers")) j.at("gin_layers").get_to(c.gin_layers);
  if (j.contains("pe_seed")) j.at("pe_seed").get_to(c.pe_seed);
}

std::vector<double> time_frequencies(std::size_t d) {
  std::vector<double> f(d / 2);
  for (std::size_t j = 0; j < f.size(); ++j) {
    f[j] = std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(d));
  }
  return f;
}

Tensor time_features(const std::vector<std::int64_t>& delta_seconds, std::size_t d) {
  const auto freqs = time_frequencies(d);
  const std::size_t half = freqs.size();
  Tensor out = Tensor::zeros(delta_seconds.size(), 2 * half);
  for (std::size_t i = 0; i < delta_seconds.size(); ++i) {
    if (delta_seconds[i] == kUnboundedDelta) continue;
    const double days = static_cast<double>(delta_seconds[i]) / static_cast<double>(kSecondsPerDay);
    for (std::size_t j = 0; j < half; ++j) {
      out(i, j) = std::sin(freqs[j] * days);
      out(i, half + j) = std::cos(freqs[j] * days);
    }
  }
  return out;
}

Tensor positional_init(const std::vector<NodeId>& nodes, std::size_t width, std::uint64_t seed) {
  Tensor out = Tensor::zeros(nodes.size(), width);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(nodes[i])));
    for (std::size_t j = 0; j < width; ++j) out(i, j) = dist(rng);
  }
  return out;
}

Encoders::Encoders(const EncoderConfig& config, const std::vector<TableFeatures>& features, ParameterSet& params,
                   std::mt19937_64& rng)
    : config_(config), features_(&features), freqs_(time_frequencies(config.d)) {
  config_.validate();
  const std::size_t d = config_.d;
  if (features.size() != config_.n_node_types) throw ConfigError("one feature table per node type required");

  type_table_ = &params.add("enc.type", normal_tensor(config_.n_node_types, d, 1.0, rng));
  hop_table_ = &params.add("enc.hop", normal_tensor(config_.max_hop + 1, d, 1.0, rng));
  time_proj_ = make_linear(params, "enc.time.proj", d, d, rng);
  time_mask_ = &params.add("enc.time.mask", normal_tensor(1, d, 1.0, rng));

  for (std::size_t t = 0; t < features.size(); ++t) {
    const TableFeatures& f = features[t];
    const std::string name = "enc.tab" + std::to_string(t);
    TableEncoder enc;
    const std::size_t n_cols = f.numeric_names.size() + f.categorical_names.size();
    const double sd = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(n_cols, 1)));
    if (!f.numeric_names.empty()) {
      enc.numeric = &params.add(name + ".num", normal_tensor(f.numeric_names.size(), d, sd, rng));
    }
    enc.bias = &params.add(name + ".bias", Tensor::zeros(1, d));
    enc.bias->weight_decay = false;
    for (std::size_t c = 0; c < f.categorical_names.size(); ++c) {
      enc.categorical.push_back(&params.add(name + ".cat" + std::to_string(c),
                                            normal_tensor(f.category_sizes[c], d, sd, rng)));
    }
    for (int b = 0; b < 2; ++b) enc.blocks.push_back(make_block(params, name + ".block" + std::to_string(b), d, rng));
    tables_.push_back(std::move(enc));
  }

  for (std::size_t l = 0; l < config_.gin_layers; ++l) {
    const std::string name = "enc.gin" + std::to_string(l);
    Parameter& eps = params.add(name + ".eps", Tensor::scalar(0.0));
    eps.weight_decay = false;
    gin_.push_back({&eps, make_block(params, name, config_.pe_dim, rng)});
  }
  pos_out_ = make_linear(params, "enc.pos.out", config_.pe_dim, config_.pe_dim, rng);

  for (const char* part : {"type", "hop", "time", "tab"}) {
    mix_norms_.push_back(make_norm(params, std::string("enc.mix.norm_") + part, d));
  }
  mix_norms_.push_back(make_norm(params, "enc.mix.norm_pos", config_.pe_dim));
  mix_hidden_ = make_linear(params, "enc.mix.fc1", 4 * d + config_.pe_dim, d, rng);
  mix_out_ = make_linear(params, "enc.mix.fc2", d, d, rng);
}

Var Encoders::encode_type(Tape& tape, const std::vector<std::uint32_t>& types) const {
  std::vector<std::size_t> rows(types.begin(), types.end());
  for (std::size_t r : rows) {
    if (r >= config_.n_node_types) throw ShapeError("node type " + std::to_string(r) + " out of range");
  }
  return gather_rows(tape.param(*type_table_), rows);
}

Var Encoders::encode_hop(Tape& tape, const std::vector<std::uint32_t>& hops) const {
  std::vector<std::size_t> rows(hops.begin(), hops.end());
  for (std::size_t r : rows) {
    if (r > config_.max_hop) throw ShapeError("hop " + std::to_string(r) + " exceeds max_hop");
  }
  return gather_rows(tape.param(*hop_table_), rows);
}

Var Encoders::encode_time(Tape& tape, const std::vector<std::int64_t>& delta_seconds) const {
  Var projected = time_proj_.apply(tape, tape.constant(time_features(delta_seconds, config_.d)));
  std::vector<bool> invalid(delta_seconds.size());
  bool any = false;
  for (std::size_t i = 0; i < delta_seconds.size(); ++i) {
    // No timestamp, or a neighbour that does not precede the seed.
    invalid[i] = delta_seconds[i] == kUnboundedDelta || delta_seconds[i] < 0;
    any = any || invalid[i];
  }
  if (!any) return projected;
  return replace_rows(projected, tape.param(*time_mask_), invalid);
}

Var Encoders::encode_tabular(Tape& tape, std::size_t table, const std::vector<std::size_t>& rows) const {
  if (table >= tables_.size()) throw ShapeError("unknown table " + std::to_string(table));
  const TableEncoder& enc = tables_[table];
  const TableFeatures& f = (*features_)[table];
  const std::size_t d = config_.d;

  Var h = tape.constant(Tensor::zeros(rows.size(), d));
  if (enc.numeric != nullptr) {
    const std::size_t c = f.numeric.cols();
    Tensor x = Tensor::zeros(rows.size(), c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) x(i, j) = f.numeric(rows[i], j);
    }
    h = matmul(tape.constant(std::move(x)), tape.param(*enc.numeric));
  }
  h = add_row(h, tape.param(*enc.bias));
  for (std::size_t c = 0; c < enc.categorical.size(); ++c) {
    std::vector<std::size_t> ids(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) ids[i] = f.categories[c][rows[i]];
    h = add(h, gather_rows(tape.param(*enc.categorical[c]), ids));
  }
  for (const ResBlock& block : enc.blocks) h = block.apply(tape, h);
  return h;
}

Var Encoders::encode_tabular_nodes(Tape& tape, const RelGraph& graph, const std::vector<NodeId>& nodes) const {
  std::vector<std::vector<std::size_t>> rows(tables_.size());
  std::vector<std::vector<std::size_t>> where(tables_.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::uint32_t t = graph.node_type(nodes[i]);
    rows[t].push_back(graph.node_row(nodes[i]));
    where[t].push_back(i);
  }
  std::vector<Var> parts;
  std::vector<std::size_t> order(nodes.size());
  std::size_t offset = 0;
  for (std::size_t t = 0; t < tables_.size(); ++t) {
    if (rows[t].empty()) continue;
    parts.push_back(encode_tabular(tape, t, rows[t]));
    for (std::size_t k = 0; k < where[t].size(); ++k) order[where[t][k]] = offset + k;
    offset += rows[t].size();
  }
  if (parts.empty()) throw ShapeError("encode_tabular_nodes: no nodes");
  Var stacked = parts.size() == 1 ? parts.front() : concat_rows(parts);
  return gather_rows(stacked, order);
}

Var Encoders::encode_position(Tape& tape, const std::vector<NodeId>& nodes, const SparseRows& sum_adjacency) const {
  Var x = tape.constant(positional_init(nodes, config_.pe_dim, config_.pe_seed));
  for (const GinLayer& layer : gin_) {
    Var self = mul_scalar(x, add_const(tape.param(*layer.eps), 1.0));
    Var z = add(self, spmm(sum_adjacency, x));
    x = add(x, layer.mlp.branch(tape, z));
  }
  return pos_out_.apply(tape, x);
}

Var Encoders::mix(Tape& tape, const Var& type_e, const Var& hop_e, const Var& time_e, const Var& tab_e,
                  const Var& pos_e) const {
  const std::size_t d = config_.d;
  const std::size_t n = type_e.rows();
  for (const Var* v : {&type_e, &hop_e, &time_e, &tab_e}) {
    if (v->cols() != d || v->rows() != n) throw ShapeError("mix: component width must equal d");
  }
  if (pos_e.cols() != config_.pe_dim || pos_e.rows() != n) throw ShapeError("mix: positional width must equal pe_dim");
  std::vector<Var> parts{mix_norms_[0].apply(tape, type_e), mix_norms_[1].apply(tape, hop_e),
                         mix_norms_[2].apply(tape, time_e), mix_norms_[3].apply(tape, tab_e),
                         mix_norms_[4].apply(tape, pos_e)};
  return mix_out_.apply(tape, gelu(mix_hidden_.apply(tape, concat_cols(parts))));
}

Var Encoders::encode(Tape& tape, const RelGraph& graph, const PackedBatch& batch) const {
  return mix(tape, encode_type(tape, batch.node_types), encode_hop(tape, batch.hops),
             encode_time(tape, batch.delta_t), encode_tabular_nodes(tape, graph, batch.nodes),
             encode_position(tape, batch.nodes, batch.sum_adjacency));
}

Tensor Encoders::embed_all(const RelGraph& graph) const {
  constexpr std::size_t kChunk = 4096;
  Tensor out = Tensor::zeros(graph.node_count(), config_.d);
  for (std::size_t t = 0; t < tables_.size(); ++t) {
    const std::size_t n = graph.type_node_count(t);
    for (std::size_t start = 0; start < n; start += kChunk) {
      Tape tape;
      tape.set_grad_enabled(false);
      std::vector<std::size_t> rows;
      for (std::size_t r = start; r < std::min(n, start + kChunk); ++r) rows.push_back(r);
      const Tensor& h = encode_tabular(tape, t, rows).value();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const NodeId v = graph.node_of(t, rows[i]);
        std::copy_n(h.data() + i * config_.d, config_.d, out.data() + static_cast<std::size_t>(v) * config_.d);
      }
    }
  }
  return out;
}

}  // namespace gelgt
