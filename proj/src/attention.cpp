#include "gelgt/attention.hpp"

#include <cmath>

#include "gelgt/errors.hpp"
#include "gelgt/init.hpp"
#include "gelgt/ops.hpp"
#include "gelgt/sampler.hpp"
#include "gelgt/synthgen.hpp"

namespace gelgt {

double gaussian_kernel(double dt, double mu, double sigma) {
  const double z = dt - mu;
  return std::exp(-z * z / (2.0 * sigma * sigma));
}

double grad_mu_closed_form(double dt, double mu, double sigma) {
  return gaussian_kernel(dt, mu, sigma) * (dt - mu) / (sigma * sigma);
}

double sigma_from_rho(double rho) {
  return std::max(rho, 0.0) + std::log1p(std::exp(-std::abs(rho))) + kSigmaMin;
}

double rho_for_sigma(double sigma) {
  if (!(sigma > kSigmaMin)) throw ConfigError("sigma must exceed the floor");
  const double s = sigma - kSigmaMin;
  // inverse softplus, stable for large s
  return s + std::log(-std::expm1(-s));
}

Var gaussian_kernel(const Var& dt, const Var& mu, const Var& sigma) {
  Var coeff = scale(reciprocal(square(sigma)), -0.5);
  return exponential(mul_scalar(square(add_scalar(dt, neg(mu))), coeff));
}

Tensor pairwise_days(std::span<const std::int64_t> delta_seconds) {
  const std::size_t n = delta_seconds.size();
  Tensor out = Tensor::zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (delta_seconds[i] == kUnboundedDelta || delta_seconds[j] == kUnboundedDelta) {
        out(i, j) = kFarDays;
      } else {
        const auto diff = static_cast<double>(delta_seconds[i] > delta_seconds[j] ? delta_seconds[i] - delta_seconds[j]
                                                                                   : delta_seconds[j] - delta_seconds[i]);
        out(i, j) = diff / static_cast<double>(kSecondsPerDay);
      }
    }
  }
  return out;
}

AttentionLayer::AttentionLayer(const std::string& prefix, const AttentionConfig& config, ParameterSet& params,
                               std::mt19937_64& rng)
    : d_(config.d), n_heads_(config.n_heads) {
  if (n_heads_ == 0 || d_ % n_heads_ != 0) throw ConfigError("d must be divisible by n_heads");
  head_dim_ = d_ / n_heads_;
  wq_ = &params.add(prefix + ".wq", linear_weight(d_, d_, rng));
  wk_ = &params.add(prefix + ".wk", linear_weight(d_, d_, rng));
  wv_ = &params.add(prefix + ".wv", linear_weight(d_, d_, rng));
  out_ = make_linear(params, prefix + ".out", d_, d_, rng);
  mu_ = &params.add(prefix + ".mu", filled_row(n_heads_, config.mu_init));
  rho_ = &params.add(prefix + ".rho", filled_row(n_heads_, rho_for_sigma(config.sigma_init)));
  bias_scale_ = &params.add(prefix + ".bias_scale", filled_row(n_heads_, 1.0));
  bias_shift_ = &params.add(prefix + ".bias_shift", filled_row(n_heads_, 0.0));
  for (Parameter* p : {mu_, rho_}) p->lr_scale = config.temporal_lr_scale;
  for (Parameter* p : {mu_, rho_, bias_scale_, bias_shift_}) p->weight_decay = false;
}

AttentionLayer::HeadBias AttentionLayer::head_bias(Tape& tape, std::size_t head) const {
  if (head >= n_heads_) throw ShapeError("head index out of range");
  Var sigma = add_const(softplus(slice_cols(tape.param(*rho_), head, 1)), kSigmaMin);
  return {slice_cols(tape.param(*mu_), head, 1), scale(reciprocal(square(sigma)), -0.5),
          slice_cols(tape.param(*bias_scale_), head, 1), slice_cols(tape.param(*bias_shift_), head, 1)};
}

Var AttentionLayer::bias_from(const HeadBias& hb, Tape& tape, const Tensor& days) const {
  Var kernel = exponential(mul_scalar(square(add_scalar(tape.constant(days), neg(hb.mu))), hb.coeff));
  return add_scalar(mul_scalar(kernel, hb.scale), hb.shift);
}

Var AttentionLayer::bias_matrix(Tape& tape, const Tensor& days, std::size_t head) const {
  if (days.rows() != days.cols()) throw ShapeError("bias_matrix: days must be square");
  return bias_from(head_bias(tape, head), tape, days);
}

Var AttentionLayer::heads(Tape& tape, const Var& q, const Var& k, const Var& v, const Tensor& packed_days,
                          const std::vector<std::size_t>& offsets, BiasMode mode, std::vector<Tensor>* weights) const {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  const std::size_t n_blocks = offsets.size() - 1;
  std::vector<std::vector<Tensor>> per_head(weights != nullptr ? n_heads_ : 0);
  std::vector<Var> outs;
  for (std::size_t h = 0; h < n_heads_; ++h) {
    Var qh = n_heads_ == 1 ? q : slice_cols(q, h * head_dim_, head_dim_);
    Var kh = n_heads_ == 1 ? k : slice_cols(k, h * head_dim_, head_dim_);
    Var vh = n_heads_ == 1 ? v : slice_cols(v, h * head_dim_, head_dim_);
    Var bias;
    if (mode == BiasMode::gaussian) {
      bias = bias_from(head_bias(tape, h), tape, packed_days);
    } else if (mode == BiasMode::zero) {
      bias = tape.constant(Tensor::zeros(1, packed_days.size()));
    }
    outs.push_back(block_attention(qh, kh, vh, mode == BiasMode::none ? nullptr : &bias, offsets, inv_sqrt,
                                   weights != nullptr ? &per_head[h] : nullptr));
  }
  if (weights != nullptr) {
    for (std::size_t s = 0; s < n_blocks; ++s) {
      for (std::size_t h = 0; h < n_heads_; ++h) weights->push_back(std::move(per_head[h][s]));
    }
  }
  return n_heads_ == 1 ? outs.front() : concat_cols(outs);
}

Var AttentionLayer::attend(Tape& tape, const Var& h, const Tensor& days, BiasMode mode,
                           std::vector<Tensor>* weights) const {
  if (h.cols() != d_) throw ShapeError("attend: input width differs from d");
  if (days.rows() != h.rows() || days.cols() != h.rows()) throw ShapeError("attend: days must be N x N");
  // An N x N row-major matrix is already one packed block.
  const Tensor packed({1, days.size()}, std::vector<double>(days.values().begin(), days.values().end()));
  Var q = matmul(h, tape.param(*wq_));
  Var k = matmul(h, tape.param(*wk_));
  Var v = matmul(h, tape.param(*wv_));
  return out_.apply(tape, heads(tape, q, k, v, packed, {0, h.rows()}, mode, weights));
}

Var AttentionLayer::attend_batch(Tape& tape, const Var& h, const PackedBatch& batch, BiasMode mode,
                                 std::vector<Tensor>* weights) const {
  if (h.cols() != d_ || h.rows() != batch.node_count()) throw ShapeError("attend_batch: input shape mismatch");
  std::vector<double> packed;
  for (std::size_t s = 0; s < batch.subgraph_count(); ++s) {
    const Tensor days = pairwise_days(std::span(batch.delta_t).subspan(batch.offsets[s], batch.subgraph_size(s)));
    packed.insert(packed.end(), days.values().begin(), days.values().end());
  }
  const std::size_t n_packed = packed.size();
  const Tensor packed_days({1, n_packed}, std::move(packed));
  Var q = matmul(h, tape.param(*wq_));
  Var k = matmul(h, tape.param(*wk_));
  Var v = matmul(h, tape.param(*wv_));
  return out_.apply(tape, heads(tape, q, k, v, packed_days, batch.offsets, mode, weights));
}

std::vector<double> AttentionLayer::mu() const {
  return {mu_->value.data(), mu_->value.data() + n_heads_};
}

std::vector<double> AttentionLayer::sigma() const {
  std::vector<double> out(n_heads_);
  for (std::size_t h = 0; h < n_heads_; ++h) out[h] = sigma_from_rho(rho_->value[h]);
  return out;
}

}  // namespace gelgt
