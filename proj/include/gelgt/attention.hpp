#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gelgt/batch.hpp"
#include "gelgt/layers.hpp"
#include "gelgt/tape.hpp"

// Multi-head self-attention over the complete graph of a sampled subgraph,
// with an additive per-head Gaussian bias on pairwise time distance:
//   bias_ij = a_h * exp(-(dt_ij - mu_h)^2 / (2 sigma_h^2)) + b_h
// with dt_ij = |t_i - t_j| in days and sigma_h = softplus(rho_h) + kSigmaMin.
namespace gelgt {

inline constexpr double kSigmaMin = 1e-3;
// Stand-in distance (days) for pairs involving a node without a timestamp;
// large enough that the kernel underflows to exactly 0 at any sane sigma.
inline constexpr double kFarDays = 1e6;

double gaussian_kernel(double dt, double mu, double sigma);
// d kernel / d mu = kernel * (dt - mu) / sigma^2
double grad_mu_closed_form(double dt, double mu, double sigma);
double sigma_from_rho(double rho);
double rho_for_sigma(double sigma);

// Differentiable kernel: dt any constant tensor, mu and sigma 1x1.
Var gaussian_kernel(const Var& dt, const Var& mu, const Var& sigma);
using KernelFn = std::function<Var(const Var& dt, const Var& mu, const Var& sigma)>;

// N x N matrix of |dt_i - dt_j| in days.
Tensor pairwise_days(std::span<const std::int64_t> delta_seconds);

enum class BiasMode {
  gaussian,  // learned Gaussian bias
  zero,      // an all-zero bias matrix is added
  none,      // no bias term at all (vanilla attention)
};

struct AttentionConfig {
  std::size_t d = 512;
  std::size_t n_heads = 4;
  double mu_init = 0.0;      // days
  double sigma_init = 10.0;  // days
  // Learning-rate multiplier for mu and rho.
  double temporal_lr_scale = 1.0;
};

class AttentionLayer {
 public:
  AttentionLayer(const std::string& prefix, const AttentionConfig& config, ParameterSet& params,
                 std::mt19937_64& rng);

  std::size_t n_heads() const { return n_heads_; }
  std::size_t head_dim() const { return head_dim_; }

  Var bias_matrix(Tape& tape, const Tensor& days, std::size_t head) const;

  // One subgraph; h is N x d, days is N x N. When `weights` is given it
  // receives the per-head attention matrices.
  Var attend(Tape& tape, const Var& h, const Tensor& days, BiasMode mode, std::vector<Tensor>* weights = nullptr) const;

  // Every subgraph of a packed batch, attention restricted to each block.
  Var attend_batch(Tape& tape, const Var& h, const PackedBatch& batch, BiasMode mode,
                   std::vector<Tensor>* weights = nullptr) const;

  std::vector<double> mu() const;
  std::vector<double> sigma() const;

  Parameter& mu_param() { return *mu_; }
  Parameter& rho_param() { return *rho_; }
  Parameter& bias_scale_param() { return *bias_scale_; }
  Parameter& bias_shift_param() { return *bias_shift_; }
  Parameter& wq() { return *wq_; }
  Parameter& wk() { return *wk_; }
  Parameter& wv() { return *wv_; }

 private:
  struct HeadBias {
    Var mu;
    Var coeff;  // -1 / (2 sigma^2)
    Var scale;
    Var shift;
  };
  HeadBias head_bias(Tape& tape, std::size_t head) const;
  Var bias_from(const HeadBias& hb, Tape& tape, const Tensor& days) const;
  // Heads concatenated, before the output projection. `packed_days` holds
  // each block's pairwise distances row-major, block after block.
  Var heads(Tape& tape, const Var& q, const Var& k, const Var& v, const Tensor& packed_days,
            const std::vector<std::size_t>& offsets, BiasMode mode, std::vector<Tensor>* weights) const;

  std::size_t d_;
  std::size_t n_heads_;
  std::size_t head_dim_;
  Parameter* wq_;
  Parameter* wk_;
  Parameter* wv_;
  Linear out_;
  Parameter* mu_;
  Parameter* rho_;
  Parameter* bias_scale_;
  Parameter* bias_shift_;
};

}  // namespace gelgt
