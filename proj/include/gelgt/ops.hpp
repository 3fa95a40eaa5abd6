#pragma once

#include <cstddef>
#include <vector>

#include "gelgt/tape.hpp"
#include "gelgt/tensor.hpp"

// Differentiable ops over Var. Every op checks shapes and throws ShapeError
// on mismatch. "Row vector" means a 1xC tensor; "scalar" means 1x1.
namespace gelgt {

inline constexpr double kLayerNormEps = 1e-5;

// Plain tensor kernels, no tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift);
Tensor gelu(const Tensor& x);
double gelu(double x);

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// x (NxC) + row (1xC) broadcast over rows.
Var add_row(const Var& x, const Var& row);
// x W + b
Var affine(const Var& x, const Var& weight, const Var& bias);
Var scale(const Var& x, double c);
Var add_const(const Var& x, double c);
Var neg(const Var& x);
// x * s and x + s for a scalar Var s.
Var mul_scalar(const Var& x, const Var& s);
Var add_scalar(const Var& x, const Var& s);

Var square(const Var& x);
Var exponential(const Var& x);
Var reciprocal(const Var& x);
Var softplus(const Var& x);
Var sigmoid(const Var& x);
Var gelu(const Var& x);

Var softmax_rows(const Var& x);

// Softmax attention restricted to diagonal blocks: rows [offsets[s],
// offsets[s+1]) of q attend only to the same rows of k and v. `bias`, when
// given, is 1 x sum(n_s^2) holding each block's n_s x n_s additive scores
// row-major, block after block. If `weights` is non-null it receives each
// block's attention matrix.
Var block_attention(const Var& q, const Var& k, const Var& v, const Var* bias,
                    const std::vector<std::size_t>& offsets, double score_scale,
                    std::vector<Tensor>* weights = nullptr);
// Row-wise (x - mean) / sqrt(var + eps) * gain + shift.
Var layer_norm(const Var& x, const Var& gain, const Var& shift);

Var sum(const Var& x);
Var mean(const Var& x);

Var gather_rows(const Var& table, const std::vector<std::size_t>& rows);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& x, std::size_t start, std::size_t len);
Var slice_rows(const Var& x, std::size_t start, std::size_t len);
// Rows i with mask[i] set are replaced by `row`.
Var replace_rows(const Var& x, const Var& row, const std::vector<bool>& mask);

// Sparse row-compressed matrix used for message passing.
struct SparseRows {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col;
  std::vector<double> val;

  void push(std::size_t c, double v) {
    col.push_back(c);
    val.push_back(v);
  }
  void end_row() {
    row_ptr.push_back(col.size());
    ++n_rows;
  }
};

// A x for sparse A.
Var spmm(const SparseRows& a, const Var& x);

// Inverted dropout driven by the tape RNG; identity when the tape is in eval
// mode or rate == 0.
Var dropout(const Var& x, double rate);

// Logistic loss on a single logit: softplus(z) - y z.
Var bce_with_logits(const Var& logit, double target);
// |score - target| on a single value.
Var abs_error(const Var& score, double target);
// Mean of the per-element losses over an Nx1 column.
Var bce_with_logits(const Var& logits, const std::vector<double>& targets);
Var abs_error(const Var& scores, const std::vector<double>& targets);

}  // namespace gelgt
