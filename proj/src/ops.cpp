#include "gelgt/ops.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "gelgt/errors.hpp"

namespace gelgt {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

MatMap as_mat(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

ConstMatMap as_mat(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

void require_scalar(const Tensor& s, const char* op) {
  if (s.size() != 1) throw ShapeError(std::string(op) + ": expected scalar, got " + s.shape_string());
}

void require_row(const Tensor& row, std::size_t cols, const char* op) {
  if (row.rows() != 1 || row.cols() != cols) {
    throw ShapeError(std::string(op) + ": expected 1x" + std::to_string(cols) + " row, got " + row.shape_string());
  }
}

// Elementwise op; deriv maps an input element to d out / d in.
template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  const Tensor& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return x.tape().record(std::move(out), {x}, [x, deriv](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_buffer(x);
    if (gx == nullptr) return;
    const Tensor& in = x.value();
    for (std::size_t i = 0; i < in.size(); ++i) (*gx)[i] += g[i] * deriv(in[i]);
  });
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

void softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    total += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= total;
}

struct LayerNormStats {
  Tensor xhat;
  std::vector<double> rstd;
};

LayerNormStats normalize_rows(const Tensor& x) {
  LayerNormStats s{Tensor(x.shape()), std::vector<double>(x.rows())};
  const std::size_t c = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* row = x.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    s.rstd[r] = rstd;
    for (std::size_t j = 0; j < c; ++j) s.xhat(r, j) = (row[j] - mu) * rstd;
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + a.shape_string() + " x " + b.shape_string());
  }
  Tensor out = Tensor::zeros(a.rows(), b.cols());
  as_mat(out).noalias() = as_mat(a) * as_mat(b);
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out(x.shape());
  const std::size_t c = x.cols();
  if (c == 0) return out;
  for (std::size_t r = 0; r < x.rows(); ++r) softmax_row(x.data() + r * c, out.data() + r * c, c);
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift) {
  require_row(gain, x.cols(), "layer_norm");
  require_row(shift, x.cols(), "layer_norm");
  LayerNormStats s = normalize_rows(x);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = s.xhat(r, j) * gain[j] + shift[j];
  }
  return out;
}

double gelu(double x) {
  return x * normal_cdf(x);
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu(x[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(const Var& a, const Var& b) {
  Tensor out = matmul(a.value(), b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_buffer(a)) as_mat(*ga).noalias() += as_mat(g) * as_mat(b.value()).transpose();
    if (Tensor* gb = tape.grad_buffer(b)) as_mat(*gb).noalias() += as_mat(a.value()).transpose() * as_mat(g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_nt: inner dimensions disagree " + av.shape_string() + " x " + bv.shape_string() + "^T");
  }
  Tensor out = Tensor::zeros(av.rows(), bv.rows());
  as_mat(out).noalias() = as_mat(av) * as_mat(bv).transpose();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_buffer(a)) as_mat(*ga).noalias() += as_mat(g) * as_mat(b.value());
    if (Tensor* gb = tape.grad_buffer(b)) as_mat(*gb).noalias() += as_mat(g).transpose() * as_mat(a.value());
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  as_mat(out) += as_mat(b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_buffer(a)) as_mat(*ga) += as_mat(g);
    if (Tensor* gb = tape.grad_buffer(b)) as_mat(*gb) += as_mat(g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  as_mat(out) -= as_mat(b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_buffer(a)) as_mat(*ga) += as_mat(g);
    if (Tensor* gb = tape.grad_buffer(b)) as_mat(*gb) -= as_mat(g);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  as_mat(out).array() *= as_mat(b.value()).array();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (Tensor* ga = tape.grad_buffer(a)) as_mat(*ga).array() += as_mat(g).array() * as_mat(b.value()).array();
    if (Tensor* gb = tape.grad_buffer(b)) as_mat(*gb).array() += as_mat(g).array() * as_mat(a.value()).array();
  });
}

Var add_row(const Var& x, const Var& row) {
  const Tensor& xv = x.value();
  require_row(row.value(), xv.cols(), "add_row");
  Tensor out = xv;
  as_mat(out).rowwise() += as_mat(row.value()).row(0);
  return x.tape().record(std::move(out), {x, row}, [x, row](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) as_mat(*gx) += as_mat(g);
    if (Tensor* gr = tape.grad_buffer(row)) as_mat(*gr).row(0) += as_mat(g).colwise().sum();
  });
}

Var affine(const Var& x, const Var& weight, const Var& bias) {
  return add_row(matmul(x, weight), bias);
}

Var scale(const Var& x, double c) {
  Tensor out = x.value();
  as_mat(out) *= c;
  return x.tape().record(std::move(out), {x}, [x, c](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) as_mat(*gx) += c * as_mat(g);
  });
}

Var add_const(const Var& x, double c) {
  Tensor out = x.value();
  as_mat(out).array() += c;
  return x.tape().record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) as_mat(*gx) += as_mat(g);
  });
}

Var neg(const Var& x) {
  return scale(x, -1.0);
}

Var mul_scalar(const Var& x, const Var& s) {
  require_scalar(s.value(), "mul_scalar");
  const double sv = s.value()[0];
  Tensor out = x.value();
  as_mat(out) *= sv;
  return x.tape().record(std::move(out), {x, s}, [x, s](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) as_mat(*gx) += s.value()[0] * as_mat(g);
    if (Tensor* gs = tape.grad_buffer(s)) (*gs)[0] += (as_mat(g).array() * as_mat(x.value()).array()).sum();
  });
}

Var add_scalar(const Var& x, const Var& s) {
  require_scalar(s.value(), "add_scalar");
  Tensor out = x.value();
  as_mat(out).array() += s.value()[0];
  return x.tape().record(std::move(out), {x, s}, [x, s](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) as_mat(*gx) += as_mat(g);
    if (Tensor* gs = tape.grad_buffer(s)) (*gs)[0] += as_mat(g).sum();
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Var square(const Var& x) {
  return unary(x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var exponential(const Var& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var reciprocal(const Var& x) {
  return unary(x, [](double v) { return 1.0 / v; }, [](double v) { return -1.0 / (v * v); });
}

Var softplus(const Var& x) {
  return unary(x, softplus_value, logistic);
}

Var sigmoid(const Var& x) {
  return unary(x, logistic, [](double v) {
    const double s = logistic(v);
    return s * (1.0 - s);
  });
}

Var gelu(const Var& x) {
  return unary(x, [](double v) { return gelu(v); }, [](double v) { return normal_cdf(v) + v * normal_pdf(v); });
}

// ---------------------------------------------------------------------------
// Normalization

Var softmax_rows(const Var& x) {
  auto y = std::make_shared<Tensor>(softmax_rows(x.value()));
  Tensor out = *y;
  return x.tape().record(std::move(out), {x}, [x, y](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_buffer(x);
    if (gx == nullptr) return;
    const std::size_t c = y->cols();
    for (std::size_t r = 0; r < y->rows(); ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g(r, j) * (*y)(r, j);
      for (std::size_t j = 0; j < c; ++j) (*gx)(r, j) += (*y)(r, j) * (g(r, j) - dot);
    }
  });
}

Var block_attention(const Var& q, const Var& k, const Var& v, const Var* bias,
                    const std::vector<std::size_t>& offsets, double score_scale, std::vector<Tensor>* weights) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != qv.rows()) {
    throw ShapeError("block_attention: offsets do not cover the rows");
  }
  if (!qv.same_shape(kv) || vv.rows() != qv.rows()) throw ShapeError("block_attention: q, k, v shapes disagree");
  std::size_t packed = 0;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    if (offsets[s + 1] < offsets[s]) throw ShapeError("block_attention: offsets must be non-decreasing");
    const std::size_t n = offsets[s + 1] - offsets[s];
    packed += n * n;
  }
  if (bias != nullptr && bias->value().size() != packed) throw ShapeError("block_attention: bias size mismatch");

  // Attention probabilities of every block, packed like the bias.
  auto probs = std::make_shared<Tensor>(Tensor::zeros(1, packed));
  Tensor out = Tensor::zeros(qv.rows(), vv.cols());
  std::size_t at = 0;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto start = static_cast<Eigen::Index>(offsets[s]);
    const auto n = static_cast<Eigen::Index>(offsets[s + 1] - offsets[s]);
    MatMap a(probs->data() + at, n, n);
    a.noalias() = score_scale * as_mat(qv).middleRows(start, n) * as_mat(kv).middleRows(start, n).transpose();
    if (bias != nullptr) a += ConstMatMap(bias->value().data() + at, n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const double m = a.row(r).maxCoeff();
      a.row(r) = (a.row(r).array() - m).exp();
      a.row(r) /= a.row(r).sum();
    }
    as_mat(out).middleRows(start, n).noalias() = a * as_mat(vv).middleRows(start, n);
    if (weights != nullptr) {
      Tensor w = Tensor::zeros(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
      as_mat(w) = a;
      weights->push_back(std::move(w));
    }
    at += static_cast<std::size_t>(n * n);
  }

  std::vector<Var> parents{q, k, v};
  if (bias != nullptr) parents.push_back(*bias);
  const Var b = bias != nullptr ? *bias : Var();
  const bool has_bias = bias != nullptr;
  return q.tape().record(
      std::move(out), parents, [q, k, v, b, has_bias, probs, offsets, score_scale](Tape& tape, const Tensor& g) {
        Tensor* gq = tape.grad_buffer(q);
        Tensor* gk = tape.grad_buffer(k);
        Tensor* gv = tape.grad_buffer(v);
        Tensor* gb = has_bias ? tape.grad_buffer(b) : nullptr;
        const Tensor& qv = q.value();
        const Tensor& kv = k.value();
        const Tensor& vv = v.value();
        RowMat ds;
        std::size_t at = 0;
        for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
          const auto start = static_cast<Eigen::Index>(offsets[s]);
          const auto n = static_cast<Eigen::Index>(offsets[s + 1] - offsets[s]);
          ConstMatMap a(probs->data() + at, n, n);
          const auto go = as_mat(g).middleRows(start, n);
          if (gv != nullptr) as_mat(*gv).middleRows(start, n).noalias() += a.transpose() * go;
          // d scores = A o (dA - rowsum(dA o A))
          ds.noalias() = go * as_mat(vv).middleRows(start, n).transpose();
          const Eigen::VectorXd dot = (ds.array() * a.array()).rowwise().sum();
          ds = a.array() * (ds.colwise() - dot).array();
          if (gb != nullptr) MatMap(gb->data() + at, n, n) += ds;
          if (gq != nullptr) {
            as_mat(*gq).middleRows(start, n).noalias() += score_scale * ds * as_mat(kv).middleRows(start, n);
          }
          if (gk != nullptr) {
            as_mat(*gk).middleRows(start, n).noalias() += score_scale * ds.transpose() * as_mat(qv).middleRows(start, n);
          }
          at += static_cast<std::size_t>(n * n);
        }
      });
}

Var layer_norm(const Var& x, const Var& gain, const Var& shift) {
  const Tensor& xv = x.value();
  require_row(gain.value(), xv.cols(), "layer_norm");
  require_row(shift.value(), xv.cols(), "layer_norm");
  auto stats = std::make_shared<LayerNormStats>(normalize_rows(xv));
  Tensor out(xv.shape());
  as_mat(out) = as_mat(stats->xhat);
  as_mat(out).array().rowwise() *= as_mat(gain.value()).row(0).array();
  as_mat(out).rowwise() += as_mat(shift.value()).row(0);
  return x.tape().record(std::move(out), {x, gain, shift}, [x, gain, shift, stats](Tape& tape, const Tensor& g) {
    const Tensor& xhat = stats->xhat;
    const std::size_t c = xhat.cols();
    if (Tensor* gg = tape.grad_buffer(gain)) {
      as_mat(*gg).row(0) += (as_mat(g).array() * as_mat(xhat).array()).matrix().colwise().sum();
    }
    if (Tensor* gs = tape.grad_buffer(shift)) as_mat(*gs).row(0) += as_mat(g).colwise().sum();
    if (Tensor* gx = tape.grad_buffer(x)) {
      const Tensor& gv = gain.value();
      std::vector<double> dxhat(c);
      for (std::size_t r = 0; r < xhat.rows(); ++r) {
        double mean_d = 0.0;
        double mean_dx = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dxhat[j] = g(r, j) * gv[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat(r, j);
        }
        mean_d /= static_cast<double>(c);
        mean_dx /= static_cast<double>(c);
        const double rstd = stats->rstd[r];
        for (std::size_t j = 0; j < c; ++j) (*gx)(r, j) += rstd * (dxhat[j] - mean_d - xhat(r, j) * mean_dx);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

Var sum(const Var& x) {
  Tensor out = Tensor::scalar(as_mat(x.value()).sum());
  return x.tape().record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) as_mat(*gx).array() += g[0];
  });
}

Var mean(const Var& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var gather_rows(const Var& table, const std::vector<std::size_t>& rows) {
  const Tensor& tv = table.value();
  const std::size_t c = tv.cols();
  Tensor out = Tensor::zeros(rows.size(), c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= tv.rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " + tv.shape_string());
    }
    std::copy_n(tv.data() + rows[i] * c, c, out.data() + i * c);
  }
  return table.tape().record(std::move(out), {table}, [table, rows](Tape& tape, const Tensor& g) {
    Tensor* gt = tape.grad_buffer(table);
    if (gt == nullptr) return;
    const std::size_t c = g.cols();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double* dst = gt->data() + rows[i] * c;
      const double* src = g.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.rows() != r) throw ShapeError("concat_cols: row counts differ");
    total += p.cols();
  }
  Tensor out = Tensor::zeros(r, total);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    as_mat(out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(p.cols())) = as_mat(p.value());
    offset += p.cols();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](Tape& tape, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const auto width = static_cast<Eigen::Index>(p.cols());
      if (Tensor* gp = tape.grad_buffer(p)) as_mat(*gp) += as_mat(g).middleCols(static_cast<Eigen::Index>(offset), width);
      offset += p.cols();
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.cols() != c) throw ShapeError("concat_rows: column counts differ");
    total += p.rows();
  }
  Tensor out = Tensor::zeros(total, c);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + offset * c);
    offset += p.rows();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](Tape& tape, const Tensor& g) {
    const std::size_t c = g.cols();
    std::size_t offset = 0;
    for (const Var& p : parts) {
      if (Tensor* gp = tape.grad_buffer(p)) {
        const double* src = g.data() + offset * c;
        for (std::size_t k = 0; k < gp->size(); ++k) (*gp)[k] += src[k];
      }
      offset += p.rows();
    }
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  if (start + len > xv.cols()) throw ShapeError("slice_cols: range exceeds " + xv.shape_string());
  Tensor out = Tensor::zeros(xv.rows(), len);
  as_mat(out) = as_mat(xv).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len));
  return x.tape().record(std::move(out), {x}, [x, start, len](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) {
      as_mat(*gx).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)) += as_mat(g);
    }
  });
}

Var slice_rows(const Var& x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  if (start + len > xv.rows()) throw ShapeError("slice_rows: range exceeds " + xv.shape_string());
  const std::size_t c = xv.cols();
  Tensor out = Tensor::zeros(len, c);
  std::copy_n(xv.data() + start * c, len * c, out.data());
  return x.tape().record(std::move(out), {x}, [x, start](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) {
      double* dst = gx->data() + start * g.cols();
      for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
    }
  });
}

Var replace_rows(const Var& x, const Var& row, const std::vector<bool>& mask) {
  const Tensor& xv = x.value();
  require_row(row.value(), xv.cols(), "replace_rows");
  if (mask.size() != xv.rows()) throw ShapeError("replace_rows: mask length differs from row count");
  Tensor out = xv;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) as_mat(out).row(static_cast<Eigen::Index>(r)) = as_mat(row.value()).row(0);
  }
  return x.tape().record(std::move(out), {x, row}, [x, row, mask](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_buffer(x);
    Tensor* gr = tape.grad_buffer(row);
    for (std::size_t r = 0; r < mask.size(); ++r) {
      const auto ri = static_cast<Eigen::Index>(r);
      if (mask[r]) {
        if (gr) as_mat(*gr).row(0) += as_mat(g).row(ri);
      } else if (gx) {
        as_mat(*gx).row(ri) += as_mat(g).row(ri);
      }
    }
  });
}

Var dropout(const Var& x, double rate) {
  Tape& tape = x.tape();
  if (!tape.training() || rate <= 0.0) return x;
  if (rate >= 1.0) throw ShapeError("dropout rate must be < 1");
  const Tensor& xv = x.value();
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    (*mask)[i] = keep(tape.rng()) ? inv : 0.0;
    out[i] = xv[i] * (*mask)[i];
  }
  return tape.record(std::move(out), {x}, [x, mask](Tape& tape, const Tensor& g) {
    if (Tensor* gx = tape.grad_buffer(x)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * (*mask)[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Losses

Var bce_with_logits(const Var& logit, double target) {
  require_scalar(logit.value(), "bce_with_logits");
  const double z = logit.value()[0];
  Tensor out = Tensor::scalar(softplus_value(z) - target * z);
  return logit.tape().record(std::move(out), {logit}, [logit, target](Tape& tape, const Tensor& g) {
    if (Tensor* gz = tape.grad_buffer(logit)) (*gz)[0] += g[0] * (logistic(logit.value()[0]) - target);
  });
}

Var abs_error(const Var& score, double target) {
  require_scalar(score.value(), "abs_error");
  const double diff = score.value()[0] - target;
  Tensor out = Tensor::scalar(std::abs(diff));
  return score.tape().record(std::move(out), {score}, [score, target](Tape& tape, const Tensor& g) {
    const double d = score.value()[0] - target;
    const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    if (Tensor* gs = tape.grad_buffer(score)) (*gs)[0] += g[0] * sign;
  });
}


namespace {

void require_column(const Tensor& x, std::size_t n, const char* op) {
  if (x.cols() != 1 || x.rows() != n) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(n) + "x1 column, got " + x.shape_string());
  }
}

}  // namespace

Var bce_with_logits(const Var& logits, const std::vector<double>& targets) {
  require_column(logits.value(), targets.size(), "bce_with_logits");
  if (targets.empty()) throw ShapeError("bce_with_logits: empty batch");
  const Tensor& z = logits.value();
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) total += softplus_value(z[i]) - targets[i] * z[i];
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  return logits.tape().record(Tensor::scalar(total * inv_n), {logits},
                              [logits, targets, inv_n](Tape& tape, const Tensor& g) {
                                Tensor* gz = tape.grad_buffer(logits);
                                if (gz == nullptr) return;
                                const Tensor& z = logits.value();
                                for (std::size_t i = 0; i < targets.size(); ++i) {
                                  (*gz)[i] += g[0] * inv_n * (logistic(z[i]) - targets[i]);
                                }
                              });
}

Var abs_error(const Var& scores, const std::vector<double>& targets) {
  require_column(scores.value(), targets.size(), "abs_error");
  if (targets.empty()) throw ShapeError("abs_error: empty batch");
  const Tensor& s = scores.value();
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) total += std::abs(s[i] - targets[i]);
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  return scores.tape().record(Tensor::scalar(total * inv_n), {scores},
                              [scores, targets, inv_n](Tape& tape, const Tensor& g) {
                                Tensor* gs = tape.grad_buffer(scores);
                                if (gs == nullptr) return;
                                const Tensor& s = scores.value();
                                for (std::size_t i = 0; i < targets.size(); ++i) {
                                  const double d = s[i] - targets[i];
                                  (*gs)[i] += g[0] * inv_n * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
                                }
                              });
}

Var spmm(const SparseRows& a, const Var& x) {
  const Tensor& xv = x.value();
  if (a.n_cols != xv.rows() || a.row_ptr.size() != a.n_rows + 1) {
    throw ShapeError("spmm: sparse " + std::to_string(a.n_rows) + "x" + std::to_string(a.n_cols) + " vs dense " +
                     xv.shape_string());
  }
  const std::size_t c = xv.cols();
  Tensor out = Tensor::zeros(a.n_rows, c);
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    double* dst = out.data() + r * c;
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      const double* src = xv.data() + a.col[k] * c;
      const double w = a.val[k];
      for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
    }
  }
  auto shared = std::make_shared<SparseRows>(a);
  return x.tape().record(std::move(out), {x}, [x, shared](Tape& tape, const Tensor& g) {
    Tensor* gx = tape.grad_buffer(x);
    if (gx == nullptr) return;
    const SparseRows& a = *shared;
    const std::size_t c = g.cols();
    for (std::size_t r = 0; r < a.n_rows; ++r) {
      const double* src = g.data() + r * c;
      for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
        double* dst = gx->data() + a.col[k] * c;
        const double w = a.val[k];
        for (std::size_t j = 0; j < c; ++j) dst[j] += w * src[j];
      }
    }
  });
}

}  // namespace gelgt
