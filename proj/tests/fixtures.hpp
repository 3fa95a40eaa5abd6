#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "gelgt/csv.hpp"
#include "gelgt/gradcheck.hpp"
#include "gelgt/ops.hpp"
#include "gelgt/relstore.hpp"

namespace gelgt::testing {

struct Db {
  DatabaseSchema schema;
  TableData tables;
};

// Schema from a JSON literal and tables from CSV text, in schema order.
inline Db make_db(const std::string& schema_json, const std::vector<std::string>& csv_texts) {
  Db db;
  db.schema = parse_schema(nlohmann::json::parse(schema_json));
  std::vector<CsvTable> raw;
  for (const auto& text : csv_texts) raw.push_back(parse_csv(text));
  db.tables = type_tables(db.schema, raw);
  return db;
}

// users(pk, age, ts) <- orders(pk, fk user, ts, amount); task on users.label.
inline const char* kShopSchema = R"({
  "tables": [
    {"name": "users", "columns": [
      {"name": "user_id", "kind": "primary_key"},
      {"name": "age", "kind": "numerical"},
      {"name": "tier", "kind": "categorical"},
      {"name": "signup", "kind": "timestamp"},
      {"name": "label", "kind": "numerical"}]},
    {"name": "orders", "columns": [
      {"name": "order_id", "kind": "primary_key"},
      {"name": "user_id", "kind": "foreign_key", "target_table": "users"},
      {"name": "placed", "kind": "timestamp"},
      {"name": "amount", "kind": "numerical"}]}
  ],
  "task": {"target_table": "users", "target_column": "label", "kind": "binary_classification",
           "seed_time_column": "signup"}
})";

inline Db shop_db() {
  return make_db(kShopSchema, {"user_id,age,tier,signup,label\n"
                               "u1,30,gold,1000,1\n"
                               "u2,,silver,2000,0\n"
                               "u3,50,gold,3000,1\n",
                               "order_id,user_id,placed,amount\n"
                               "o1,u1,500,10\n"
                               "o2,u1,1500,20\n"
                               "o3,u3,2500,5\n"});
}

// Largest per-parameter relative error between reverse-mode gradients of
// `loss` and central differences. `loss` must be deterministic (eval tape).
inline double worst_grad_error(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                               std::string* worst = nullptr) {
  params.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  double out = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const Tensor fd = finite_diff_grad(
        [&] {
          Tape tape;
          return loss(tape).value().item();
        },
        p);
    // Parameters with a vanishing true gradient (unused, or shift-invariant
    // like a softmax offset) leave central-difference roundoff of 1e-11 to
    // 1e-9 through a deep graph; the floor keeps them from reading as a 100%
    // error while every O(1e-4)+ gradient is still held to full precision.
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) {
      diff += (p.grad[k] - fd[k]) * (p.grad[k] - fd[k]);
      na += p.grad[k] * p.grad[k];
      nb += fd[k] * fd[k];
    }
    const double err = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-4});
    if (err > out) {
      out = err;
      if (worst) *worst = p.name;
    }
  }
  return out;
}

// Fixed pseudo-random weighting that turns a matrix output into a scalar.
inline Var weighted_sum(Tape& tape, const Var& out, std::uint64_t seed = 99) {
  Tensor w = Tensor::zeros(out.rows(), out.cols());
  std::uint64_t x = seed;
  for (std::size_t i = 0; i < w.size(); ++i) {
    x = x * 6364136223846793005ULL + 1442695040888963407ULL;
    w[i] = static_cast<double>(x >> 11) / 9007199254740992.0 - 0.5;
  }
  return sum(mul(out, tape.constant(w)));
}

// Unit-weight symmetric adjacency from an undirected edge list.
inline SparseRows sum_adjacency(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> nb(n);
  for (auto [a, b] : edges) {
    nb[a].push_back(b);
    nb[b].push_back(a);
  }
  SparseRows s;
  s.n_cols = n;
  for (auto& row : nb) {
    std::sort(row.begin(), row.end());
    for (std::size_t c : row) s.push(c, 1.0);
    s.end_row();
  }
  return s;
}

}  // namespace gelgt::testing
