#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gelgt/csv.hpp"
#include "gelgt/tensor.hpp"

// Relational database ingestion: schema manifest, typed tables, and the
// heterogeneous temporal graph built from primary/foreign key references.
namespace gelgt {

enum class ColumnKind { numerical, categorical, timestamp, primary_key, foreign_key };
enum class TaskKind { binary_classification, regression };

ColumnKind parse_column_kind(const std::string& s);
std::string to_string(ColumnKind kind);
TaskKind parse_task_kind(const std::string& s);
std::string to_string(TaskKind kind);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numerical;
  std::string target_table;  // foreign_key only
};

struct TableSpec {
  std::string name;
  std::vector<ColumnSpec> columns;

  std::optional<std::size_t> column_index(const std::string& column) const;
  std::size_t primary_key_column() const;
};

struct TaskSpec {
  std::string target_table;
  std::string target_column;
  TaskKind kind = TaskKind::binary_classification;
  std::string seed_time_column;
};

// One foreign-key column: rows of `table` reference primary keys of `target_table`.
struct Relation {
  std::size_t table;
  std::size_t column;
  std::size_t target_table;
};

struct DatabaseSchema {
  std::vector<TableSpec> tables;
  TaskSpec task;
  // Derived on validation, one per FK column in schema order.
  std::vector<Relation> relations;

  std::size_t table_index(const std::string& name) const;
  const TableSpec& table(const std::string& name) const { return tables[table_index(name)]; }
};

// Validates and resolves relations. Throws SchemaError on duplicate tables,
// unresolved foreign keys, zero or multiple primary keys, or a task naming
// an unknown table/column.
DatabaseSchema parse_schema(const nlohmann::json& doc);
DatabaseSchema load_schema(const std::filesystem::path& path);
nlohmann::json schema_to_json(const DatabaseSchema& schema);

// Marks "no timestamp": rows of non-target tables without a time are treated
// as lying infinitely far in the past.
inline constexpr std::int64_t kNoTime = std::numeric_limits<std::int64_t>::min();

// Parses integer epoch seconds or ISO-8601 (YYYY-MM-DD[THH:MM[:SS[.frac]]][Z|±HH:MM]).
std::optional<std::int64_t> parse_timestamp(const std::string& text);

struct Column {
  ColumnKind kind = ColumnKind::numerical;
  std::vector<std::optional<double>> numeric;   // numerical; nullopt = missing
  std::vector<std::int32_t> category;           // categorical; -1 = missing
  std::vector<std::string> vocabulary;          // categorical, first-seen order
  std::vector<std::int64_t> time;               // timestamp; kNoTime = missing
  std::vector<std::optional<std::string>> key;  // primary/foreign key; nullopt = null
};

struct Table {
  std::string name;
  std::size_t row_count = 0;
  std::vector<Column> columns;  // same order as the TableSpec
  std::unordered_map<std::string, std::size_t> pk_rows;
};

struct TableData {
  std::vector<Table> tables;  // same order as the schema
};

// Types raw CSV tables (given in schema order) against the schema.
TableData type_tables(const DatabaseSchema& schema, const std::vector<CsvTable>& raw);
// Reads <dir>/<table>.csv for every table.
TableData load_tables(const DatabaseSchema& schema, const std::filesystem::path& dir);

using NodeId = std::uint32_t;

struct EdgeType {
  std::string name;
  std::size_t src_table;
  std::size_t dst_table;
  std::size_t relation;
  bool reverse;

  bool operator==(const EdgeType&) const = default;
};

// Heterogeneous temporal graph: one node per row, one bidirectional typed
// edge per resolved FK cell. Node ids are dense, grouped by table in schema
// order. Immutable after construction.
class RelGraph {
 public:
  std::size_t node_count() const { return node_type_.size(); }
  std::size_t type_count() const { return type_offset_.size() - 1; }
  std::size_t edge_type_count() const { return edge_types_.size(); }

  std::uint32_t node_type(NodeId v) const { return node_type_[v]; }
  std::int64_t node_time(NodeId v) const { return node_time_[v]; }
  std::size_t node_row(NodeId v) const { return node_row_[v]; }
  NodeId node_of(std::size_t table, std::size_t row) const;
  std::size_t type_node_count(std::size_t table) const { return type_offset_[table + 1] - type_offset_[table]; }

  const EdgeType& edge_type(std::size_t t) const { return edge_types_.at(t); }

  // Neighbors of v under one edge type, ascending. Throws on unknown type.
  std::span<const NodeId> neighbors(NodeId v, std::size_t edge_type) const;
  // Union over all edge types, ascending and unique.
  std::span<const NodeId> all_neighbors(NodeId v) const;
  bool adjacent(NodeId u, NodeId v) const;

  // Relational edges (each counted once, not per direction).
  std::size_t edge_count() const { return edge_count_; }
  std::size_t dangling_fk_count() const { return dangling_; }

  bool operator==(const RelGraph&) const = default;

 private:
  friend RelGraph build_graph(const DatabaseSchema&, const TableData&);

  struct Csr {
    std::vector<std::size_t> offsets;
    std::vector<NodeId> targets;
    bool operator==(const Csr&) const = default;
  };

  std::vector<std::uint32_t> node_type_;
  std::vector<std::int64_t> node_time_;
  std::vector<std::size_t> node_row_;
  std::vector<std::size_t> type_offset_;
  std::vector<EdgeType> edge_types_;
  std::vector<Csr> adjacency_;
  Csr merged_;
  std::size_t edge_count_ = 0;
  std::size_t dangling_ = 0;
};

RelGraph build_graph(const DatabaseSchema& schema, const TableData& tables);

// Model-ready attributes of one table. Primary/foreign keys, timestamps and
// the task target are excluded.
struct TableFeatures {
  std::vector<std::string> numeric_names;
  std::vector<std::string> categorical_names;
  // rows x numeric columns, standardized per column, missing imputed to 0.
  Tensor numeric;
  // [column][row]; missing maps to the extra id == category_sizes[column] - 1.
  std::vector<std::vector<std::size_t>> categories;
  std::vector<std::size_t> category_sizes;
};

std::vector<TableFeatures> build_features(const DatabaseSchema& schema, const TableData& tables);

// Target values of the task table, one per row. Throws DataError on missing
// targets or non-binary labels for classification.
std::vector<double> task_targets(const DatabaseSchema& schema, const TableData& tables);

}  // namespace gelgt
