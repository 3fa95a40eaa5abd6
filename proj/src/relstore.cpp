#include "gelgt/relstore.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "gelgt/errors.hpp"

namespace gelgt {

namespace {

const std::pair<const char*, ColumnKind> kColumnKinds[] = {
    {"numerical", ColumnKind::numerical},     {"categorical", ColumnKind::categorical},
    {"timestamp", ColumnKind::timestamp},     {"primary_key", ColumnKind::primary_key},
    {"foreign_key", ColumnKind::foreign_key},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

ColumnKind parse_column_kind(const std::string& s) {
  for (const auto& [name, kind] : kColumnKinds) {
    if (s == name) return kind;
  }
  throw SchemaError("unknown column kind \"" + s + "\"");
}

std::string to_string(ColumnKind kind) {
  for (const auto& [name, k] : kColumnKinds) {
    if (k == kind) return name;
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "binary_classification") return TaskKind::binary_classification;
  if (s == "regression") return TaskKind::regression;
  throw SchemaError("unknown task kind \"" + s + "\"");
}

std::string to_string(TaskKind kind) {
  return kind == TaskKind::binary_classification ? "binary_classification" : "regression";
}

std::optional<std::size_t> TableSpec::column_index(const std::string& column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return std::nullopt;
}

std::size_t TableSpec::primary_key_column() const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].kind == ColumnKind::primary_key) return i;
  }
  throw SchemaError("table " + name + " has no primary key");
}

std::size_t DatabaseSchema::table_index(const std::string& name) const {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (tables[i].name == name) return i;
  }
  throw SchemaError("unknown table \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// Schema

DatabaseSchema parse_schema(const nlohmann::json& doc) {
  DatabaseSchema schema;
  try {
    for (const auto& t : doc.at("tables")) {
      TableSpec spec;
      spec.name = t.at("name").get<std::string>();
      for (const auto& c : t.at("columns")) {
        ColumnSpec col;
        col.name = c.at("name").get<std::string>();
        col.kind = parse_column_kind(c.at("kind").get<std::string>());
        if (col.kind == ColumnKind::foreign_key) col.target_table = c.at("target_table").get<std::string>();
        spec.columns.push_back(std::move(col));
      }
      schema.tables.push_back(std::move(spec));
    }
    const auto& task = doc.at("task");
    schema.task.target_table = task.at("target_table").get<std::string>();
    schema.task.target_column = task.at("target_column").get<std::string>();
    schema.task.kind = parse_task_kind(task.at("kind").get<std::string>());
    schema.task.seed_time_column = task.at("seed_time_column").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema parse failure: ") + e.what());
  }

  std::set<std::string> names;
  for (const auto& t : schema.tables) {
    if (!names.insert(t.name).second) throw SchemaError("duplicate table name \"" + t.name + "\"");
    std::set<std::string> cols;
    std::size_t pks = 0;
    for (const auto& c : t.columns) {
      if (!cols.insert(c.name).second) throw SchemaError("duplicate column " + t.name + "." + c.name);
      if (c.kind == ColumnKind::primary_key) ++pks;
    }
    if (pks != 1) {
      throw SchemaError("table \"" + t.name + "\" must have exactly one primary key, has " + std::to_string(pks));
    }
  }
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const auto& t = schema.tables[ti];
    for (std::size_t ci = 0; ci < t.columns.size(); ++ci) {
      const auto& c = t.columns[ci];
      if (c.kind != ColumnKind::foreign_key) continue;
      if (!names.contains(c.target_table)) {
        throw SchemaError("unresolved foreign key " + t.name + "." + c.name + " -> \"" + c.target_table + "\"");
      }
      schema.relations.push_back({ti, ci, schema.table_index(c.target_table)});
    }
  }

  const auto& task = schema.task;
  if (!names.contains(task.target_table)) throw SchemaError("task target table \"" + task.target_table + "\" unknown");
  const auto& target = schema.table(task.target_table);
  if (!target.column_index(task.target_column)) {
    throw SchemaError("task target column \"" + task.target_column + "\" not in " + task.target_table);
  }
  const auto time_col = target.column_index(task.seed_time_column);
  if (!time_col || target.columns[*time_col].kind != ColumnKind::timestamp) {
    throw SchemaError("seed time column \"" + task.seed_time_column + "\" must be a timestamp of " +
                      task.target_table);
  }
  return schema;
}

DatabaseSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read schema " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema parse failure: ") + e.what());
  }
  return parse_schema(doc);
}

nlohmann::json schema_to_json(const DatabaseSchema& schema) {
  nlohmann::json doc;
  doc["tables"] = nlohmann::json::array();
  for (const auto& t : schema.tables) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : t.columns) {
      nlohmann::json col = {{"name", c.name}, {"kind", to_string(c.kind)}};
      if (c.kind == ColumnKind::foreign_key) col["target_table"] = c.target_table;
      cols.push_back(std::move(col));
    }
    doc["tables"].push_back({{"name", t.name}, {"columns", std::move(cols)}});
  }
  doc["task"] = {{"target_table", schema.task.target_table},
                 {"target_column", schema.task.target_column},
                 {"kind", to_string(schema.task.kind)},
                 {"seed_time_column", schema.task.seed_time_column}};
  return doc;
}

// ---------------------------------------------------------------------------
// Tables

std::optional<std::int64_t> parse_timestamp(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) return std::nullopt;
  std::int64_t epoch = 0;
  if (parse_int(text, epoch)) return epoch;

  // YYYY-MM-DD
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0;
  unsigned mo = 0, d = 0;
  if (!parse_int(std::string_view(text).substr(0, 4), y) || !parse_int(std::string_view(text).substr(5, 2), mo) ||
      !parse_int(std::string_view(text).substr(8, 2), d)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  std::int64_t seconds = std::chrono::sys_days(ymd).time_since_epoch().count() * 86400LL;

  std::size_t pos = 10;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    ++pos;
    unsigned hh = 0, mm = 0, ss = 0;
    if (pos + 5 > text.size() || text[pos + 2] != ':') return std::nullopt;
    if (!parse_int(std::string_view(text).substr(pos, 2), hh) ||
        !parse_int(std::string_view(text).substr(pos + 3, 2), mm)) {
      return std::nullopt;
    }
    pos += 5;
    if (pos < text.size() && text[pos] == ':') {
      if (pos + 3 > text.size() || !parse_int(std::string_view(text).substr(pos + 1, 2), ss)) return std::nullopt;
      pos += 3;
      if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    seconds += hh * 3600LL + mm * 60LL + ss;
    if (pos < text.size()) {
      if (text[pos] == 'Z' && pos + 1 == text.size()) {
        pos = text.size();
      } else if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() && text[pos + 3] == ':') {
        unsigned oh = 0, om = 0;
        if (!parse_int(std::string_view(text).substr(pos + 1, 2), oh) ||
            !parse_int(std::string_view(text).substr(pos + 4, 2), om)) {
          return std::nullopt;
        }
        const std::int64_t offset = oh * 3600LL + om * 60LL;
        seconds += text[pos] == '+' ? -offset : offset;
        pos = text.size();
      }
    }
  }
  if (pos != text.size()) return std::nullopt;
  return seconds;
}

TableData type_tables(const DatabaseSchema& schema, const std::vector<CsvTable>& raw) {
  if (raw.size() != schema.tables.size()) throw DataError("expected one raw table per schema table");
  TableData data;
  const std::size_t target_table = schema.table_index(schema.task.target_table);
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const TableSpec& spec = schema.tables[ti];
    const CsvTable& csv = raw[ti];
    if (csv.header.size() != spec.columns.size()) throw DataError("header mismatch in table " + spec.name);
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      if (trim(csv.header[c]) != spec.columns[c].name) {
        throw DataError("header mismatch in table " + spec.name + ": expected column \"" + spec.columns[c].name +
                        "\", found \"" + csv.header[c] + "\"");
      }
    }

    Table table;
    table.name = spec.name;
    table.row_count = csv.rows.size();
    table.columns.resize(spec.columns.size());
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      const ColumnSpec& cs = spec.columns[c];
      Column& col = table.columns[c];
      col.kind = cs.kind;
      std::unordered_map<std::string, std::int32_t> intern;
      for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const std::string cell = trim(csv.rows[r][c]);
        const auto where = [&] { return spec.name + "." + cs.name + " row " + std::to_string(r); };
        switch (cs.kind) {
          case ColumnKind::numerical: {
            if (cell.empty()) {
              col.numeric.push_back(std::nullopt);
            } else if (auto v = parse_number(cell)) {
              col.numeric.push_back(v);
            } else {
              throw DataError("unparseable number \"" + cell + "\" at " + where());
            }
            break;
          }
          case ColumnKind::categorical: {
            if (cell.empty()) {
              col.category.push_back(-1);
              break;
            }
            auto [it, fresh] = intern.try_emplace(cell, static_cast<std::int32_t>(col.vocabulary.size()));
            if (fresh) col.vocabulary.push_back(cell);
            col.category.push_back(it->second);
            break;
          }
          case ColumnKind::timestamp: {
            if (cell.empty()) {
              col.time.push_back(kNoTime);
            } else if (auto t = parse_timestamp(cell)) {
              col.time.push_back(*t);
            } else {
              throw DataError("unparseable timestamp \"" + cell + "\" at " + where());
            }
            break;
          }
          case ColumnKind::primary_key: {
            if (cell.empty()) throw DataError("null primary key at " + where());
            if (!table.pk_rows.emplace(cell, r).second) {
              throw DataError("duplicate primary key \"" + cell + "\" in table " + spec.name);
            }
            col.key.emplace_back(cell);
            break;
          }
          case ColumnKind::foreign_key:
            col.key.push_back(cell.empty() ? std::nullopt : std::optional<std::string>(cell));
            break;
        }
      }
    }
    if (ti == target_table) {
      const auto& times = table.columns[*spec.column_index(schema.task.seed_time_column)].time;
      for (std::size_t r = 0; r < times.size(); ++r) {
        if (times[r] == kNoTime) {
          throw DataError("target table row " + std::to_string(r) + " has no seed timestamp");
        }
      }
    }
    data.tables.push_back(std::move(table));
  }
  return data;
}

TableData load_tables(const DatabaseSchema& schema, const std::filesystem::path& dir) {
  std::vector<CsvTable> raw;
  for (const auto& t : schema.tables) raw.push_back(read_csv(dir / (t.name + ".csv")));
  return type_tables(schema, raw);
}

// ---------------------------------------------------------------------------
// Graph

NodeId RelGraph::node_of(std::size_t table, std::size_t row) const {
  if (table >= type_count() || row >= type_node_count(table)) throw DataError("node_of: row out of range");
  return static_cast<NodeId>(type_offset_[table] + row);
}

std::span<const NodeId> RelGraph::neighbors(NodeId v, std::size_t edge_type) const {
  if (edge_type >= adjacency_.size()) throw DataError("unknown edge type " + std::to_string(edge_type));
  if (v >= node_count()) throw DataError("node id out of range");
  const Csr& csr = adjacency_[edge_type];
  return {csr.targets.data() + csr.offsets[v], csr.offsets[v + 1] - csr.offsets[v]};
}

std::span<const NodeId> RelGraph::all_neighbors(NodeId v) const {
  if (v >= node_count()) throw DataError("node id out of range");
  return {merged_.targets.data() + merged_.offsets[v], merged_.offsets[v + 1] - merged_.offsets[v]};
}

bool RelGraph::adjacent(NodeId u, NodeId v) const {
  const auto nb = all_neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

namespace {

std::int64_t row_time(const DatabaseSchema& schema, const TableSpec& spec, const Table& table, std::size_t row,
                      bool is_target) {
  if (is_target) return table.columns[*spec.column_index(schema.task.seed_time_column)].time[row];
  for (std::size_t c = 0; c < spec.columns.size(); ++c) {
    if (spec.columns[c].kind == ColumnKind::timestamp) return table.columns[c].time[row];
  }
  return kNoTime;
}

}  // namespace

RelGraph build_graph(const DatabaseSchema& schema, const TableData& tables) {
  RelGraph g;
  const std::size_t target_table = schema.table_index(schema.task.target_table);
  g.type_offset_.push_back(0);
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const Table& t = tables.tables[ti];
    for (std::size_t r = 0; r < t.row_count; ++r) {
      g.node_type_.push_back(static_cast<std::uint32_t>(ti));
      g.node_time_.push_back(row_time(schema, schema.tables[ti], t, r, ti == target_table));
      g.node_row_.push_back(r);
    }
    g.type_offset_.push_back(g.node_type_.size());
  }

  const std::size_t n = g.node_count();
  std::vector<std::vector<std::pair<NodeId, NodeId>>> edges(2 * schema.relations.size());
  for (std::size_t ri = 0; ri < schema.relations.size(); ++ri) {
    const Relation& rel = schema.relations[ri];
    const std::string base = schema.tables[rel.table].name + "." + schema.tables[rel.table].columns[rel.column].name;
    g.edge_types_.push_back({base, rel.table, rel.target_table, ri, false});
    g.edge_types_.push_back({"rev:" + base, rel.target_table, rel.table, ri, true});

    const Table& src = tables.tables[rel.table];
    const Table& dst = tables.tables[rel.target_table];
    const auto& keys = src.columns[rel.column].key;
    for (std::size_t r = 0; r < keys.size(); ++r) {
      if (!keys[r]) continue;
      const auto hit = dst.pk_rows.find(*keys[r]);
      if (hit == dst.pk_rows.end()) {
        ++g.dangling_;
        continue;
      }
      const NodeId u = g.node_of(rel.table, r);
      const NodeId v = g.node_of(rel.target_table, hit->second);
      edges[2 * ri].emplace_back(u, v);
      edges[2 * ri + 1].emplace_back(v, u);
      ++g.edge_count_;
    }
  }

  auto to_csr = [n](std::vector<std::pair<NodeId, NodeId>>& list) {
    std::sort(list.begin(), list.end());
    RelGraph::Csr csr;
    csr.offsets.assign(n + 1, 0);
    for (const auto& [u, v] : list) ++csr.offsets[u + 1];
    for (std::size_t i = 0; i < n; ++i) csr.offsets[i + 1] += csr.offsets[i];
    csr.targets.reserve(list.size());
    for (const auto& e : list) csr.targets.push_back(e.second);
    return csr;
  };

  std::vector<std::pair<NodeId, NodeId>> all;
  for (auto& list : edges) {
    all.insert(all.end(), list.begin(), list.end());
    g.adjacency_.push_back(to_csr(list));
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  g.merged_ = to_csr(all);
  return g;
}

// ---------------------------------------------------------------------------
// Features

std::vector<TableFeatures> build_features(const DatabaseSchema& schema, const TableData& tables) {
  std::vector<TableFeatures> out;
  const std::size_t target_table = schema.table_index(schema.task.target_table);
  for (std::size_t ti = 0; ti < schema.tables.size(); ++ti) {
    const TableSpec& spec = schema.tables[ti];
    const Table& table = tables.tables[ti];
    TableFeatures f;
    std::vector<std::size_t> numeric_cols;
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      if (ti == target_table && spec.columns[c].name == schema.task.target_column) continue;
      if (spec.columns[c].kind == ColumnKind::numerical) {
        numeric_cols.push_back(c);
        f.numeric_names.push_back(spec.columns[c].name);
      } else if (spec.columns[c].kind == ColumnKind::categorical) {
        const Column& col = table.columns[c];
        f.categorical_names.push_back(spec.columns[c].name);
        const std::size_t missing_id = col.vocabulary.size();
        std::vector<std::size_t> ids(table.row_count);
        for (std::size_t r = 0; r < table.row_count; ++r) {
          ids[r] = col.category[r] < 0 ? missing_id : static_cast<std::size_t>(col.category[r]);
        }
        f.categories.push_back(std::move(ids));
        f.category_sizes.push_back(missing_id + 1);
      }
    }
    f.numeric = Tensor::zeros(table.row_count, numeric_cols.size());
    for (std::size_t k = 0; k < numeric_cols.size(); ++k) {
      const auto& vals = table.columns[numeric_cols[k]].numeric;
      double sum = 0.0, sq = 0.0;
      std::size_t n = 0;
      for (const auto& v : vals) {
        if (!v) continue;
        sum += *v;
        ++n;
      }
      const double mean = n ? sum / static_cast<double>(n) : 0.0;
      for (const auto& v : vals) {
        if (v) sq += (*v - mean) * (*v - mean);
      }
      double sd = n > 1 ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
      if (sd <= 0.0) sd = 1.0;
      for (std::size_t r = 0; r < vals.size(); ++r) f.numeric(r, k) = vals[r] ? (*vals[r] - mean) / sd : 0.0;
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<double> task_targets(const DatabaseSchema& schema, const TableData& tables) {
  const std::size_t ti = schema.table_index(schema.task.target_table);
  const TableSpec& spec = schema.tables[ti];
  const Column& col = tables.tables[ti].columns[*spec.column_index(schema.task.target_column)];
  if (col.kind != ColumnKind::numerical) throw DataError("task target column must be numerical");
  std::vector<double> y;
  y.reserve(col.numeric.size());
  for (std::size_t r = 0; r < col.numeric.size(); ++r) {
    if (!col.numeric[r]) throw DataError("missing target at row " + std::to_string(r));
    const double v = *col.numeric[r];
    if (schema.task.kind == TaskKind::binary_classification && v != 0.0 && v != 1.0) {
      throw DataError("binary label must be 0 or 1 at row " + std::to_string(r));
    }
    y.push_back(v);
  }
  return y;
}

}  // namespace gelgt
