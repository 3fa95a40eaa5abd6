#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <vector>

#include "gelgt/csv.hpp"
#include "gelgt/relstore.hpp"

// Synthetic relational databases with a planted temporal-window signal.
//
// Two tables: `entities` (the task table) and `events` (FK -> entities).
// Entities may also reference an earlier entity (`referrer_id`), which gives
// the graph a second hop: seed -> referrer -> referrer's events.
//
// An entity's label is 1 iff at least k_min of its own events satisfy
//   |(seed_time - event_time) - t_star| <= window_width  and  signal >= 1.
namespace gelgt {

inline constexpr double kSignalThreshold = 1.0;
inline constexpr std::int64_t kSecondsPerDay = 86400;

struct SynthConfig {
  std::size_t n_entities = 2000;
  double n_events_per_entity = 12.0;
  // Window centre, measured backwards from each entity's seed time (seconds).
  std::int64_t t_star = 20 * kSecondsPerDay;
  // Window half-width (seconds).
  std::int64_t window_width = 3 * kSecondsPerDay;
  std::size_t k_min = 2;
  double noise_event_fraction = 0.3;
  double noise_feature_dim_shift = 0.25;
  std::uint64_t rng_seed = 7;

  // Events fall in (0, horizon] seconds before their entity's seed time.
  std::int64_t horizon = 60 * kSecondsPerDay;
  std::int64_t start_time = 1'672'531'200;  // 2023-01-01T00:00:00Z
  std::int64_t seed_time_span = 365 * kSecondsPerDay;
  double positive_fraction = 0.5;
  double referral_prob = 0.7;
  // Referrers are drawn among this many immediately preceding entities.
  std::size_t referral_window = 20;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct SynthDatabase {
  DatabaseSchema schema;
  std::vector<CsvTable> raw;  // schema order: entities, events
  TableData tables;
};

SynthDatabase generate_db(const SynthConfig& config);

// Writes schema.json and one CSV per table.
void write_database(const std::filesystem::path& dir, const SynthDatabase& db);
void write_database(const std::filesystem::path& dir, const DatabaseSchema& schema, const std::vector<CsvTable>& raw);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Partitions rows by ascending seed time (ties by row id): the earliest
// fractions[0] go to train, then val, then test. Throws DataError if a part
// would be empty, ConfigError if the fractions do not sum to 1.
Split temporal_split(std::span<const std::int64_t> seed_times, const std::array<double, 3>& fractions);
Split temporal_split(const DatabaseSchema& schema, const TableData& tables, const std::array<double, 3>& fractions);

// Seed time of every target-table row.
std::vector<std::int64_t> seed_times(const DatabaseSchema& schema, const TableData& tables);

}  // namespace gelgt
