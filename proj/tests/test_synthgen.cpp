#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "gelgt/errors.hpp"
#include "gelgt/synthgen.hpp"

using namespace gelgt;

namespace {

SynthConfig small_config(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_entities = 300;
  c.rng_seed = seed;
  return c;
}

// Labels recomputed from the raw CSV rows with the planted rule.
std::vector<int> recompute_labels(const SynthDatabase& db, const SynthConfig& c) {
  const CsvTable& ent = db.raw[0];
  const CsvTable& ev = db.raw[1];
  std::map<std::string, std::int64_t> seed_of;
  for (const auto& row : ent.rows) seed_of[row[0]] = std::stoll(row[3]);
  std::map<std::string, std::size_t> hits;
  for (const auto& row : ev.rows) {
    const std::int64_t delta = seed_of.at(row[1]) - std::stoll(row[2]);
    if (std::llabs(delta - c.t_star) <= c.window_width && std::stod(row[3]) >= kSignalThreshold) ++hits[row[1]];
  }
  std::vector<int> out;
  for (const auto& row : ent.rows) out.push_back(hits[row[0]] >= c.k_min ? 1 : 0);
  return out;
}

std::vector<int> emitted_labels(const SynthDatabase& db) {
  std::vector<int> out;
  for (const auto& row : db.raw[0].rows) out.push_back(std::stoi(row[5]));
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Synth, SameSeedGivesByteIdenticalFiles) {
  const auto a = std::filesystem::temp_directory_path() / "gelgt_synth_a";
  const auto b = std::filesystem::temp_directory_path() / "gelgt_synth_b";
  write_database(a, generate_db(small_config()));
  write_database(b, generate_db(small_config()));
  for (const char* f : {"schema.json", "entities.csv", "events.csv"}) {
    EXPECT_FALSE(slurp(a / f).empty()) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Synth, WrittenDatabaseLoadsBack) {
  const auto dir = std::filesystem::temp_directory_path() / "gelgt_synth_load";
  const SynthDatabase db = generate_db(small_config());
  write_database(dir, db);
  const DatabaseSchema schema = load_schema(dir / "schema.json");
  const TableData tables = load_tables(schema, dir);
  EXPECT_EQ(tables.tables[0].row_count, 300u);
  EXPECT_EQ(task_targets(schema, tables), task_targets(db.schema, db.tables));
}

TEST(Synth, LabelsFollowThePlantedRule) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SynthConfig c = small_config(seed);
    const SynthDatabase db = generate_db(c);
    EXPECT_EQ(emitted_labels(db), recompute_labels(db, c));
  }
}

TEST(Synth, NoNoiseAndSingleHitThreshold) {
  SynthConfig c = small_config();
  c.noise_event_fraction = 0.0;
  c.k_min = 1;
  const SynthDatabase db = generate_db(c);
  EXPECT_EQ(emitted_labels(db), recompute_labels(db, c));
  // Without noise every in-window event carries the signal, so a label is 1
  // exactly when the entity has any in-window event.
  std::map<std::string, std::int64_t> seed_of;
  for (const auto& row : db.raw[0].rows) seed_of[row[0]] = std::stoll(row[3]);
  std::map<std::string, int> any;
  for (const auto& row : db.raw[1].rows) {
    if (std::llabs(seed_of.at(row[1]) - std::stoll(row[2]) - c.t_star) <= c.window_width) any[row[1]] = 1;
  }
  std::vector<int> expected;
  for (const auto& row : db.raw[0].rows) expected.push_back(any[row[0]]);
  EXPECT_EQ(emitted_labels(db), expected);
}

TEST(Synth, WindowAfterEverySeedTimeGivesNoPositives) {
  SynthConfig c = small_config();
  c.t_star = -10 * kSecondsPerDay;
  const SynthDatabase db = generate_db(c);
  for (int y : emitted_labels(db)) EXPECT_EQ(y, 0);
}

TEST(Synth, EventsPrecedeTheirEntity) {
  const SynthDatabase db = generate_db(small_config());
  std::map<std::string, std::int64_t> seed_of;
  for (const auto& row : db.raw[0].rows) seed_of[row[0]] = std::stoll(row[3]);
  for (const auto& row : db.raw[1].rows) EXPECT_LT(std::stoll(row[2]), seed_of.at(row[1]));
  for (const auto& row : db.raw[0].rows) {
    if (!row[4].empty()) EXPECT_LT(seed_of.at(row[4]), seed_of.at(row[0]));
  }
}

TEST(Synth, InvalidConfigsAreRejected) {
  SynthConfig c = small_config();
  c.noise_event_fraction = 1.5;
  EXPECT_THROW(generate_db(c), ConfigError);
  c = small_config();
  c.window_width = 0;
  EXPECT_THROW(generate_db(c), ConfigError);
}

TEST(Split, TenRowsSixTwoTwo) {
  std::vector<std::int64_t> t{50, 10, 90, 20, 80, 30, 70, 40, 60, 100};
  const Split s = temporal_split(std::span<const std::int64_t>(t), {0.6, 0.2, 0.2});
  EXPECT_EQ(s.train, (std::vector<std::size_t>{1, 3, 5, 7, 0, 8}));
  EXPECT_EQ(s.val, (std::vector<std::size_t>{6, 4}));
  EXPECT_EQ(s.test, (std::vector<std::size_t>{2, 9}));
}

TEST(Split, EqualTimesBreakTiesByRowId) {
  std::vector<std::int64_t> t(10, 5);
  const Split s = temporal_split(std::span<const std::int64_t>(t), {0.6, 0.2, 0.2});
  EXPECT_EQ(s.train, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(s.val, (std::vector<std::size_t>{6, 7}));
  EXPECT_EQ(s.test, (std::vector<std::size_t>{8, 9}));
}

TEST(Split, TrainNeverOverlapsTestInTime) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> t(50);
    for (auto& x : t) x = std::uniform_int_distribution<std::int64_t>(0, 20)(rng);
    const Split s = temporal_split(std::span<const std::int64_t>(t), {0.7, 0.15, 0.15});
    std::int64_t max_train = 0;
    std::int64_t min_test = 1 << 30;
    for (auto r : s.train) max_train = std::max(max_train, t[r]);
    for (auto r : s.test) min_test = std::min(min_test, t[r]);
    EXPECT_LE(max_train, min_test);
    EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 50u);
  }
}

TEST(Split, BadFractionsAndEmptyParts) {
  std::vector<std::int64_t> t{1, 2, 3};
  EXPECT_THROW(temporal_split(std::span<const std::int64_t>(t), {0.5, 0.2, 0.2}), ConfigError);
  EXPECT_THROW(temporal_split(std::span<const std::int64_t>(t), {0.9, 0.05, 0.05}), DataError);
}
