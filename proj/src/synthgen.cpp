#include "gelgt/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "gelgt/errors.hpp"

namespace gelgt {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

DatabaseSchema synth_schema() {
  nlohmann::json doc = {
      {"tables",
       {{{"name", "entities"},
         {"columns",
          {{{"name", "entity_id"}, {"kind", "primary_key"}},
           {{"name", "segment"}, {"kind", "categorical"}},
           {{"name", "score"}, {"kind", "numerical"}},
           {{"name", "seed_time"}, {"kind", "timestamp"}},
           {{"name", "referrer_id"}, {"kind", "foreign_key"}, {"target_table", "entities"}},
           {{"name", "label"}, {"kind", "numerical"}}}}},
        {{"name", "events"},
         {"columns",
          {{{"name", "event_id"}, {"kind", "primary_key"}},
           {{"name", "entity_id"}, {"kind", "foreign_key"}, {"target_table", "entities"}},
           {{"name", "event_time"}, {"kind", "timestamp"}},
           {{"name", "signal"}, {"kind", "numerical"}},
           {{"name", "amount"}, {"kind", "numerical"}},
           {{"name", "channel"}, {"kind", "categorical"}}}}}}},
      {"task",
       {{"target_table", "entities"},
        {"target_column", "label"},
        {"kind", "binary_classification"},
        {"seed_time_column", "seed_time"}}}};
  return parse_schema(doc);
}

struct EventDraft {
  std::int64_t delta;  // seconds before the seed time, > 0
  double signal;
};

}  // namespace

void SynthConfig::validate() const {
  if (n_entities == 0) throw ConfigError("n_entities must be positive");
  if (!(n_events_per_entity >= 1.0)) throw ConfigError("n_events_per_entity must be >= 1");
  if (window_width <= 0) throw ConfigError("window_width must be > 0");
  if (horizon <= 0) throw ConfigError("horizon must be > 0");
  if (seed_time_span <= 0) throw ConfigError("seed_time_span must be > 0");
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
  };
  fraction(noise_event_fraction, "noise_event_fraction");
  fraction(positive_fraction, "positive_fraction");
  fraction(referral_prob, "referral_prob");
  if (!std::isfinite(noise_feature_dim_shift)) throw ConfigError("noise_feature_dim_shift must be finite");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"n_entities", c.n_entities},
       {"n_events_per_entity", c.n_events_per_entity},
       {"t_star", c.t_star},
       {"window_width", c.window_width},
       {"k_min", c.k_min},
       {"noise_event_fraction", c.noise_event_fraction},
       {"noise_feature_dim_shift", c.noise_feature_dim_shift},
       {"rng_seed", c.rng_seed},
       {"horizon", c.horizon},
       {"start_time", c.start_time},
       {"seed_time_span", c.seed_time_span},
       {"positive_fraction", c.positive_fraction},
       {"referral_prob", c.referral_prob},
       {"referral_window", c.referral_window}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n_entities", c.n_entities);
  get("n_events_per_entity", c.n_events_per_entity);
  get("t_star", c.t_star);
  get("window_width", c.window_width);
  get("k_min", c.k_min);
  get("noise_event_fraction", c.noise_event_fraction);
  get("noise_feature_dim_shift", c.noise_feature_dim_shift);
  get("rng_seed", c.rng_seed);
  get("horizon", c.horizon);
  get("start_time", c.start_time);
  get("seed_time_span", c.seed_time_span);
  get("positive_fraction", c.positive_fraction);
  get("referral_prob", c.referral_prob);
  get("referral_window", c.referral_window);
}

SynthDatabase generate_db(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t n = config.n_entities;
  std::vector<std::int64_t> seed(n);
  std::uniform_int_distribution<std::int64_t> seed_dist(0, config.seed_time_span - 1);
  for (auto& t : seed) t = config.start_time + seed_dist(rng);
  std::sort(seed.begin(), seed.end());

  // Reachable part of the window, in seconds-before-seed.
  const std::int64_t win_lo = std::max<std::int64_t>(config.t_star - config.window_width, 1);
  const std::int64_t win_hi = std::min<std::int64_t>(config.t_star + config.window_width, config.horizon);
  const bool window_reachable = win_lo <= win_hi;
  auto in_window = [&](std::int64_t delta) {
    return std::llabs(delta - config.t_star) <= config.window_width;
  };
  auto draw_inside = [&] { return std::uniform_int_distribution<std::int64_t>(win_lo, win_hi)(rng); };
  auto draw_outside = [&] {
    std::uniform_int_distribution<std::int64_t> d(1, config.horizon);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const std::int64_t delta = d(rng);
      if (!in_window(delta)) return delta;
    }
    throw ConfigError("window covers the whole event horizon");
  };

  const auto lo_count = static_cast<std::int64_t>(std::max(1.0, std::round(config.n_events_per_entity / 2.0)));
  const auto hi_count = static_cast<std::int64_t>(std::max<double>(lo_count, std::round(1.5 * config.n_events_per_entity)));
  std::uniform_int_distribution<std::int64_t> count_dist(lo_count, hi_count);
  std::uniform_int_distribution<int> segment_dist(0, 3);
  std::uniform_int_distribution<int> channel_dist(0, 2);

  CsvTable entities{{"entity_id", "segment", "score", "seed_time", "referrer_id", "label"}, {}};
  CsvTable events{{"event_id", "entity_id", "event_time", "signal", "amount", "channel"}, {}};
  std::size_t next_event = 0;

  for (std::size_t i = 0; i < n; ++i) {
    std::string referrer;
    if (i > 0 && unit(rng) < config.referral_prob) {
      const std::size_t lo = i > config.referral_window ? i - config.referral_window : 0;
      const std::size_t ref = std::uniform_int_distribution<std::size_t>(lo, i - 1)(rng);
      if (seed[ref] < seed[i]) referrer = "e" + std::to_string(ref);
    }

    const bool planted = unit(rng) < config.positive_fraction;
    std::size_t n_events = static_cast<std::size_t>(count_dist(rng));
    std::size_t n_signal = 0;
    if (window_reachable) {
      if (planted) {
        n_signal = config.k_min + static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 2)(rng));
      } else if (config.k_min > 0) {
        n_signal = std::uniform_int_distribution<std::size_t>(0, config.k_min - 1)(rng);
      }
    }
    n_events = std::max(n_events, n_signal);

    std::vector<EventDraft> drafts;
    for (std::size_t k = 0; k < n_signal; ++k) drafts.push_back({draw_inside(), 1.0 + unit(rng)});
    for (std::size_t k = n_signal; k < n_events; ++k) {
      if (unit(rng) < config.noise_event_fraction) {
        if (unit(rng) < 0.5 || !window_reachable) {
          // Right pattern, wrong time.
          drafts.push_back({draw_outside(), 1.0 + unit(rng)});
        } else {
          // Right time, pattern shifted below the threshold.
          drafts.push_back({draw_inside(), kSignalThreshold - config.noise_feature_dim_shift - 0.5 * unit(rng)});
        }
      } else {
        drafts.push_back({draw_outside(), -1.0 + 2.0 * unit(rng)});
      }
    }
    std::sort(drafts.begin(), drafts.end(), [](const EventDraft& a, const EventDraft& b) { return a.delta > b.delta; });

    std::size_t hits = 0;
    for (const auto& e : drafts) {
      if (in_window(e.delta) && e.signal >= kSignalThreshold) ++hits;
      events.rows.push_back({"v" + std::to_string(next_event++), "e" + std::to_string(i),
                             std::to_string(seed[i] - e.delta), fmt_double(e.signal), fmt_double(normal(rng)),
                             "c" + std::to_string(channel_dist(rng))});
    }
    const bool missing_score = unit(rng) < 0.05;
    const double score = normal(rng);
    entities.rows.push_back({"e" + std::to_string(i), "s" + std::to_string(segment_dist(rng)),
                             missing_score ? std::string() : fmt_double(score), std::to_string(seed[i]), referrer,
                             hits >= config.k_min ? "1" : "0"});
  }

  SynthDatabase db;
  db.schema = synth_schema();
  db.raw = {std::move(entities), std::move(events)};
  db.tables = type_tables(db.schema, db.raw);
  return db;
}

void write_database(const std::filesystem::path& dir, const DatabaseSchema& schema, const std::vector<CsvTable>& raw) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "schema.json");
    if (!out) throw DataError("cannot write " + (dir / "schema.json").string());
    out << schema_to_json(schema).dump(2) << '\n';
  }
  for (std::size_t t = 0; t < schema.tables.size(); ++t) write_csv(dir / (schema.tables[t].name + ".csv"), raw[t]);
}

void write_database(const std::filesystem::path& dir, const SynthDatabase& db) {
  write_database(dir, db.schema, db.raw);
}

std::vector<std::int64_t> seed_times(const DatabaseSchema& schema, const TableData& tables) {
  const std::size_t ti = schema.table_index(schema.task.target_table);
  return tables.tables[ti].columns[*schema.tables[ti].column_index(schema.task.seed_time_column)].time;
}

Split temporal_split(std::span<const std::int64_t> times, const std::array<double, 3>& fractions) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  const auto n = static_cast<double>(times.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * fractions[0]));
  const auto n_val = std::min(static_cast<std::size_t>(std::llround(n * fractions[1])), times.size() - n_train);
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  if (split.train.empty() || split.val.empty() || split.test.empty()) throw DataError("empty split");
  return split;
}

Split temporal_split(const DatabaseSchema& schema, const TableData& tables, const std::array<double, 3>& fractions) {
  const auto times = seed_times(schema, tables);
  return temporal_split(times, fractions);
}

}  // namespace gelgt
