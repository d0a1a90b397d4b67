#pragma once

// Monte-Carlo sweeps: one ground truth per (value, trial), every configured
// algorithm run on it, rows scored against the truth. Output is ordered by
// (value, trial, algo) and does not depend on the number of workers.

#include "amca/matio.hpp"
#include "amca/metrics.hpp"
#include "amca/separation.hpp"
#include "amca/spcgen.hpp"
#include "amca/transforms.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace amca {

enum class SweepKind { coherence, dynamic_range, n_sources, noise, custom };
enum class Aggregate { median, mean };

inline std::string to_string(SweepKind k) {
  switch (k) {
    case SweepKind::coherence: return "coherence";
    case SweepKind::dynamic_range: return "dynamic-range";
    case SweepKind::n_sources: return "nsources";
    case SweepKind::noise: return "noise";
    case SweepKind::custom: return "custom";
  }
  return "custom";
}

inline SweepKind parse_sweep_kind(std::string_view name) {
  if (name == "coherence") return SweepKind::coherence;
  if (name == "dynamic-range" || name == "dynamic_range") return SweepKind::dynamic_range;
  if (name == "nsources" || name == "n_sources") return SweepKind::n_sources;
  if (name == "noise") return SweepKind::noise;
  if (name == "custom") return SweepKind::custom;
  throw InvalidConfig("unknown experiment kind '" + std::string(name) + "'");
}

inline std::string to_string(Aggregate a) { return a == Aggregate::median ? "median" : "mean"; }

inline Aggregate parse_aggregate(std::string_view name) {
  if (name == "median") return Aggregate::median;
  if (name == "mean") return Aggregate::mean;
  throw InvalidConfig("unknown aggregate '" + std::string(name) + "'");
}

struct ExperimentSpec {
  SweepKind kind = SweepKind::coherence;
  std::string field;  // custom sweeps: the SpcConfig field that `values` overrides
  std::vector<double> values;
  int trials = 10;
  SpcConfig base;
  std::vector<AlgoParams> algorithms;
  FrameSpec frame;
  Aggregate aggregate = Aggregate::median;
  std::uint64_t seed = 0;
  std::string out;
  bool record_runtime = false;  // off keeps the CSV reproducible byte for byte

  void validate() const;
};

// Fields a custom sweep may override.
inline const std::vector<std::string>& custom_fields() {
  static const std::vector<std::string> fields = {"coherence", "tau",  "n",      "m",
                                                  "T",         "sparsity", "fwhm", "snr_db"};
  return fields;
}

/// The config for one sweep value.
inline SpcConfig config_for(const ExperimentSpec& spec, double value) {
  SpcConfig cfg = spec.base;
  auto as_count = [&](const char* what) {
    if (!(value >= 1.0) || value != std::round(value) || value > 1e9) {
      throw InvalidConfig(std::string(what) + " sweep value must be a positive integer");
    }
    return static_cast<int>(value);
  };
  std::string field;
  switch (spec.kind) {
    case SweepKind::coherence: field = "coherence"; break;
    case SweepKind::dynamic_range: field = "tau"; break;
    case SweepKind::noise: field = "snr_db"; break;
    case SweepKind::n_sources:
      cfg.n = cfg.m = as_count("source count");
      return cfg;
    case SweepKind::custom: field = spec.field; break;
  }
  if (field == "coherence") cfg.coherence = value;
  else if (field == "tau") cfg.tau = value;
  else if (field == "snr_db") cfg.snr_db = value;
  else if (field == "sparsity") cfg.sparsity = value;
  else if (field == "fwhm") cfg.fwhm = value;
  else if (field == "n") cfg.n = as_count("n");
  else if (field == "m") cfg.m = as_count("m");
  else if (field == "T") cfg.T = as_count("T");
  else throw InvalidConfig("custom sweep field '" + field + "' is not one of the SpcConfig fields");
  return cfg;
}

inline void ExperimentSpec::validate() const {
  if (values.empty()) throw InvalidConfig("sweep needs at least one value");
  if (trials < 1) throw InvalidConfig("trials must be >= 1");
  if (algorithms.empty()) throw InvalidConfig("sweep needs at least one algorithm");
  for (const auto& a : algorithms) a.validate();
  for (double v : values) config_for(*this, v).validate();
}

// ---------------------------------------------------------------------------
// Seeds

inline constexpr std::uint64_t kSeedIndexLimit = std::uint64_t{1} << 21;

/// Injective in (value index, trial index, algo index) for a fixed base seed:
/// the indices are packed into disjoint 21-bit fields and pushed through
/// bijections.
inline std::uint64_t trial_seed(std::uint64_t base, std::size_t value_index,
                                std::size_t trial_index, std::size_t algo_index) {
  if (value_index >= kSeedIndexLimit || trial_index >= kSeedIndexLimit ||
      algo_index >= kSeedIndexLimit) {
    throw InvalidConfig("sweep too large for seed derivation (2^21 per axis)");
  }
  const std::uint64_t key = (std::uint64_t{value_index} << 42) |
                            (std::uint64_t{trial_index} << 21) | std::uint64_t{algo_index};
  return mix64(base ^ mix64(key));
}

/// Seed of the data shared by all algorithms in one trial. Uses the last
/// algo slot, which no algorithm can occupy.
inline std::uint64_t data_seed(std::uint64_t base, std::size_t value_index,
                               std::size_t trial_index) {
  return trial_seed(base, value_index, trial_index, kSeedIndexLimit - 1);
}

// ---------------------------------------------------------------------------
// Rows and aggregates

struct SweepRow {
  SweepKind kind = SweepKind::custom;
  double value = 0.0;
  int trial = 0;
  std::string algo;
  double mean_sdr = 0.0;
  double min_sdr = 0.0;
  double ca = 0.0;
  double runtime_s = 0.0;
  std::uint64_t seed_used = 0;
  bool failed = false;  // scores are NaN
  std::string error;    // not serialized
};

inline bool operator==(const SweepRow& a, const SweepRow& b) {
  auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return a.kind == b.kind && same(a.value, b.value) && a.trial == b.trial && a.algo == b.algo &&
         same(a.mean_sdr, b.mean_sdr) && same(a.min_sdr, b.min_sdr) && same(a.ca, b.ca) &&
         same(a.runtime_s, b.runtime_s) && a.seed_used == b.seed_used && a.failed == b.failed;
}

struct AggregateRow {
  double value = 0.0;
  std::string algo;
  std::string metric;  // mean_sdr, min_sdr or ca
  double median = 0.0;
  double mean = 0.0;
  int used = 0;      // trials that entered the aggregate
  int excluded = 0;  // failed trials left out

  double get(Aggregate a) const { return a == Aggregate::median ? median : mean; }
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<AggregateRow> aggregates;
  int failed = 0;
};

/// Labels for the algorithms of a sweep; repeated names get a suffix.
inline std::vector<std::string> algorithm_labels(const std::vector<AlgoParams>& algorithms) {
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& a : algorithms) {
    const std::string base = to_string(a.algorithm);
    const int count = seen[base]++;
    labels.push_back(count == 0 ? base : base + "_" + std::to_string(count + 1));
  }
  return labels;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return median_inplace(v);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (double x : v) total += x;
  return total / static_cast<double>(v.size());
}

/// Per (value, algo, metric) median and mean over the trials that did not
/// fail. Rows must be in sweep order.
inline std::vector<AggregateRow> aggregate_rows(const std::vector<SweepRow>& rows) {
  struct Key {
    std::size_t first_seen;
    double value;
    std::string algo;
  };
  std::vector<Key> keys;
  std::map<std::pair<double, std::string>, std::size_t> index;
  std::vector<std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.value, r.algo);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      keys.push_back({groups.size(), r.value, r.algo});
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const auto& key : keys) {
    const auto& group = groups[key.first_seen];
    for (const char* metric : {"mean_sdr", "min_sdr", "ca"}) {
      std::vector<double> xs;
      int excluded = 0;
      for (const auto* r : group) {
        if (r->failed) {
          ++excluded;
          continue;
        }
        const std::string_view m = metric;
        xs.push_back(m == "mean_sdr" ? r->mean_sdr : m == "min_sdr" ? r->min_sdr : r->ca);
      }
      AggregateRow a;
      a.value = key.value;
      a.algo = key.algo;
      a.metric = metric;
      a.median = median_of(xs);
      a.mean = mean_of(xs);
      a.used = static_cast<int>(xs.size());
      a.excluded = excluded;
      out.push_back(std::move(a));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

/// Worker count from AMCA_WORKERS, else the hardware concurrency.
inline int default_workers() {
  if (const char* env = std::getenv("AMCA_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 4096) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline SweepResult run_sweep(const ExperimentSpec& spec, int workers = default_workers()) {
  spec.validate();
  if (spec.algorithms.size() >= kSeedIndexLimit - 1) throw InvalidConfig("too many algorithms");
  const auto labels = algorithm_labels(spec.algorithms);
  const std::size_t n_values = spec.values.size();
  const std::size_t n_trials = static_cast<std::size_t>(spec.trials);
  const std::size_t n_algos = spec.algorithms.size();

  std::vector<SweepRow> rows(n_values * n_trials * n_algos);
  const std::size_t tasks = n_values * n_trials;
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto run_task = [&](std::size_t task) {
    const std::size_t vi = task / n_trials;
    const std::size_t ti = task % n_trials;
    const double value = spec.values[vi];
    auto* slot = &rows[task * n_algos];
    for (std::size_t ai = 0; ai < n_algos; ++ai) {
      auto& row = slot[ai];
      row.kind = spec.kind;
      row.value = value;
      row.trial = static_cast<int>(ti);
      row.algo = labels[ai];
      row.seed_used = trial_seed(spec.seed, vi, ti, ai);
    }
    auto mark_failed = [](SweepRow& row, const std::string& what) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.failed = true;
      row.error = what;
      row.mean_sdr = row.min_sdr = row.ca = nan;
    };

    SpcConfig cfg = config_for(spec, value);
    cfg.seed = data_seed(spec.seed, vi, ti);
    std::optional<GroundTruth> truth;
    try {
      truth = generate(cfg);
    } catch (const Error& e) {
      for (std::size_t ai = 0; ai < n_algos; ++ai) mark_failed(slot[ai], e.what());
      return;
    }
    const SdrProjector projector(truth->sources, truth->noise);
    for (std::size_t ai = 0; ai < n_algos; ++ai) {
      auto& row = slot[ai];
      AlgoParams params = spec.algorithms[ai];
      params.init_seed = row.seed_used;
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto result = run(truth->observations, cfg.n, params, spec.frame);
        const auto scores = score_result(result, *truth, projector);
        row.mean_sdr = scores.mean_sdr;
        row.min_sdr = scores.min_sdr;
        row.ca = scores.ca;
      } catch (const Error& e) {
        mark_failed(row, e.what());
      }
      if (spec.record_runtime) {
        row.runtime_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
    }
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= tasks) return;
      try {
        run_task(task);
      } catch (...) {
        std::lock_guard lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        next.store(tasks);
        return;
      }
    }
  };

  const int pool_size = std::max(1, std::min<int>(workers, static_cast<int>(tasks)));
  if (pool_size == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(pool_size));
    for (int i = 0; i < pool_size; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  SweepResult result;
  result.rows = std::move(rows);
  for (const auto& r : result.rows) result.failed += r.failed ? 1 : 0;
  result.aggregates = aggregate_rows(result.rows);
  return result;
}

// ---------------------------------------------------------------------------
// Default experiments

inline std::vector<AlgoParams> default_algorithms() {
  AlgoParams gmca;
  gmca.algorithm = Algorithm::gmca;
  AlgoParams amca;
  amca.algorithm = Algorithm::amca;
  return {gmca, amca};
}

inline ExperimentSpec default_experiment(SweepKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.trials = 10;
  spec.base = SpcConfig{};
  spec.base.coherence = 0.2;
  spec.algorithms = default_algorithms();
  spec.out = "results/" + to_string(kind);
  switch (kind) {
    case SweepKind::coherence:
      for (int i = 0; i <= 10; ++i) spec.values.push_back(i / 10.0);
      break;
    case SweepKind::dynamic_range:
      // 10 points, log-spaced over [0.1, 32]
      for (int i = 0; i < 10; ++i) spec.values.push_back(0.1 * std::pow(320.0, i / 9.0));
      spec.values.back() = 32.0;
      break;
    case SweepKind::n_sources:
      for (int n = 2; n <= 128; n *= 2) spec.values.push_back(n);
      break;
    case SweepKind::noise:
      for (int snr = 20; snr <= 120; snr += 10) spec.values.push_back(snr);
      break;
    case SweepKind::custom:
      spec.field = "coherence";
      spec.values = {spec.base.coherence};
      break;
  }
  return spec;
}

/// The coherence, dynamic-range, source-count and noise sweeps.
inline std::vector<ExperimentSpec> default_experiments() {
  return {default_experiment(SweepKind::coherence), default_experiment(SweepKind::dynamic_range),
          default_experiment(SweepKind::n_sources), default_experiment(SweepKind::noise)};
}

// ---------------------------------------------------------------------------
// JSON config

inline nlohmann::json to_json(const SpcConfig& c) {
  nlohmann::json j = {{"n", c.n},
                      {"m", c.m},
                      {"T", c.T},
                      {"sparsity", c.sparsity},
                      {"coherence", c.coherence},
                      {"tau", c.tau},
                      {"fwhm", c.fwhm},
                      {"seed", c.seed}};
  j["snr_db"] = c.snr_db ? nlohmann::json(*c.snr_db) : nlohmann::json("noiseless");
  return j;
}

inline nlohmann::json to_json(const AlgoParams& p) {
  return {{"algorithm", to_string(p.algorithm)},
          {"p_max", p.p_max},
          {"epsilon", p.epsilon},
          {"q_start", p.q_start},
          {"q_final", p.q_final},
          {"final_sigma_mult", p.final_sigma_mult},
          {"threshold_mode", to_string(p.threshold_mode)},
          {"threshold_law", to_string(p.threshold_law)},
          {"weight_square", p.weight_square},
          {"early_stop", p.early_stop},
          {"fit_coarse", p.fit_coarse},
          {"init_seed", p.init_seed}};
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
  nlohmann::json algos = nlohmann::json::array();
  for (const auto& a : s.algorithms) algos.push_back(to_json(a));
  nlohmann::json j = {{"kind", to_string(s.kind)},
                      {"values", s.values},
                      {"trials", s.trials},
                      {"base", to_json(s.base)},
                      {"algorithms", algos},
                      {"frame", to_string(s.frame)},
                      {"aggregate", to_string(s.aggregate)},
                      {"seed", s.seed},
                      {"out", s.out},
                      {"record_runtime", s.record_runtime}};
  if (s.kind == SweepKind::custom) j["field"] = s.field;
  return j;
}

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& target) {
  if (j.contains(key)) j.at(key).get_to(target);
}

}  // namespace detail

/// Fields missing from `j` keep the values in `c`.
inline SpcConfig spc_config_from_json(const nlohmann::json& j, SpcConfig c = {}) {
  detail::read_field(j, "n", c.n);
  detail::read_field(j, "m", c.m);
  detail::read_field(j, "T", c.T);
  detail::read_field(j, "sparsity", c.sparsity);
  detail::read_field(j, "coherence", c.coherence);
  detail::read_field(j, "tau", c.tau);
  detail::read_field(j, "fwhm", c.fwhm);
  detail::read_field(j, "seed", c.seed);
  if (j.contains("snr_db")) {
    const auto& v = j.at("snr_db");
    if (v.is_null() || (v.is_string() && v.get<std::string>() == "noiseless")) {
      c.snr_db.reset();
    } else {
      c.snr_db = v.get<double>();
    }
  }
  return c;
}

inline AlgoParams algo_params_from_json(const nlohmann::json& j, AlgoParams p = {}) {
  if (j.contains("algorithm")) p.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  detail::read_field(j, "p_max", p.p_max);
  detail::read_field(j, "epsilon", p.epsilon);
  detail::read_field(j, "q_start", p.q_start);
  detail::read_field(j, "q_final", p.q_final);
  detail::read_field(j, "final_sigma_mult", p.final_sigma_mult);
  if (j.contains("threshold_mode")) {
    p.threshold_mode = parse_threshold_mode(j.at("threshold_mode").get<std::string>());
  }
  if (j.contains("threshold_law")) {
    p.threshold_law = parse_threshold_law(j.at("threshold_law").get<std::string>());
  }
  detail::read_field(j, "weight_square", p.weight_square);
  detail::read_field(j, "early_stop", p.early_stop);
  detail::read_field(j, "fit_coarse", p.fit_coarse);
  detail::read_field(j, "init_seed", p.init_seed);
  return p;
}

/// Fields missing from `j` keep the values in `defaults`. A "kind" field
/// that differs from the defaults' kind starts from that kind's defaults.
inline ExperimentSpec experiment_from_json(const nlohmann::json& j,
                                           std::optional<ExperimentSpec> defaults = {}) {
  try {
    ExperimentSpec s = defaults ? *defaults : default_experiment(SweepKind::coherence);
    if (j.contains("kind")) {
      const auto kind = parse_sweep_kind(j.at("kind").get<std::string>());
      if (kind != s.kind) s = default_experiment(kind);
    }
    detail::read_field(j, "field", s.field);
    detail::read_field(j, "values", s.values);
    detail::read_field(j, "trials", s.trials);
    if (j.contains("base")) s.base = spc_config_from_json(j.at("base"), s.base);
    if (j.contains("algorithms")) {
      s.algorithms.clear();
      for (const auto& a : j.at("algorithms")) s.algorithms.push_back(algo_params_from_json(a));
    }
    if (j.contains("frame")) s.frame = parse_frame_spec(j.at("frame").get<std::string>());
    if (j.contains("aggregate")) s.aggregate = parse_aggregate(j.at("aggregate").get<std::string>());
    detail::read_field(j, "seed", s.seed);
    detail::read_field(j, "out", s.out);
    detail::read_field(j, "record_runtime", s.record_runtime);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("experiment config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Emission

inline constexpr std::string_view kCsvHeader = "kind,value,trial,algo,mean_sdr,min_sdr,ca,runtime_s,seed_used";

namespace detail {

// Shortest text that parses back to the same double.
inline std::string exact_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw IoError("bad number '" + text + "' in CSV");
  }
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::ofstream open_for_writing(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << detail::exact_double(r.value) << ',' << r.trial << ','
        << r.algo << ',' << detail::exact_double(r.mean_sdr) << ','
        << detail::exact_double(r.min_sdr) << ',' << detail::exact_double(r.ca) << ','
        << detail::exact_double(r.runtime_s) << ',' << r.seed_used << '\n';
  }
}

inline void emit_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  if (rows.empty()) throw InvalidArgument("no rows to write");
  auto out = detail::open_for_writing(path);
  write_csv(out, rows);
  if (!out) throw IoError("write failed: " + path.string());
}

/// Parses what write_csv produced. Rows with NaN scores come back flagged
/// as failed.
inline std::vector<SweepRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("CSV header mismatch");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 9) throw IoError("CSV row has " + std::to_string(f.size()) + " fields");
    SweepRow r;
    r.kind = parse_sweep_kind(f[0]);
    r.value = detail::parse_double(f[1]);
    r.trial = std::stoi(f[2]);
    r.algo = f[3];
    r.mean_sdr = detail::parse_double(f[4]);
    r.min_sdr = detail::parse_double(f[5]);
    r.ca = detail::parse_double(f[6]);
    r.runtime_s = detail::parse_double(f[7]);
    r.seed_used = std::stoull(f[8]);
    r.failed = std::isnan(r.mean_sdr) && std::isnan(r.min_sdr) && std::isnan(r.ca);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<SweepRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_csv(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

/// value,algo,metric,median,mean,used,excluded
inline void emit_aggregates(const std::vector<AggregateRow>& aggs,
                            const std::filesystem::path& path) {
  auto out = detail::open_for_writing(path);
  out << "value,algo,metric,median,mean,used,excluded\n";
  for (const auto& a : aggs) {
    out << detail::exact_double(a.value) << ',' << a.algo << ',' << a.metric << ','
        << detail::exact_double(a.median) << ',' << detail::exact_double(a.mean) << ',' << a.used
        << ',' << a.excluded << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

/// One two-column file per (algo, metric), named <algo>_<metric>.dat.
/// Returns the paths written.
inline std::vector<std::filesystem::path> emit_plotdata(const std::vector<AggregateRow>& aggs,
                                                        const std::filesystem::path& dir,
                                                        Aggregate which = Aggregate::median) {
  std::map<std::string, std::vector<const AggregateRow*>> files;
  std::vector<std::string> order;
  for (const auto& a : aggs) {
    const std::string name = a.algo + "_" + a.metric + ".dat";
    if (!files.count(name)) order.push_back(name);
    files[name].push_back(&a);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& name : order) {
    const auto path = dir / name;
    auto out = detail::open_for_writing(path);
    out << "# value " << to_string(which) << '\n';
    for (const auto* a : files[name]) {
      out << detail::exact_double(a->value) << ' ' << detail::exact_double(a->get(which)) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
    written.push_back(path);
  }
  return written;
}

/// results.csv, aggregate.csv, plot/<algo>_<metric>.dat and the resolved
/// spec.json under `dir`.
inline void emit_sweep(const ExperimentSpec& spec, const SweepResult& result,
                       const std::filesystem::path& dir) {
  emit_csv(result.rows, dir / "results.csv");
  emit_aggregates(result.aggregates, dir / "aggregate.csv");
  emit_plotdata(result.aggregates, dir / "plot", spec.aggregate);
  write_json(dir / "spec.json", to_json(spec));
}

}  // namespace amca
