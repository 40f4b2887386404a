#pragma once

// Experiment configuration, victim/dataset resolution and the batch runner
// behind the command-line tool.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vidattack/attack.hpp"
#include "vidattack/dataset_io.hpp"
#include "vidattack/metrics.hpp"
#include "vidattack/remote.hpp"
#include "vidattack/synthetic.hpp"

namespace vidattack {

inline constexpr const char* kConfigEnvVar = "VIDATTACK_CONFIG";

enum class Variant { Baseline, Temporal, TemporalSpatial };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Temporal: return "temporal";
    case Variant::TemporalSpatial: return "temporal_spatial";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::Baseline, Variant::Temporal, Variant::TemporalSpatial}) {
    if (to_string(v) == s) return v;
  }
  throw Error(Errc::InvalidConfig, "unknown variant '" + s + "'");
}

inline AttackConfig configure_variant(AttackConfig c, Variant v) {
  c.enable_temporal = v != Variant::Baseline;
  c.enable_spatial = v == Variant::TemporalSpatial;
  return c;
}

struct VictimSource {
  enum class Kind { Dataset, File, Remote } kind = Kind::Dataset;
  std::string path;  // File
  std::string url;   // Remote
  double timeout_s = 30.0;
};

struct DatasetSource {
  std::optional<std::string> path;  // unset: generate from `synthetic`
  SyntheticSpec synthetic{};
};

struct BenchOptions {
  std::vector<Variant> variants{Variant::Baseline, Variant::Temporal, Variant::TemporalSpatial};
  std::optional<std::size_t> videos;  // unset: every sample
  int jobs = 1;
  bool log_queries = false;
};

struct ExperimentConfig {
  VictimSource victim;
  DatasetSource dataset;
  AttackConfig attack;
  BenchOptions bench;
  std::string output = "vidattack-out";
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok) throw Error(Errc::InvalidConfig, "unknown key '" + std::string(where) + "." + item.key() + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::InvalidConfig, std::string("bad value for '") + key + "'");
  }
}

inline double read_omega(const json& v) {
  if (v.is_null() || (v.is_string() && (v == "inf" || v == "infinity"))) {
    return std::numeric_limits<double>::infinity();
  }
  if (!v.is_number()) throw Error(Errc::InvalidConfig, "omega must be a number, \"inf\" or null");
  return v.get<double>();
}

inline void read_optimizer(const json& j, OptimizerConfig& o) {
  check_keys(j, "attack.optimizer",
             {"beta", "n_samples", "eta0", "eta_min", "beta_min", "max_iterations", "query_budget",
              "stop_on_stall", "max_doublings", "convergence_tolerance", "convergence_window",
              "tolerance_ratio"});
  read(j, "beta", o.beta);
  read(j, "n_samples", o.n_samples);
  read(j, "eta0", o.eta0);
  read(j, "eta_min", o.eta_min);
  read(j, "beta_min", o.beta_min);
  read(j, "max_iterations", o.max_iterations);
  if (j.contains("query_budget")) {
    if (j["query_budget"].is_null()) {
      o.query_budget.reset();
    } else {
      std::uint64_t b = 0;
      read(j, "query_budget", b);
      o.query_budget = b;
    }
  }
  read(j, "stop_on_stall", o.stop_on_stall);
  read(j, "max_doublings", o.max_doublings);
  read(j, "convergence_tolerance", o.convergence_tolerance);
  read(j, "convergence_window", o.convergence_window);
  read(j, "tolerance_ratio", o.tolerance_ratio);
}

inline void read_saliency(const json& j, SaliencyOptions& s) {
  check_keys(j, "attack.saliency", {"resolution", "box", "sigma", "log_floor"});
  read(j, "resolution", s.resolution);
  read(j, "box", s.box);
  read(j, "sigma", s.sigma);
  read(j, "log_floor", s.log_floor);
}

inline AttackConfig read_attack(const json& j) {
  check_keys(j, "attack",
             {"goal", "target", "omega", "phi", "n_init_candidates", "seed", "enable_temporal", "enable_spatial",
              "clamp_output", "boundary_tolerance", "optimizer", "saliency"});
  bool targeted = false;
  if (j.contains("goal")) {
    const auto goal = j["goal"].is_string() ? j["goal"].get<std::string>() : std::string();
    if (goal != "targeted" && goal != "untargeted") {
      throw Error(Errc::InvalidConfig, "goal must be \"targeted\" or \"untargeted\"");
    }
    targeted = goal == "targeted";
  }
  AttackConfig c = AttackConfig::defaults(targeted);
  read(j, "target", c.target);
  if (j.contains("omega")) c.omega = read_omega(j["omega"]);
  read(j, "phi", c.phi);
  read(j, "n_init_candidates", c.n_init_candidates);
  read(j, "seed", c.seed);
  read(j, "enable_temporal", c.enable_temporal);
  read(j, "enable_spatial", c.enable_spatial);
  read(j, "clamp_output", c.clamp_output);
  read(j, "boundary_tolerance", c.boundary.tolerance);
  if (j.contains("optimizer")) read_optimizer(j["optimizer"], c.optimizer);
  if (j.contains("saliency")) read_saliency(j["saliency"], c.saliency);
  return c;
}

inline SyntheticSpec read_synthetic(const json& j) {
  check_keys(j, "dataset.synthetic",
             {"shape", "classes", "samples", "seed", "ignored_frames", "patch_fraction", "amplitude", "noise",
              "background", "margin", "temperature"});
  SyntheticSpec s;
  if (j.contains("shape")) s.shape = shape_from_json(j["shape"]);
  read(j, "classes", s.classes);
  read(j, "samples", s.samples);
  read(j, "seed", s.seed);
  read(j, "ignored_frames", s.ignored_frames);
  read(j, "patch_fraction", s.patch_fraction);
  read(j, "amplitude", s.amplitude);
  read(j, "noise", s.noise);
  read(j, "background", s.background);
  read(j, "margin", s.margin);
  read(j, "temperature", s.temperature);
  s.validate();
  return s;
}

inline nlohmann::ordered_json omega_json(double omega) {
  if (std::isinf(omega)) return "inf";
  return omega;
}

}  // namespace detail

/// Parses a schema-1 experiment config. Every key is optional except
/// "schema"; unknown keys anywhere are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::read;
  check_keys(j, "config", {"schema", "victim", "dataset", "attack", "bench", "output"});
  if (!j.contains("schema") || j["schema"] != 1) throw Error(Errc::InvalidConfig, "config needs \"schema\": 1");
  ExperimentConfig c;

  if (j.contains("victim")) {
    const auto& v = j["victim"];
    check_keys(v, "victim", {"kind", "path", "url", "timeout_s"});
    std::string kind = "dataset";
    read(v, "kind", kind);
    if (kind == "dataset") {
      c.victim.kind = VictimSource::Kind::Dataset;
    } else if (kind == "file") {
      c.victim.kind = VictimSource::Kind::File;
      if (!v.contains("path")) throw Error(Errc::InvalidConfig, "victim.path required for kind \"file\"");
    } else if (kind == "remote") {
      c.victim.kind = VictimSource::Kind::Remote;
      if (!v.contains("url")) throw Error(Errc::InvalidConfig, "victim.url required for kind \"remote\"");
    } else {
      throw Error(Errc::InvalidConfig, "victim.kind must be dataset, file or remote");
    }
    read(v, "path", c.victim.path);
    read(v, "url", c.victim.url);
    read(v, "timeout_s", c.victim.timeout_s);
  }

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, "dataset", {"path", "synthetic"});
    if (d.contains("path") && d.contains("synthetic")) {
      throw Error(Errc::InvalidConfig, "dataset takes either path or synthetic");
    }
    if (d.contains("path")) {
      std::string p;
      read(d, "path", p);
      c.dataset.path = p;
    }
    if (d.contains("synthetic")) c.dataset.synthetic = detail::read_synthetic(d["synthetic"]);
  }

  if (j.contains("attack")) c.attack = detail::read_attack(j["attack"]);
  c.attack.validate();

  if (j.contains("bench")) {
    const auto& b = j["bench"];
    check_keys(b, "bench", {"variants", "videos", "jobs", "log_queries"});
    if (b.contains("variants")) {
      std::vector<std::string> names;
      read(b, "variants", names);
      if (names.empty()) throw Error(Errc::InvalidConfig, "bench.variants must not be empty");
      c.bench.variants.clear();
      for (const auto& n : names) c.bench.variants.push_back(parse_variant(n));
    }
    if (b.contains("videos") && !b["videos"].is_null()) {
      std::size_t n = 0;
      read(b, "videos", n);
      c.bench.videos = n;
    }
    read(b, "jobs", c.bench.jobs);
    if (c.bench.jobs < 1) throw Error(Errc::InvalidConfig, "bench.jobs must be >= 1");
    read(b, "log_queries", c.bench.log_queries);
  }
  read(j, "output", c.output);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  try {
    return parse_config(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path + ": " + e.what());
  }
}

inline nlohmann::ordered_json optimizer_json(const OptimizerConfig& o) {
  nlohmann::ordered_json j;
  j["beta"] = o.beta;
  j["n_samples"] = o.n_samples;
  j["eta0"] = o.eta0;
  j["eta_min"] = o.eta_min;
  j["beta_min"] = o.beta_min;
  j["max_iterations"] = o.max_iterations;
  j["query_budget"] = o.query_budget ? nlohmann::ordered_json(*o.query_budget) : nlohmann::ordered_json(nullptr);
  j["stop_on_stall"] = o.stop_on_stall;
  j["max_doublings"] = o.max_doublings;
  j["convergence_tolerance"] = o.convergence_tolerance;
  j["convergence_window"] = o.convergence_window;
  j["tolerance_ratio"] = o.tolerance_ratio;
  return j;
}

inline nlohmann::ordered_json attack_json(const AttackConfig& c) {
  nlohmann::ordered_json j;
  j["goal"] = c.targeted ? "targeted" : "untargeted";
  if (c.targeted) j["target"] = c.target;
  j["omega"] = detail::omega_json(c.omega);
  j["phi"] = c.phi;
  j["n_init_candidates"] = c.n_init_candidates;
  j["seed"] = c.seed;
  j["enable_temporal"] = c.enable_temporal;
  j["enable_spatial"] = c.enable_spatial;
  j["clamp_output"] = c.clamp_output;
  j["boundary_tolerance"] = c.boundary.tolerance;
  j["optimizer"] = optimizer_json(c.optimizer);
  j["saliency"] = {{"resolution", c.saliency.resolution},
                   {"box", c.saliency.box},
                   {"sigma", c.saliency.sigma},
                   {"log_floor", c.saliency.log_floor}};
  return j;
}

inline nlohmann::ordered_json synthetic_json(const SyntheticSpec& s) {
  nlohmann::ordered_json j;
  j["shape"] = shape_json(s.shape);
  j["classes"] = s.classes;
  j["samples"] = s.samples;
  j["seed"] = s.seed;
  j["ignored_frames"] = s.ignored_frames;
  j["patch_fraction"] = s.patch_fraction;
  j["amplitude"] = s.amplitude;
  j["noise"] = s.noise;
  j["background"] = s.background;
  j["margin"] = s.margin;
  j["temperature"] = s.temperature;
  return j;
}

/// The fully defaulted config, in the same layout parse_config accepts.
inline nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  nlohmann::ordered_json v;
  switch (c.victim.kind) {
    case VictimSource::Kind::Dataset: v["kind"] = "dataset"; break;
    case VictimSource::Kind::File: v["kind"] = "file"; v["path"] = c.victim.path; break;
    case VictimSource::Kind::Remote:
      v["kind"] = "remote";
      v["url"] = c.victim.url;
      v["timeout_s"] = c.victim.timeout_s;
      break;
  }
  j["victim"] = v;
  if (c.dataset.path) {
    j["dataset"] = {{"path", *c.dataset.path}};
  } else {
    j["dataset"] = {{"synthetic", synthetic_json(c.dataset.synthetic)}};
  }
  j["attack"] = attack_json(c.attack);
  nlohmann::ordered_json b;
  b["variants"] = nlohmann::ordered_json::array();
  for (Variant var : c.bench.variants) b["variants"].push_back(std::string(to_string(var)));
  b["videos"] = c.bench.videos ? nlohmann::ordered_json(*c.bench.videos) : nlohmann::ordered_json(nullptr);
  b["jobs"] = c.bench.jobs;
  b["log_queries"] = c.bench.log_queries;
  j["bench"] = b;
  j["output"] = c.output;
  return j;
}

/// Dataset plus the victim it is attacked through.
struct Workspace {
  Dataset dataset;
  Shape shape;
  int classes = 0;
  std::shared_ptr<const Victim> victim;
};

inline Workspace open_workspace(const ExperimentConfig& c) {
  Workspace ws;
  std::optional<LinearVictimSpec> bundled;
  if (c.dataset.path) {
    LoadedDataset loaded = load_dataset(*c.dataset.path);
    ws.dataset = std::move(loaded.dataset);
    ws.shape = loaded.shape;
    ws.classes = loaded.classes;
    bundled = std::move(loaded.victim);
  } else {
    SyntheticBundle b = generate_synthetic(c.dataset.synthetic);
    ws.dataset = std::move(b.dataset);
    ws.shape = c.dataset.synthetic.shape;
    ws.classes = c.dataset.synthetic.classes;
    bundled = std::move(b.victim);
  }
  switch (c.victim.kind) {
    case VictimSource::Kind::Dataset:
      if (!bundled) throw Error(Errc::InvalidConfig, "dataset ships no victim; set victim.kind");
      ws.victim = bundled->build();
      break;
    case VictimSource::Kind::File:
      ws.victim = load_victim(c.victim.path).build();
      break;
    case VictimSource::Kind::Remote:
      ws.victim = std::make_shared<RemoteVictim>(c.victim.url, ws.shape, ws.classes,
                                                 static_cast<time_t>(std::ceil(c.victim.timeout_s)));
      break;
  }
  if (!(ws.victim->input_shape() == ws.shape)) {
    throw Error(Errc::ShapeMismatch, "victim expects " + to_string(ws.victim->input_shape()) + ", dataset is " +
                                         to_string(ws.shape));
  }
  return ws;
}

inline nlohmann::ordered_json purpose_json(const std::array<std::uint64_t, kQueryPurposeCount>& counts) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kQueryPurposeCount; ++i) {
    j[std::string(to_string(static_cast<QueryPurpose>(i)))] = counts[i];
  }
  return j;
}

/// Share of queries spent on key-frame search (frame ranking and pruning).
inline double key_frame_share(const std::array<std::uint64_t, kQueryPurposeCount>& counts) {
  std::uint64_t total = 0;
  for (auto v : counts) total += v;
  if (total == 0) return 0.0;
  const auto idx = [](QueryPurpose p) { return static_cast<std::size_t>(p); };
  const std::uint64_t key = counts[idx(QueryPurpose::Ranking)] + counts[idx(QueryPurpose::Prune)];
  return static_cast<double>(key) / static_cast<double>(total);
}

struct VariantOutcome {
  Variant variant;
  MetricsSummary summary;
  std::array<std::uint64_t, kQueryPurposeCount> queries_by_purpose{};
};

struct BenchOutcome {
  std::vector<VariantOutcome> variants;
};

/// Attacks the first `videos` samples under each variant. Video i always
/// uses seed attack.seed + i, so variants differ only in the enabled stages.
/// Runs up to `jobs` attacks at once, each with its own session.
inline BenchOutcome run_bench(const ExperimentConfig& c, const Workspace& ws,
                              const std::function<void(const std::string&)>& log = {}) {
  const std::size_t n = std::min(c.bench.videos.value_or(ws.dataset.size()), ws.dataset.size());
  if (n == 0) throw Error(Errc::EmptyBatch, "no videos to attack");
  BenchOutcome out;
  std::mutex log_mutex;
  for (Variant variant : c.bench.variants) {
    const AttackConfig base = configure_variant(c.attack, variant);
    std::vector<ResultRow> rows(n);
    std::vector<std::array<std::uint64_t, kQueryPurposeCount>> purposes(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < n; i = next++) {
        const LabeledVideo& sample = ws.dataset[i];
        AttackConfig cfg = base;
        cfg.seed = c.attack.seed + i;
        QuerySession session(*ws.victim);
        std::string line;
        try {
          const AttackResult r = attack(session, sample.video, sample.label, cfg, ws.dataset);
          rows[i] = to_row(sample.id, r);
          purposes[i] = r.queries_by_purpose;
          line = std::string(to_string(variant)) + " " + sample.id + (r.success ? " success" : " failure") +
                 " queries=" + std::to_string(r.queries);
        } catch (const Error& e) {
          rows[i] = ResultRow{sample.id, false, true, session.count(), 0.0, 0.0, 0.0};
          line = std::string(to_string(variant)) + " " + sample.id + " error " + e.what();
        }
        if (log) {
          std::lock_guard lock(log_mutex);
          log(line);
        }
      }
    };
    const int jobs = std::max(1, std::min<int>(c.bench.jobs, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    VariantOutcome v{variant, aggregate(rows), {}};
    for (const auto& p : purposes) {
      for (std::size_t k = 0; k < kQueryPurposeCount; ++k) v.queries_by_purpose[k] += p[k];
    }
    out.variants.push_back(std::move(v));
  }
  return out;
}

/// {"config", "variants": {name: {"rows","summary"[,"query_breakdown"]}},
/// "comparison"}. The comparison block appears when a baseline and at least
/// one other variant ran.
inline nlohmann::ordered_json bench_json(const ExperimentConfig& c, const BenchOutcome& b) {
  nlohmann::ordered_json j;
  j["config"] = config_json(c);
  j["variants"] = nlohmann::ordered_json::object();
  const VariantOutcome* baseline = nullptr;
  for (const auto& v : b.variants) {
    nlohmann::ordered_json entry = report_json(nullptr, v.summary);
    entry.erase("config");
    if (c.bench.log_queries) {
      entry["query_breakdown"] = purpose_json(v.queries_by_purpose);
      entry["query_breakdown"]["key_frame_share"] = key_frame_share(v.queries_by_purpose);
    }
    j["variants"][std::string(to_string(v.variant))] = entry;
    if (v.variant == Variant::Baseline) baseline = &v;
  }
  if (baseline && b.variants.size() > 1) {
    nlohmann::ordered_json cmp;
    cmp["baseline_mq"] = baseline->summary.median_queries;
    for (const auto& v : b.variants) {
      if (&v == baseline) continue;
      cmp[std::string(to_string(v.variant))] = {
          {"mq", v.summary.median_queries},
          {"reduction", 1.0 - v.summary.median_queries / baseline->summary.median_queries}};
    }
    j["comparison"] = cmp;
  }
  return j;
}

}  // namespace vidattack
