// vidattack: command-line front end for the hard-label video attack.
//
//   vidattack attack       --input x.vbt --label 0 [--out DIR]
//   vidattack bench        [--jobs N] [--videos N] [--variants a,b]
//   vidattack gen-dataset  --out DIR [--seed S] [--samples N] ...
//   vidattack saliency     --input x.vbt [--phi P] --out DIR
//   vidattack serve-victim [--host H] [--port P]
//
// Every subcommand reads the experiment config named by --config, falling
// back to $VIDATTACK_CONFIG and then to built-in defaults. Flags override
// config keys. Exit status: 0 success, 1 config or IO error, 2 attack failure.

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "vidattack/experiment.hpp"

namespace fs = std::filesystem;
using namespace vidattack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAttack = 2;

struct Common {
  std::string config_path;
  std::string output;
  std::optional<std::uint64_t> seed;
  bool log_queries = false;
};

ExperimentConfig resolve_config(const Common& common) {
  std::string path = common.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  }
  ExperimentConfig c = path.empty() ? parse_config(nlohmann::json{{"schema", 1}}) : load_config(path);
  if (!common.output.empty()) c.output = common.output;
  if (common.seed) c.attack.seed = *common.seed;
  if (common.log_queries) c.bench.log_queries = true;
  return c;
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "Experiment config (JSON, schema 1)");
  cmd->add_option("--seed", common.seed, "Override attack.seed");
}

struct AttackOverrides {
  std::optional<std::string> omega;
  std::optional<double> phi;
  std::optional<std::uint64_t> budget;
  std::optional<int> iterations;
  std::optional<Label> target;
  bool no_temporal = false;
  bool no_spatial = false;
};

void add_attack_overrides(CLI::App* cmd, AttackOverrides& o) {
  cmd->add_option("--omega", o.omega, "Override attack.omega (number or inf)");
  cmd->add_option("--phi", o.phi, "Override attack.phi");
  cmd->add_option("--budget", o.budget, "Override attack.optimizer.query_budget");
  cmd->add_option("--iterations", o.iterations, "Override attack.optimizer.max_iterations");
  cmd->add_option("--target", o.target, "Targeted attack towards this class");
  cmd->add_flag("--no-temporal", o.no_temporal, "Disable key-frame selection");
  cmd->add_flag("--no-spatial", o.no_spatial, "Disable the saliency mask");
}

void apply(const AttackOverrides& o, AttackConfig& c) {
  if (o.target) {
    const AttackConfig d = AttackConfig::defaults(true);
    if (!c.targeted) {
      c.omega = d.omega;
      c.phi = d.phi;
    }
    c.targeted = true;
    c.target = *o.target;
  }
  if (o.omega) {
    c.omega = (*o.omega == "inf" || *o.omega == "infinity") ? std::numeric_limits<double>::infinity()
                                                            : detail::read_omega(nlohmann::json::parse(*o.omega));
  }
  if (o.phi) c.phi = *o.phi;
  if (o.budget) c.optimizer.query_budget = *o.budget;
  if (o.iterations) c.optimizer.max_iterations = *o.iterations;
  if (o.no_temporal) c.enable_temporal = false;
  if (o.no_spatial) c.enable_spatial = false;
  c.validate();
}

nlohmann::ordered_json result_details(const AttackResult& r) {
  nlohmann::ordered_json j;
  j["success"] = r.success;
  j["budget_exhausted"] = r.budget_exhausted;
  j["g"] = r.g;
  j["final_label"] = r.final_label;
  j["clamped_label"] = r.clamped_label ? nlohmann::ordered_json(*r.clamped_label) : nlohmann::ordered_json(nullptr);
  j["key_frames"] = key_frame_count(r.mask);
  j["chosen_candidate"] = r.chosen_candidate;
  j["candidates"] = nlohmann::ordered_json::array();
  for (const auto& c : r.candidates) {
    nlohmann::ordered_json e;
    e["queries"] = c.queries;
    e["g"] = c.g ? nlohmann::ordered_json(*c.g) : nlohmann::ordered_json(nullptr);
    e["key_frames"] = c.key_frames;
    if (!c.failure.empty()) e["failure"] = c.failure;
    j["candidates"].push_back(e);
  }
  j["queries_by_purpose"] = purpose_json(r.queries_by_purpose);
  j["trace"] = nlohmann::ordered_json::array();
  for (const auto& t : r.trace.records) {
    j["trace"].push_back({{"iteration", t.iteration},
                          {"g_best", t.g_best},
                          {"g", t.g_current},
                          {"queries", t.queries},
                          {"eta", t.eta},
                          {"beta", t.beta},
                          {"accepted", t.accepted}});
  }
  return j;
}

std::string query_log_tsv(const QuerySession& s) {
  std::ostringstream out;
  out << "index\tpurpose\tlabel\tprobability\n";
  out.precision(17);
  for (const auto& q : s.log()) {
    out << q.index << '\t' << to_string(q.purpose) << '\t' << q.label << '\t' << q.probability << '\n';
  }
  return out.str();
}

int run_attack(const Common& common, const AttackOverrides& overrides, const std::string& input, Label label) {
  ExperimentConfig c = resolve_config(common);
  apply(overrides, c.attack);
  const Workspace ws = open_workspace(c);
  const VideoTensor x = load_video(input);
  require_same_shape(x.shape(), ws.shape);

  QuerySession session(*ws.victim);
  if (c.bench.log_queries) session.enable_log(true);
  const AttackResult r = attack(session, x, label, c.attack, ws.dataset);

  const fs::path out(c.output);
  fs::create_directories(out);
  const std::string id = fs::path(input).stem().string();
  nlohmann::ordered_json report = report_json(config_json(c), aggregate({to_row(id, r)}));
  report["result"] = result_details(r);
  write_json(out / "report.json", report);
  save_vbt((out / "x_adv.vbt").string(), r.x_adv);
  save_vbt((out / "mask.vbt").string(), r.mask);
  if (c.bench.log_queries) write_file((out / "queries.tsv").string(), query_log_tsv(session));

  std::cout << (r.success ? "success" : "failure") << " queries=" << r.queries << " g=" << r.g
            << " map=" << r.map << " sparsity=" << r.sparsity << (r.budget_exhausted ? " budget_exhausted" : "")
            << "\n";
  return r.success && !r.budget_exhausted ? kExitOk : kExitAttack;
}

int run_bench(const Common& common, const AttackOverrides& overrides, std::optional<int> jobs,
              std::optional<std::size_t> videos, const std::string& variants) {
  ExperimentConfig c = resolve_config(common);
  apply(overrides, c.attack);
  if (jobs) {
    if (*jobs < 1) throw Error(Errc::InvalidConfig, "--jobs must be >= 1");
    c.bench.jobs = *jobs;
  }
  if (videos) c.bench.videos = *videos;
  if (!variants.empty()) {
    c.bench.variants.clear();
    std::stringstream ss(variants);
    for (std::string v; std::getline(ss, v, ',');) c.bench.variants.push_back(parse_variant(v));
  }
  const Workspace ws = open_workspace(c);
  const BenchOutcome outcome = vidattack::run_bench(c, ws, [](const std::string& line) { std::cerr << line << "\n"; });

  const fs::path out(c.output);
  fs::create_directories(out);
  const auto report = bench_json(c, outcome);
  write_json(out / "bench.json", report);
  bool all_fooled = true;
  for (const auto& v : outcome.variants) {
    write_file((out / (std::string(to_string(v.variant)) + ".tsv")).string(), rows_tsv(v.summary));
    std::cout << to_string(v.variant) << " fr=" << v.summary.fooling_rate << " mq=" << v.summary.median_queries
              << " map=" << v.summary.map_mean << " s=" << v.summary.sparsity_mean << "\n";
    all_fooled = all_fooled && v.summary.fooling_rate == 1.0;
  }
  if (report.contains("comparison")) std::cout << "comparison " << report["comparison"].dump() << "\n";
  return all_fooled ? kExitOk : kExitAttack;
}

int run_gen_dataset(const Common& common, const std::string& out, std::optional<std::string> shape,
                    std::optional<int> classes, std::optional<int> samples, std::optional<int> ignored) {
  ExperimentConfig c = resolve_config(common);
  SyntheticSpec spec = c.dataset.synthetic;
  if (common.seed) spec.seed = *common.seed;
  if (shape) {
    std::vector<std::uint32_t> dims;
    std::stringstream ss(*shape);
    for (std::string d; std::getline(ss, d, ',');) dims.push_back(static_cast<std::uint32_t>(std::stoul(d)));
    if (dims.size() != 4) throw Error(Errc::InvalidConfig, "--shape expects T,W,H,C");
    spec.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
  }
  if (classes) spec.classes = *classes;
  if (samples) spec.samples = *samples;
  if (ignored) spec.ignored_frames = *ignored;
  const SyntheticBundle bundle = generate_synthetic(spec);

  const auto victim = bundle.victim.build();
  std::size_t correct = 0;
  for (const auto& s : bundle.dataset) correct += victim->classify(s.video).label == s.label ? 1 : 0;
  save_dataset(out, bundle);
  std::cout << "wrote " << bundle.dataset.size() << " samples to " << out << " (victim accuracy " << correct << "/"
            << bundle.dataset.size() << ")\n";
  return kExitOk;
}

int run_saliency(const Common& common, const std::string& input, std::optional<double> phi, const std::string& out) {
  ExperimentConfig c = resolve_config(common);
  const double p = phi.value_or(c.attack.phi);
  if (!(p > 0.0) || p > 1.0) throw Error(Errc::InvalidConfig, "phi must lie in (0, 1]");
  const VideoTensor x = load_video(input);
  fs::create_directories(out);
  save_vbt((fs::path(out) / "saliency.vbt").string(), stack_maps(saliency_maps(x, c.attack.saliency)));
  const BinaryMask mask = spatial_mask(x, p, c.attack.saliency);
  save_vbt((fs::path(out) / "mask.vbt").string(), mask);
  std::cout << "selected " << mask.count() / x.shape().channels << " of " << x.shape().frames * x.shape().width *
                                                                               x.shape().height
            << " pixels\n";
  return kExitOk;
}

volatile std::sig_atomic_t g_stop = 0;

int run_serve(const Common& common, const std::string& host, int port, double duration) {
  ExperimentConfig c = resolve_config(common);
  if (c.victim.kind == VictimSource::Kind::Remote) throw Error(Errc::InvalidConfig, "cannot serve a remote victim");
  const Workspace ws = open_workspace(c);
  auto server = serve_victim(ws.victim, host, port);
  std::cout << "listening on " << server->url() << std::endl;
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    if (duration > 0 && std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= duration) {
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server->stop();
  std::cout << "served " << server->requests_served() << " requests\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hard-label black-box attack on video classifiers"};
  app.require_subcommand(1);
  Common common;
  AttackOverrides overrides;

  auto* attack_cmd = app.add_subcommand("attack", "Attack one video and write report.json, x_adv.vbt, mask.vbt");
  std::string input;
  Label label = 0;
  add_common(attack_cmd, common);
  add_attack_overrides(attack_cmd, overrides);
  attack_cmd->add_option("--input", input, "Clean video (VBT1)")->required();
  attack_cmd->add_option("--label", label, "True class of the input")->required();
  attack_cmd->add_option("--out", common.output, "Output directory (overrides output)");
  attack_cmd->add_flag("--log-queries", common.log_queries, "Write every query to queries.tsv");

  auto* bench_cmd = app.add_subcommand("bench", "Run every variant over the dataset and write bench.json");
  std::optional<int> jobs;
  std::optional<std::size_t> videos;
  std::string variants;
  add_common(bench_cmd, common);
  add_attack_overrides(bench_cmd, overrides);
  bench_cmd->add_option("--jobs", jobs, "Concurrent attacks (overrides bench.jobs)");
  bench_cmd->add_option("--videos", videos, "Attack only the first N samples (overrides bench.videos)");
  bench_cmd->add_option("--variants", variants, "Comma-separated subset of baseline,temporal,temporal_spatial");
  bench_cmd->add_option("--out", common.output, "Output directory (overrides output)");
  bench_cmd->add_flag("--log-queries", common.log_queries, "Add per-purpose query breakdowns");

  auto* gen_cmd = app.add_subcommand("gen-dataset", "Write a seeded synthetic dataset and its victim");
  std::string gen_out;
  std::optional<std::string> shape;
  std::optional<int> classes, samples, ignored;
  add_common(gen_cmd, common);
  gen_cmd->add_option("--out", gen_out, "Dataset directory")->required();
  gen_cmd->add_option("--shape", shape, "T,W,H,C");
  gen_cmd->add_option("--classes", classes, "Number of classes");
  gen_cmd->add_option("--samples", samples, "Number of samples");
  gen_cmd->add_option("--ignored-frames", ignored, "Frames the victim ignores");

  auto* sal_cmd = app.add_subcommand("saliency", "Write saliency maps and the spatial mask of a video");
  std::string sal_input, sal_out;
  std::optional<double> phi;
  sal_cmd->add_option("--config", common.config_path, "Experiment config (JSON, schema 1)");
  sal_cmd->add_option("--input", sal_input, "Video (VBT1)")->required();
  sal_cmd->add_option("--phi", phi, "Fraction of pixels kept per frame (overrides attack.phi)");
  sal_cmd->add_option("--out", sal_out, "Output directory")->required();

  auto* serve_cmd = app.add_subcommand("serve-victim", "Expose the configured victim on POST /v1/classify");
  std::string host = "127.0.0.1";
  int port = 8080;
  double duration = 0;
  serve_cmd->add_option("--config", common.config_path, "Experiment config (JSON, schema 1)");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port, 0 for any free port");
  serve_cmd->add_option("--duration", duration, "Stop after this many seconds (0 = until interrupted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*attack_cmd) return run_attack(common, overrides, input, label);
    if (*bench_cmd) return run_bench(common, overrides, jobs, videos, variants);
    if (*gen_cmd) return run_gen_dataset(common, gen_out, shape, classes, samples, ignored);
    if (*sal_cmd) return run_saliency(common, sal_input, phi, sal_out);
    if (*serve_cmd) return run_serve(common, host, port, duration);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool attack_failure = e.code() == Errc::NoViableInitialization ||
                                e.code() == Errc::CleanSampleMisclassified;
    return attack_failure ? kExitAttack : kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
