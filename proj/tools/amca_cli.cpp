// amca: generate SPC data, separate it, score estimates, run sweeps.

#include "amca/amca.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::optional<double> parse_snr(const std::string& text) {
  if (text == "noiseless" || text == "inf") return std::nullopt;
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw amca::InvalidConfig("bad SNR '" + text + "'");
  return v;
}

struct GenOptions {
  amca::SpcConfig cfg;
  std::string snr = "120";
  std::string out;
};

struct SeparateOptions {
  std::string algo = "amca";
  std::string input;
  int n = 0;
  std::string frame = amca::to_string(amca::FrameSpec{});
  std::string truth;
  std::string threshold = "hard";
  std::string law = "geometric";
  amca::AlgoParams params;
  std::string out;
};

struct EvalOptions {
  std::vector<std::string> est;
  std::string truth;
  std::string out;
};

struct SweepOptions {
  std::string experiment = "coherence";
  std::string config;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  int workers = amca::default_workers();
  std::string out;
  std::string values;
  std::string field;
  std::string frame;
  std::optional<int> pmax;
  bool timing = false;
};

int cmd_gen(const GenOptions& o) {
  amca::SpcConfig cfg = o.cfg;
  cfg.snr_db = parse_snr(o.snr);
  const auto truth = amca::generate(cfg);
  amca::write_ground_truth(o.out, truth);
  amca::write_json(fs::path(o.out) / "config.json", amca::to_json(cfg));
  std::cout << "wrote " << o.out << " (n=" << cfg.n << ", m=" << cfg.m << ", T=" << cfg.T
            << ")\n";
  return 0;
}

void write_trace(const fs::path& path, const amca::SeparationResult& r, int n) {
  std::ofstream out(path);
  if (!out) throw amca::IoError("cannot open " + path.string() + " for writing");
  out << "iter,q";
  for (int j = 1; j <= n; ++j) out << ",mu_" << j;
  out << ",sdr\n";
  for (const auto& e : r.trace) {
    out << e.iteration << ',' << amca::detail::exact_double(e.q);
    for (Eigen::Index j = 0; j < e.mu.size(); ++j) out << ',' << amca::detail::exact_double(e.mu(j));
    out << ',' << amca::detail::exact_double(e.sdr) << '\n';
  }
  if (!out) throw amca::IoError("write failed: " + path.string());
}

int cmd_separate(SeparateOptions o) {
  o.params.algorithm = amca::parse_algorithm(o.algo);
  o.params.threshold_mode = amca::parse_threshold_mode(o.threshold);
  o.params.threshold_law = amca::parse_threshold_law(o.law);
  const auto frame = amca::parse_frame_spec(o.frame);
  const amca::SignalMatrix x = amca::read_matrix(fs::path(o.input));
  const int n = o.n > 0 ? o.n : static_cast<int>(x.rows());

  std::optional<amca::GroundTruth> truth;
  if (!o.truth.empty()) truth = amca::read_ground_truth(o.truth);

  const auto result = amca::run(x, n, o.params, frame, truth ? &*truth : nullptr);
  fs::create_directories(o.out);
  amca::write_matrix(fs::path(o.out) / "A_est.mat", result.a_est);
  amca::write_matrix(fs::path(o.out) / "S_est.mat", result.s_est);
  write_trace(fs::path(o.out) / "trace.csv", result, n);
  auto params = amca::to_json(o.params);
  params["frame"] = amca::to_string(frame);
  params["n"] = n;
  amca::write_json(fs::path(o.out) / "params.json", params);
  std::cout << "wrote " << o.out << " (" << amca::to_string(o.params.algorithm) << ", "
            << result.trace.size() << " iterations)\n";
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  const auto truth = amca::read_ground_truth(o.truth);
  const amca::SdrProjector projector(truth.sources, truth.noise);
  std::ofstream out(o.out);
  if (!out) throw amca::IoError("cannot open " + o.out + " for writing");
  out << "algo,mean_sdr,min_sdr,ca\n";
  for (const auto& dir : o.est) {
    std::string algo = fs::path(dir).filename().string();
    if (fs::exists(fs::path(dir) / "params.json")) {
      const auto params = amca::read_json(fs::path(dir) / "params.json");
      if (params.contains("algorithm")) algo = params.at("algorithm").get<std::string>();
    }
    const auto a_est = amca::read_matrix(fs::path(dir) / "A_est.mat");
    const auto s_est = amca::read_matrix(fs::path(dir) / "S_est.mat");
    const auto scores = amca::score_estimate(a_est, s_est, truth.mixing, projector);
    out << algo << ',' << amca::detail::exact_double(scores.mean_sdr) << ','
        << amca::detail::exact_double(scores.min_sdr) << ','
        << amca::detail::exact_double(scores.ca) << '\n';
    std::cout << algo << ": mean SDR " << scores.mean_sdr << " dB, min SDR " << scores.min_sdr
              << " dB, C_A " << scores.ca << '\n';
  }
  if (!out) throw amca::IoError("write failed: " + o.out);
  return 0;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    values.push_back(std::stod(item, &used));
    if (used != item.size()) throw amca::InvalidConfig("bad sweep value '" + item + "'");
  }
  return values;
}

int cmd_sweep(const SweepOptions& o) {
  auto spec = amca::default_experiment(amca::parse_sweep_kind(o.experiment));
  if (!o.config.empty()) spec = amca::experiment_from_json(amca::read_json(o.config), spec);
  if (o.trials) spec.trials = *o.trials;
  if (o.seed) spec.seed = *o.seed;
  if (!o.values.empty()) spec.values = parse_values(o.values);
  if (!o.field.empty()) spec.field = o.field;
  if (!o.frame.empty()) spec.frame = amca::parse_frame_spec(o.frame);
  if (o.pmax) {
    for (auto& a : spec.algorithms) a.p_max = *o.pmax;
  }
  if (o.timing) spec.record_runtime = true;
  if (!o.out.empty()) spec.out = o.out;
  if (spec.out.empty()) throw amca::InvalidConfig("no output directory (--out)");

  const auto result = amca::run_sweep(spec, o.workers);
  amca::emit_sweep(spec, result, spec.out);

  for (const auto& a : result.aggregates) {
    if (a.metric != "mean_sdr" && a.metric != "ca") continue;
    std::cout << amca::to_string(spec.kind) << '=' << a.value << ' ' << a.algo << ' ' << a.metric
              << ' ' << amca::to_string(spec.aggregate) << '=' << a.get(spec.aggregate);
    if (a.excluded > 0) std::cout << " (" << a.excluded << " failed)";
    std::cout << '\n';
  }
  for (const auto& r : result.rows) {
    if (r.failed) {
      std::cerr << "failed: value=" << r.value << " trial=" << r.trial << " algo=" << r.algo
                << ": " << r.error << '\n';
    }
  }
  std::cout << "wrote " << spec.out << '\n';
  return result.failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse blind source separation of partially correlated sources (GMCA/AMCA)"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Draw a synthetic SPC problem");
  g->add_option("--n", gen.cfg.n, "Number of sources")->capture_default_str();
  g->add_option("--m", gen.cfg.m, "Number of channels")->capture_default_str();
  g->add_option("--T", gen.cfg.T, "Samples per source")->capture_default_str();
  g->add_option("--sparsity", gen.cfg.sparsity, "Active fraction K/T")->capture_default_str();
  g->add_option("--coherence,-c", gen.cfg.coherence, "Shared fraction L/K")->capture_default_str();
  g->add_option("--tau", gen.cfg.tau, "Std of shared amplitudes")->capture_default_str();
  g->add_option("--fwhm", gen.cfg.fwhm, "Laplacian kernel FWHM")->capture_default_str();
  g->add_option("--snr", gen.snr, "SNR in dB, or 'noiseless'")->capture_default_str();
  g->add_option("--seed", gen.cfg.seed, "RNG seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  SeparateOptions sep;
  auto* s = app.add_subcommand("separate", "Estimate A and S from X");
  s->add_option("--algo", sep.algo, "amca or gmca")
      ->check(CLI::IsMember({"amca", "gmca"}))
      ->capture_default_str();
  s->add_option("--input", sep.input, "Observations X.mat")->required();
  s->add_option("--n", sep.n, "Number of sources (default: channel count)");
  s->add_option("--frame", sep.frame, "family:levels")->capture_default_str();
  s->add_option("--pmax", sep.params.p_max, "Iterations")->capture_default_str();
  s->add_option("--qstart", sep.params.q_start, "Initial q")->capture_default_str();
  s->add_option("--qfinal", sep.params.q_final, "Final q")->capture_default_str();
  s->add_option("--eps", sep.params.epsilon, "Weight regularizer")->capture_default_str();
  s->add_option("--sigma-mult", sep.params.final_sigma_mult, "Final threshold in MAD units")
      ->capture_default_str();
  s->add_option("--threshold", sep.threshold, "hard or soft")
      ->check(CLI::IsMember({"hard", "soft"}))
      ->capture_default_str();
  s->add_option("--law", sep.law, "Threshold decrease: geometric or linear")
      ->check(CLI::IsMember({"geometric", "linear"}))
      ->capture_default_str();
  s->add_flag("--weight-square", sep.params.weight_square, "Use diag(w*w) in the mixing update");
  s->add_flag("--fit-coarse", sep.params.fit_coarse, "Include the coarse band in the fit");
  s->add_flag("--early-stop", sep.params.early_stop, "Stop once A stops moving");
  s->add_option("--seed", sep.params.init_seed, "Seed for the initial mixing matrix")
      ->capture_default_str();
  s->add_option("--truth", sep.truth, "Ground-truth directory; fills the sdr trace column");
  s->add_option("--out", sep.out, "Output directory")->required();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score estimates against the truth");
  e->add_option("--est", ev.est, "Result directory (repeatable)")->required();
  e->add_option("--truth", ev.truth, "Ground-truth directory")->required();
  e->add_option("--out", ev.out, "Scores CSV")->required();

  SweepOptions sw;
  auto* w = app.add_subcommand("sweep", "Monte-Carlo parameter sweep");
  w->add_option("--experiment", sw.experiment, "coherence|dynamic-range|nsources|noise|custom")
      ->check(CLI::IsMember({"coherence", "dynamic-range", "nsources", "noise", "custom"}))
      ->capture_default_str();
  w->add_option("--config", sw.config, "JSON experiment file");
  w->add_option("--trials", sw.trials, "Trials per value");
  w->add_option("--seed", sw.seed, "Base seed");
  w->add_option("--workers", sw.workers, "Worker threads (default: $AMCA_WORKERS or cores)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  w->add_option("--values", sw.values, "Comma-separated sweep values");
  w->add_option("--field", sw.field, "Field swept by a custom experiment");
  w->add_option("--frame", sw.frame, "family:levels");
  w->add_option("--pmax", sw.pmax, "Iterations for every algorithm");
  w->add_flag("--timing", sw.timing, "Record wall-clock runtime (output no longer reproducible)");
  w->add_option("--out", sw.out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return cmd_gen(gen);
    if (*s) return cmd_separate(sep);
    if (*e) return cmd_eval(ev);
    if (*w) return cmd_sweep(sw);
  } catch (const amca::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
