// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "amca/amca.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

using namespace amca;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

Outcome frame_correctness() {
  Rng rng(1);
  const Eigen::Index lengths[] = {256, 1024, 4096};
  double worst_rec = 0.0, worst_energy = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = lengths[i % 3];
    const FrameSpec spec{i % 2 ? FilterFamily::daubechies4 : FilterFamily::haar,
                         1 + static_cast<int>(rng.uniform_index(6))};
    Vector x(n);
    for (Eigen::Index t = 0; t < n; ++t) x(t) = rng.normal();
    const Vector c = analyze(x, spec);
    worst_rec = std::max(worst_rec, (synthesize(c, spec) - x).cwiseAbs().maxCoeff() /
                                        x.cwiseAbs().maxCoeff());
    worst_energy = std::max(worst_energy,
                            std::abs(c.squaredNorm() - x.squaredNorm()) / x.squaredNorm());
  }
  return {worst_rec < 1e-10 && worst_energy < 1e-9,
          fmt("max reconstruction %.2e (rel), energy %.2e (rel)", worst_rec, worst_energy)};
}

double weighted_objective(const Matrix& x, const Matrix& a, const Matrix& s, const Vector& w) {
  const Matrix r = x - a * s;
  return (r * w.asDiagonal() * r.transpose()).trace();
}

Outcome weighted_ls_optimality() {
  Rng rng(2);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform_index(9));
    const Eigen::Index m = n + static_cast<Eigen::Index>(rng.uniform_index(3));
    const Eigen::Index t = 32 + static_cast<Eigen::Index>(rng.uniform_index(225));
    const Matrix x = random_matrix(m, t, rng);
    const Matrix s = random_matrix(n, t, rng);
    Vector w(t);
    for (Eigen::Index k = 0; k < t; ++k) w(k) = 0.01 + rng.uniform();
    const Matrix a = update_mixing(x, s, w);
    const double h = 1e-6;
    double g_max = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        Matrix ap = a, am = a;
        ap(r, c) += h;
        am(r, c) -= h;
        g_max = std::max(g_max, std::abs(weighted_objective(x, ap, s, w) -
                                         weighted_objective(x, am, s, w)) /
                                    (2 * h));
      }
    }
    worst = std::max(worst, g_max / x.norm());
  }
  return {worst < 1e-6, fmt("max |grad| / |X|_F = %.2e", worst)};
}

Outcome metric_oracles() {
  Rng rng(3);
  bool match_ok = true;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 2 + i % 5;
    const Matrix est = random_matrix(n + 1, n, rng);
    const Matrix truth = random_matrix(n + 1, n, rng);
    const Matrix product = pinv(est) * truth;
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1.0;
    do {
      double v = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) v += std::abs(product(perm[static_cast<std::size_t>(j)], j));
      best = std::max(best, v);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const auto m = match_and_scale(est, truth);
    double got = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) got += std::abs(product(m.permutation[static_cast<std::size_t>(j)], j));
    match_ok = match_ok && std::abs(got - best) <= 1e-12 * best;
  }

  double worst_invariance = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index n = 2 + i % 5;
    const Matrix truth = random_matrix(n + 2, n, rng);
    const Matrix est = truth + 0.1 * random_matrix(n + 2, n, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    p.setIdentity();
    for (Eigen::Index k = n - 1; k > 0; --k) {
      std::swap(p.indices()(k), p.indices()(static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(k + 1)))));
    }
    Vector d(n);
    for (Eigen::Index k = 0; k < n; ++k) d(k) = (rng.uniform() < 0.5 ? -1 : 1) * (0.1 + 5 * rng.uniform());
    worst_invariance = std::max(worst_invariance, std::abs(mixing_criterion(est * p * d.asDiagonal(), truth) -
                                                           mixing_criterion(est, truth)));
  }

  double worst_energy = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Matrix s = random_matrix(4, 256, rng);
    const Matrix z = 0.1 * random_matrix(4, 256, rng);
    const Vector est = s.row(i % 4).transpose() + 0.3 * random_matrix(256, 1, rng).col(0);
    const auto dec = sdr(est, s, z, i % 4);
    const double total = dec.e_target + dec.e_interf + dec.e_noise + dec.e_artefacts;
    worst_energy = std::max(worst_energy, std::abs(total - est.squaredNorm()) / est.squaredNorm());
  }
  return {match_ok && worst_invariance < 1e-10 && worst_energy < 1e-9,
          std::string("matching ") + (match_ok ? "agrees" : "DISAGREES") +
              fmt(", C_A invariance %.2e, energy sum %.2e (rel)", worst_invariance, worst_energy)};
}

struct Medians {
  double gmca_sdr, amca_sdr, gmca_ca, amca_ca;
  int failed;
};

Medians sweep_point(SpcConfig base, const std::string& field, double value) {
  ExperimentSpec spec;
  spec.kind = SweepKind::custom;
  spec.field = field;
  spec.values = {value};
  spec.trials = 10;
  spec.base = base;
  spec.algorithms = default_algorithms();
  spec.seed = 2024;
  const auto res = run_sweep(spec);
  auto find = [&](const std::string& algo, const std::string& metric) {
    for (const auto& a : res.aggregates) {
      if (a.algo == algo && a.metric == metric) return a.median;
    }
    return std::numeric_limits<double>::quiet_NaN();
  };
  return {find("gmca", "mean_sdr"), find("amca", "mean_sdr"), find("gmca", "ca"),
          find("amca", "ca"), res.failed};
}

std::string describe(const Medians& m) {
  return fmt("median SDR gmca %.1f amca %.1f dB, median C_A gmca %.3g amca %.3g", m.gmca_sdr,
             m.amca_sdr, m.gmca_ca, m.amca_ca) +
         (m.failed ? ", " + std::to_string(m.failed) + " failed trials" : "");
}

SpcConfig paper_base() {
  SpcConfig c;
  c.n = c.m = 10;
  c.T = 4096;
  c.tau = 4.0;
  c.snr_db = 120.0;
  return c;
}

Outcome independent_sources() {
  const auto m = sweep_point(paper_base(), "coherence", 0.0);
  const bool pass = m.gmca_ca < 5e-2 && m.amca_ca < 5e-2 && m.gmca_sdr > 30 && m.amca_sdr > 30;
  return {pass, "c = 0: " + describe(m)};
}

Outcome coherence_robustness() {
  const auto m = sweep_point(paper_base(), "coherence", 0.5);
  const bool pass = m.amca_sdr >= 40 && m.amca_sdr >= m.gmca_sdr + 20 && m.amca_ca * 10 <= m.gmca_ca;
  return {pass, "c = 0.5: " + describe(m)};
}

Outcome dynamic_range_robustness() {
  SpcConfig base = paper_base();
  base.coherence = 0.2;
  const auto m = sweep_point(base, "tau", 32.0);
  const bool pass = m.amca_sdr >= 40 && m.gmca_sdr <= m.amca_sdr - 20;
  return {pass, "tau = 32: " + describe(m)};
}

Outcome full_correlation() {
  const auto m = sweep_point(paper_base(), "coherence", 1.0);
  const double ratio = m.amca_ca / m.gmca_ca;
  const bool pass = ratio >= 1.0 / 3.0 && ratio <= 3.0;
  return {pass, "c = 1: " + describe(m) + fmt(", ratio %.2f", ratio)};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  ExperimentSpec spec = default_experiment(SweepKind::coherence);
  spec.values = {0.0, 0.3, 0.6};
  spec.trials = 3;
  spec.base.n = spec.base.m = 4;
  spec.base.T = 1024;
  spec.seed = 99;
  const auto dir = fs::temp_directory_path() / "amca_acceptance_determinism";
  fs::remove_all(dir);
  emit_csv(run_sweep(spec, 1).rows, dir / "w1a.csv");
  emit_csv(run_sweep(spec, 1).rows, dir / "w1b.csv");
  emit_csv(run_sweep(spec, 8).rows, dir / "w8.csv");
  const auto a = file_bytes(dir / "w1a.csv");
  const bool pass = !a.empty() && a == file_bytes(dir / "w1b.csv") && a == file_bytes(dir / "w8.csv");
  fs::remove_all(dir);
  return {pass, std::to_string(a.size()) + " bytes, workers 1, 1, 8"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"frame correctness", frame_correctness},
      {"weighted least-squares optimality", weighted_ls_optimality},
      {"metric oracles", metric_oracles},
      {"independent-source recovery", independent_sources},
      {"coherence robustness", coherence_robustness},
      {"dynamic-range robustness", dynamic_range_robustness},
      {"full-correlation degradation", full_correlation},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %zu %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
