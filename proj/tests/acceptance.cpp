// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "mourrelab/experiment.hpp"
#include "mourrelab/mourre.hpp"
#include "mourrelab/spectral.hpp"

using namespace mourrelab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& what) {
  fmt::print("{} {} {}\n", pass ? "PASS" : "FAIL", id, what);
  std::fflush(stdout);
  if (!pass) ++failures;
}

// Criterion 1: interior commutator identity, 100 random interior vectors per box.
void commutator_identity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (auto [dim, L] : {std::pair{1, 3}, {1, 60}, {2, 3}, {2, 12}, {3, 3}, {3, 6}})
    worst = std::max(worst, interior_identity_error(LatticeBox(dim, L), 100, 1000 + dim));
  const double t = seconds_since(t0);
  report(1, worst <= 1e-12 && t < 10.0,
         fmt::format("commutator identity: max |([A,Delta] + sum (T-T^-1)^2) u| = {:.3g} (tol 1e-12), {:.2f} s (< 10 s)",
                     worst, t));
}

// Criterion 2: Fourier symbol on periodic boxes, nu <= 3, L <= 8.
void fourier_symbol() {
  double worst_modes = 0.0, worst_dense = 0.0;
  int dense_boxes = 0;
  for (int dim = 1; dim <= 3; ++dim)
    for (int L = 1; L <= 8; ++L) {
      LatticeBox box(dim, L, Boundary::Periodic);
      worst_modes = std::max(worst_modes, fourier_mode_residual(box));
      if (box.size() > 1500) continue;
      ++dense_boxes;
      const auto ev = eigendecompose(build_commutator_symbol(box)).eigenvalues;
      std::vector<double> closed;
      for (std::size_t i = 0; i < box.size(); ++i) {
        double s = 0.0;
        for (int a = 1; a <= dim; ++a) {
          const double th = 2.0 * std::numbers::pi * (box.coordinate(i, a) + L) / box.side();
          s += 4.0 * std::sin(th) * std::sin(th);
        }
        closed.push_back(s);
      }
      std::sort(closed.begin(), closed.end());
      for (std::size_t i = 0; i < closed.size(); ++i)
        worst_dense = std::max(worst_dense, std::abs(ev[static_cast<Eigen::Index>(i)] - closed[i]));
    }
  report(2, worst_modes <= 1e-10 && worst_dense <= 1e-10,
         fmt::format("Fourier symbol: mode residual {:.3g}, dense eigenvalue error {:.3g} on {} boxes (tol 1e-10)",
                     worst_modes, worst_dense, dense_boxes));
}

// Criterion 3: torus lemma.
void torus_lemma() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  for (double delta : {0.25, 0.5, 0.75}) {
    const auto r = torus_scan(3, delta, 256);
    const double bound = 3.0 * delta * (1.0 - 2.0 * std::numbers::pi * 3 / 256);
    ok = ok && r.min_value >= bound;
    detail += fmt::format("d={}: {:.4f}>={:.4f}; ", delta, r.min_value, bound);
  }
  const auto even = torus_scan(2, 0.5, 256);
  const double cell = 2.0 * std::numbers::pi / 256;
  const bool near = std::abs(even.argmin[0]) <= 2 * cell && std::abs(even.argmin[1] - std::numbers::pi) <= 2 * cell;
  ok = ok && even.min_value < 0.05 && near;
  const double t = seconds_since(t0);
  report(3, ok && t < 60.0,
         fmt::format("torus lemma: nu=3 {}nu=2 min {:.3g} at ({:.4f}, {:.4f}); {:.2f} s (< 60 s)", detail,
                     even.min_value, even.argmin[0], even.argmin[1], t));
}

// Criterion 4: linear bound on psi(H) - psi(Delta).
void lemma1() {
  const auto psi = build_cutoff(-0.5, 0.5);
  const auto mu = CouplingDistribution::uniform(-1.0, 1.0);
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const std::vector<double> lambdas{1e-3, 1e-2, 1e-1};
  const auto spec = build_support(48, 2, 1, BumpProfile(0.5));
  const Lemma1Table one = lemma1_check(bump_disorder(spec, mu, LatticeBox(1, 200)), lambdas, psi, seeds);
  const Lemma1Table three = lemma1_check(stationary_disorder(mu, LatticeBox(3, 4)), lambdas, psi, seeds);
  double worst = 0.0;
  for (const auto* t : {&one, &three})
    for (const auto& r : t->rows) worst = std::max(worst, r.ratio);
  const double c = psi.fourier_constant(mu.e_infty());
  const double s1 = one.linearity_spread(1e-3, 1e-2), s3 = three.linearity_spread(1e-3, 1e-2);
  report(4, one.all_ok() && three.all_ok() && s1 <= 0.2 && s3 <= 0.2,
         fmt::format("psi(H) - psi(Delta) bound: max ratio {:.4f} <= C = {:.4f}; ratio spread 1e-3 vs 1e-2: nu=1 {:.2e}, nu=3 {:.2e} "
                     "(<= 0.2)",
                     worst, c, s1, s3));
}

// Criterion 5: Mourre estimate and threshold scan.
void mourre() {
  const auto mu = CouplingDistribution::uniform(-1.0, 1.0);
  const auto spec = build_support(24, 2, 1, BumpProfile(0.5));
  const auto psi = build_cutoff(-0.5, 0.5);
  std::vector<double> grid;
  for (int k = 0; k <= 5; ++k) grid.push_back(0.01 * k / mu.e_infty());
  const auto rep = lambda_threshold_scan(bump_disorder(spec, mu, LatticeBox(1, 100)), psi, grid, {1, 2, 3, 4, 5},
                                         BulkFilter{});
  double m0 = INFINITY, worst = INFINITY;
  for (const auto& r : rep.rows) {
    if (r.degenerate) {
      worst = -INFINITY;
      continue;
    }
    if (r.lambda == 0.0) m0 = std::min(m0, r.m);
    worst = std::min(worst, r.margin_2delta());
  }
  const double th = rep.lambda_threshold.value_or(0.0);
  report(5, m0 >= 3.0 * rep.delta - 0.1 && worst >= 0.0 && th > 0.0,
         fmt::format("Mourre: m(lambda=0) = {:.4f} >= {:.2f}; min m - 2 delta over lambda <= 0.05 = {:.4f} >= 0; "
                     "lambda_I = {}",
                     m0, 3.0 * rep.delta - 0.1, worst, th));
}

// Criterion 6: hypothesis checker on M = 64, K = 3, rho = 1/2.
void hypothesis() {
  const auto spec = build_support(64, 3, 1, BumpProfile(0.5));
  const auto rep = check_hypothesis(spec, LatticeBox(1, spec.required_half_side()));
  double worst_ratio = 0.0;
  for (const auto& b : rep.bumps) worst_ratio = std::max(worst_ratio, b.double_commutator_norm / b.double_commutator_bound);
  report(6,
         rep.disjoint && rep.all_bounded() && rep.all_plateau() && rep.commutator_uniformity <= 4.0 &&
             rep.all_double_commutator_ok(),
         fmt::format("hypothesis: disjoint {}, bounded {}, plateau {}, uniformity {:.4f} (<= 4), "
                     "max ||[A,[A,phi]]|| / bound = {:.4f}",
                     rep.disjoint, rep.all_bounded(), rep.all_plateau(), rep.commutator_uniformity, worst_ratio));
}

// Criterion 7: Weyl witnesses.
void weyl() {
  const auto c = validate(R"({"experiment": "weyl", "dim": 1, "L": 100, "M": 50, "K": 1, "plateau_radius": 0.97,
      "distribution": {"kind": "atomic", "points": [0, 1], "weights": [0.5, 0.5]},
      "lambda": 0.5, "energies": [-1.5, 0, 1.5], "ell": 100})");
  const auto r = execute(c);
  // Columns: ..., j (8), free_residual (9), residual (10).
  bool triangle = true;
  double worst_final = 0.0;
  int jmax = 0;
  for (const auto& row : r.table.rows) jmax = std::max<int>(jmax, static_cast<int>(std::get<std::int64_t>(row[8])));
  for (const auto& row : r.table.rows) {
    const double free = std::get<double>(row[9]), res = std::get<double>(row[10]);
    triangle = triangle && res <= free + c.lambda / c.ell;
    if (std::get<std::int64_t>(row[8]) == jmax) worst_final = std::max(worst_final, res);
  }
  report(7, triangle && worst_final <= 0.15,
         fmt::format("Weyl: residual <= ||(Delta-E)f|| + lambda/ell on {} rows: {}; max residual at j = {}: {:.4f} "
                     "(<= 0.15)",
                     r.table.rows.size(), triangle, jmax, worst_final));
}

// Criterion 8: spectrum containment on 20 random (lambda, seed) pairs.
void containment() {
  const auto mu = CouplingDistribution::uniform(-1.0, 1.0);
  auto gen = keyed_engine(20261016, 8);
  int contained = 0;
  double worst_excess = -INFINITY;
  for (int i = 0; i < 20; ++i) {
    const int nu = 1 + i % 2;
    const double lambda = 1.0 - uniform01(gen);  // (0, 1]
    const std::uint64_t seed = gen();
    const auto spec = nu == 1 ? build_support(24, 2, 1, BumpProfile(0.5)) : build_support(4, 2, 2, BumpProfile(0.5));
    LatticeBox box(nu, spec.required_half_side());
    const auto real = sample_realization(spec, mu, lambda, seed, box);
    const auto ev = eigendecompose(real.hamiltonian).eigenvalues;
    const auto band = predict_essential_spectrum(nu, 0.0, mu);
    bool ok = true;
    for (Eigen::Index k = 0; k < ev.size(); ++k) ok = ok && band.contains(ev[k], lambda * mu.e_infty());
    const double edge = 2.0 * nu + lambda * mu.e_infty();
    worst_excess = std::max(worst_excess, std::max(ev.maxCoeff() - edge, -edge - ev.minCoeff()));
    contained += ok;
  }
  report(8, contained == 20,
         fmt::format("spectrum containment: {}/20 pairs inside [-2nu, 2nu] fattened by lambda E_inf; max distance past "
                     "the edge {:.4f} (<= 0)",
                     contained, worst_excess));
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Criterion 9: determinism of every experiment's data files, plus total wall time.
void determinism(Clock::time_point start) {
  const std::vector<std::string> configs = {
      R"({"experiment": "torus-lemma", "dim": 3, "grid": 128})",
      R"({"experiment": "commutator-identity", "dim": 2, "L": 5})",
      R"({"experiment": "hypothesis-check", "dim": 2, "M": 8, "K": 2})",
      R"({"experiment": "lemma1", "dim": 1, "M": 8, "K": 2, "seeds": [1, 2]})",
      R"({"experiment": "mourre", "dim": 1, "M": 24, "K": 2, "seeds": [4, 2], "lambda": 0.03})",
      R"({"experiment": "lambda-scan", "dim": 1, "M": 24, "K": 2, "lambda_grid": [0, 0.05]})",
      R"({"experiment": "weyl", "dim": 1, "L": 100, "M": 50, "K": 1, "plateau_radius": 0.97,
          "distribution": {"kind": "atomic", "points": [0, 1], "weights": [0.5, 0.5]}, "lambda": 0.5})",
      R"({"experiment": "spectrum", "dim": 2, "M": 4, "K": 2, "lambda_grid": [0.2, 0.7], "seeds": [1, 2, 3]})",
      R"({"experiment": "dos", "dim": 1, "L": 60, "potential": "stationary", "lambda": 0.4, "format": "json"})",
  };
  const std::filesystem::path dir = "acceptance-runs";
  std::filesystem::create_directories(dir);
  int identical = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::size_t hashes[2];
    for (int rep = 0; rep < 2; ++rep) {
      auto c = validate(configs[i]);
      c.output_path = (dir / fmt::format("{}-{}.out", to_string(c.experiment), rep)).string();
      const RunManifest m = run(c);
      std::string bytes;
      for (const auto& f : m.data_files) bytes += slurp(f);
      hashes[rep] = std::hash<std::string>{}(bytes);
    }
    identical += hashes[0] == hashes[1];
  }
  const double t = seconds_since(start);
  report(9, identical == static_cast<int>(configs.size()) && t < 600.0,
         fmt::format("determinism: {}/{} experiments hash-identical across reruns; acceptance wall time {:.1f} s "
                     "(< 600 s)",
                     identical, configs.size(), t));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const std::vector<std::function<void()>> criteria = {commutator_identity, fourier_symbol, torus_lemma, lemma1,
                                                       mourre,              hypothesis,     weyl,        containment};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, fmt::format("threw: {}", e.what()));
    }
  }
  try {
    determinism(start);
  } catch (const std::exception& e) {
    report(9, false, fmt::format("threw: {}", e.what()));
  }
  fmt::print("{} of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
