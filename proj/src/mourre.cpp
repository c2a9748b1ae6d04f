#include "mourrelab/mourre.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include <fftw3.h>
#include <fmt/format.h>

#include "mourrelab/errors.hpp"
#include "mourrelab/parallel.hpp"

namespace mourrelab {

using std::numbers::pi;

// ---------------------------------------------------------------------------
// Cutoff

CutoffFunction::CutoffFunction(double a, double b) : a_(a), b_(b) {
  if (!(-2.0 < a && a < b && b < 2.0))
    throw ArgumentError(fmt::format("interval [{}, {}] must satisfy -2 < a < b < 2 (outside (-2,2))", a, b));
  delta_ = std::min(1.0 + a / 2.0, 1.0 - b / 2.0);
  flank_ = 0.5 * std::min(a - (-2.0 + delta_), (2.0 - delta_) - b);
}

double CutoffFunction::operator()(double x) const {
  if (x >= a_ && x <= b_) return 1.0;
  if (x < a_) return smoothstep_falloff((a_ - x) / flank_);
  return smoothstep_falloff((x - b_) / flank_);
}

double fourier_moment_on_grid(const std::function<double(double)>& psi, double half_width, int points) {
  if (points < 16 || points % 2 != 0) throw ArgumentError("fourier moment: need an even number of points >= 16");
  const double h = 2.0 * half_width / points;
  std::vector<double> samples(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) samples[static_cast<std::size_t>(k)] = psi(-half_width + k * h);

  const int bins = points / 2 + 1;
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(bins));
  fftw_plan plan = fftw_plan_dft_r2c_1d(points, samples.data(), reinterpret_cast<fftw_complex*>(spectrum.data()),
                                        FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  // |psi_hat(t_m)| = h / (2 pi) |sum_k psi_k e^{-2 pi i m k / n}|, t_m = 2 pi m / (n h).
  // The integrand |t||psi_hat| is even in t: integrate over t >= 0 and double.
  const double dt = 2.0 * pi / (points * h);
  double sum = 0.0;
  for (int m = 0; m < bins; ++m) {
    const double t = m * dt;
    const double weight = (m == 0 || m == bins - 1) ? 0.5 : 1.0;
    sum += weight * t * (h / (2.0 * pi)) * std::abs(spectrum[static_cast<std::size_t>(m)]);
  }
  return 2.0 * sum * dt;
}

CutoffFunction build_cutoff(double a, double b, const FourierQuadrature& quadrature) {
  CutoffFunction psi(a, b);
  const auto f = [&psi](double x) { return psi(x); };
  double half_width = quadrature.base_half_width;
  int points = quadrature.base_points;
  psi.moment_history_.push_back(fourier_moment_on_grid(f, half_width, points));
  for (int level = 0; level < quadrature.max_refinements; ++level) {
    half_width *= 2.0;
    points *= 2;
    const double next = fourier_moment_on_grid(f, half_width, points);
    const double prev = psi.moment_history_.back();
    psi.moment_history_.push_back(next);
    if (std::abs(next - prev) <= quadrature.rel_tol * std::abs(next)) {
      psi.fourier_moment_ = next;
      return psi;
    }
  }
  throw NumericError(fmt::format("Fourier moment of the cutoff did not converge (last {})", psi.moment_history_.back()),
                     psi.moment_history_.back(), Eigen::VectorXd());
}

// ---------------------------------------------------------------------------
// Functional calculus

DenseOperator apply_function(const EigenSystem& eigen, const std::function<double(double)>& f) {
  const Eigen::Index n = eigen.eigenvalues.size();
  Eigen::VectorXd fv(n);
  for (Eigen::Index i = 0; i < n; ++i) fv[i] = f(eigen.eigenvalues[i]);
  Eigen::MatrixXd scaled = eigen.eigenvectors * fv.asDiagonal();
  return {eigen.box, scaled * eigen.eigenvectors.transpose()};
}

DenseOperator apply_function(const EigenSystem& eigen, const CutoffFunction& psi) {
  return apply_function(eigen, [&psi](double x) { return psi(x); });
}

// ---------------------------------------------------------------------------
// Linear bound on psi(H) - psi(Delta)

DisorderSource bump_disorder(const PotentialSpec& spec, const CouplingDistribution& mu, const LatticeBox& box) {
  if (box.half_side() < spec.required_half_side())
    throw CapacityError(fmt::format("box half side {} cannot contain annulus K={} (needs {})", box.half_side(),
                                    spec.annulus_count, spec.required_half_side()));
  return {box, mu.e_infty(), [spec, mu, box](std::uint64_t seed) {
            return sample_realization(spec, mu, 0.0, seed, box).potential;
          }};
}

DisorderSource stationary_disorder(const CouplingDistribution& mu, const LatticeBox& box) {
  return {box, mu.e_infty(), [mu, box](std::uint64_t seed) { return stationary_potential(box, mu, seed); }};
}

bool Lemma1Table::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok; });
}

double Lemma1Table::linearity_spread(double lambda1, double lambda2) const {
  double worst = 0.0;
  for (const auto& r1 : rows) {
    if (r1.lambda != lambda1) continue;
    for (const auto& r2 : rows) {
      if (r2.lambda != lambda2 || r2.seed != r1.seed) continue;
      const double scale = std::max(r1.ratio, r2.ratio);
      if (scale > 0.0) worst = std::max(worst, std::abs(r1.ratio - r2.ratio) / scale);
    }
  }
  return worst;
}

Lemma1Table lemma1_check(const DisorderSource& source, const std::vector<double>& lambdas, const CutoffFunction& psi,
                         const std::vector<std::uint64_t>& seeds, std::size_t dense_cap) {
  const LatticeBox& box = source.box;
  const LatticeOperator laplacian = build_laplacian(box);
  const Eigen::MatrixXd psi_free = apply_function(eigendecompose(laplacian, dense_cap), psi).matrix;
  const double bound = psi.fourier_constant(source.e_infty);

  Lemma1Table table;
  table.nu = box.dim();
  table.side = box.side();
  table.a = psi.a();
  table.b = psi.b();
  table.rows.resize(seeds.size() * lambdas.size());
  parallel_for(seeds.size(), [&](std::size_t s) {
    const LatticeOperator v = source.potential(seeds[s]);
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      const double lambda = lambdas[l];
      if (lambda < 0.0) throw ArgumentError("lemma1_check: lambda must be non-negative");
      Lemma1Row row;
      row.lambda = lambda;
      row.seed = seeds[s];
      row.bound = bound;
      if (lambda > 0.0) {
        const EigenSystem eig = eigendecompose(laplacian + lambda * v, dense_cap);
        row.difference_norm = symmetric_norm(apply_function(eig, psi).matrix - psi_free);
        row.ratio = row.difference_norm / lambda;
      }
      row.ok = row.difference_norm <= bound * lambda + 1e-12;
      table.rows[l * seeds.size() + s] = row;
    }
  });
  return table;
}

// ---------------------------------------------------------------------------
// Torus scan

namespace {

// Calls visit(index_tuple) for every point of Z_grid^nu, axis 1 outermost.
template <typename Visit>
void for_each_grid_point(int nu, int grid, Visit&& visit) {
  std::vector<int> idx(static_cast<std::size_t>(nu), 0);
  while (true) {
    visit(idx);
    int ax = nu - 1;
    while (ax >= 0 && ++idx[static_cast<std::size_t>(ax)] == grid) {
      idx[static_cast<std::size_t>(ax)] = 0;
      --ax;
    }
    if (ax < 0) return;
  }
}

}  // namespace

TorusScanResult torus_scan(int nu, double delta, int grid) {
  if (nu > 3) throw CapacityError(fmt::format("torus scan is exhaustive and limited to nu <= 3, got {}", nu));
  if (nu < 1) throw ArgumentError("torus scan: nu must be positive");
  if (grid < 64) throw ArgumentError(fmt::format("torus scan needs >= 64 grid points per axis, got {}", grid));
  if (!(delta > 0.0 && delta <= 1.0)) throw ArgumentError(fmt::format("delta must lie in (0, 1], got {}", delta));

  std::vector<double> cosine(static_cast<std::size_t>(grid)), sine_sq(static_cast<std::size_t>(grid));
  for (int m = 0; m < grid; ++m) {
    const double theta = 2.0 * pi * m / grid;
    cosine[static_cast<std::size_t>(m)] = std::cos(theta);
    const double s = std::sin(theta);
    sine_sq[static_cast<std::size_t>(m)] = s * s;
  }

  TorusScanResult out;
  out.nu = nu;
  out.delta = delta;
  out.grid = grid;
  out.bound_3delta = 3.0 * delta;
  out.slack = 2.0 * pi * nu / grid;
  out.min_value = std::numeric_limits<double>::infinity();
  const double limit = 1.0 - delta / 2.0;
  std::vector<int> best;
  for_each_grid_point(nu, grid, [&](const std::vector<int>& idx) {
    double c = 0.0, s = 0.0;
    for (int m : idx) {
      c += cosine[static_cast<std::size_t>(m)];
      s += sine_sq[static_cast<std::size_t>(m)];
    }
    if (std::abs(c) >= limit) return;
    ++out.points_in_w;
    if (4.0 * s < out.min_value) {
      out.min_value = 4.0 * s;
      best = idx;
    }
  });
  for (int m : best) out.argmin.push_back(2.0 * pi * m / grid);
  out.pass = out.min_value >= out.bound_3delta * (1.0 - out.slack);
  return out;
}

std::optional<double> symbol_minimum_on_momenta(int nu, int grid, double a, double b) {
  std::optional<double> best;
  for_each_grid_point(nu, grid, [&](const std::vector<int>& idx) {
    double c = 0.0, s = 0.0;
    for (int m : idx) {
      const double theta = 2.0 * pi * m / grid;
      c += std::cos(theta);
      s += std::sin(theta) * std::sin(theta);
    }
    if (2.0 * c < a || 2.0 * c > b) return;
    if (!best || 4.0 * s < *best) best = 4.0 * s;
  });
  return best;
}

// ---------------------------------------------------------------------------
// Mourre estimate

MourreRow mourre_check_commutator(const EigenSystem& eigen, const LatticeOperator& comm, double a, double b,
                                  double delta, const BulkFilter& filter) {
  MourreRow row;
  row.a = a;
  row.b = b;
  row.delta = delta;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < eigen.eigenvalues.size(); ++i)
    if (eigen.eigenvalues[i] >= a && eigen.eigenvalues[i] <= b) cols.push_back(i);
  row.rank = cols.size();
  if (cols.empty()) {
    row.degenerate = true;
    row.m = row.m_unfiltered = std::numeric_limits<double>::quiet_NaN();
    return row;
  }
  Eigen::MatrixXd p(eigen.eigenvectors.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) p.col(static_cast<Eigen::Index>(j)) = eigen.eigenvectors.col(cols[j]);

  const Eigen::MatrixXd cp = comm.entries() * p;
  Eigen::MatrixXd compressed = p.transpose() * cp;
  compressed = 0.5 * (compressed + compressed.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(compressed);
  row.ritz_values = es.eigenvalues();
  row.m_unfiltered = row.ritz_values.minCoeff();

  const Eigen::MatrixXd ritz = p * es.eigenvectors();
  row.collar_mass = Eigen::VectorXd::Zero(ritz.cols());
  const LatticeBox& box = eigen.box;
  row.filtered = filter.collar_width > 0;
  if (row.filtered)
    for (std::size_t s = 0; s < box.size(); ++s)
      if (box.distance_to_boundary(s) < filter.collar_width)
        row.collar_mass += ritz.row(static_cast<Eigen::Index>(s)).cwiseAbs2().transpose();

  row.m = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < ritz.cols(); ++k) {
    if (row.filtered && row.collar_mass[k] > filter.mass_cutoff) continue;
    ++row.filtered_rank;
    row.m = std::min(row.m, row.ritz_values[k]);
  }
  if (row.filtered_rank == 0) {
    row.degenerate = true;
    row.m = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

MourreRow mourre_check(const LatticeOperator& h, const EigenSystem& eigen, const LatticeOperator& a_op,
                       const CutoffFunction& psi, const BulkFilter& filter) {
  if (h.box().boundary() != Boundary::Dirichlet) throw ArgumentError("mourre_check: Dirichlet box required");
  if (h.symmetry() != Symmetry::Symmetric) throw ArgumentError("mourre_check: H must be symmetric");
  if (a_op.symmetry() != Symmetry::Antisymmetric) throw ArgumentError("mourre_check: A must be antisymmetric");
  return mourre_check_commutator(eigen, commutator(a_op, h), psi.a(), psi.b(), psi.delta(), filter);
}

MourreReport lambda_threshold_scan(const DisorderSource& source, const CutoffFunction& psi,
                                   const std::vector<double>& lambda_grid, const std::vector<std::uint64_t>& seeds,
                                   const BulkFilter& filter, std::size_t dense_cap) {
  if (lambda_grid.empty() || seeds.empty()) throw ArgumentError("lambda scan: empty lambda grid or seed list");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (lambda_grid[i] < 0.0) throw ArgumentError("lambda scan: lambda must be non-negative");
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) throw ArgumentError("lambda scan: grid must be ascending");
    if (lambda_grid[i] * source.e_infty >= 1.0)
      throw ArgumentError(fmt::format("lambda scan: lambda * E_infty = {} violates lambda_I E_infty < 1",
                                      lambda_grid[i] * source.e_infty));
  }
  const LatticeBox& box = source.box;
  const LatticeOperator laplacian = build_laplacian(box);
  const LatticeOperator a_op = build_conjugate_operator(box);

  MourreReport report;
  report.a = psi.a();
  report.b = psi.b();
  report.delta = psi.delta();
  report.filter = filter;
  report.lambda_values = lambda_grid;
  report.rows.resize(lambda_grid.size() * seeds.size());

  std::vector<double> potential_commutator(seeds.size(), 0.0);
  parallel_for(seeds.size(), [&](std::size_t s) {
    const LatticeOperator v = source.potential(seeds[s]);
    potential_commutator[s] = operator_norm(commutator(a_op, v), 1e-10);
    for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
      const LatticeOperator h = laplacian + lambda_grid[l] * v;
      MourreRow row = mourre_check(h, eigendecompose(h, dense_cap), a_op, psi, filter);
      row.lambda = lambda_grid[l];
      row.seed = seeds[s];
      report.rows[l * seeds.size() + s] = std::move(row);
    }
  });
  std::sort(report.rows.begin(), report.rows.end(),
            [](const MourreRow& x, const MourreRow& y) { return std::tie(x.lambda, x.seed) < std::tie(y.lambda, y.seed); });

  double running = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < lambda_grid.size(); ++l) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const MourreRow& row = report.rows[l * seeds.size() + s];
      // A degenerate row cannot certify the estimate.
      worst = std::min(worst, row.degenerate ? -std::numeric_limits<double>::infinity() : row.margin_2delta());
    }
    report.worst_margin_2delta.push_back(worst);
    running = std::min(running, worst);
    report.envelope.push_back(running);
    if (running >= 0.0) report.lambda_threshold = lambda_grid[l];
  }
  report.max_potential_commutator = *std::max_element(potential_commutator.begin(), potential_commutator.end());
  report.lipschitz_surrogate =
      report.max_potential_commutator + 2.0 * psi.fourier_constant(source.e_infty) * 4.0 * box.dim();
  return report;
}

}  // namespace mourrelab
