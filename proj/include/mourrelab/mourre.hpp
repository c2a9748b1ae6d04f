#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mourrelab/lattice.hpp"
#include "mourrelab/potential.hpp"

namespace mourrelab {

struct FourierQuadrature {
  int base_points = 1 << 14;    // samples on the initial window
  double base_half_width = 4.0; // initial window [-4, 4]
  double rel_tol = 5e-4;        // 3 significant digits
  int max_refinements = 6;
};

// Smooth cutoff: 1 on [a, b], C^2 smoothstep flanks of width s, 0 outside
// [a - s, b + s], with delta = min{1 + a/2, 1 - b/2} and
// s = 1/2 min{a - (-2 + delta), (2 - delta) - b}.
class CutoffFunction {
 public:
  CutoffFunction(double a, double b);

  double a() const { return a_; }
  double b() const { return b_; }
  double delta() const { return delta_; }
  double flank() const { return flank_; }
  double support_lo() const { return a_ - flank_; }
  double support_hi() const { return b_ + flank_; }
  double operator()(double x) const;

  // int |t| |psi_hat(t)| dt with psi_hat(t) = (1/2pi) int psi(x) e^{-itx} dx.
  double fourier_moment() const { return fourier_moment_; }
  // Lemma-1 constant E_infty * fourier_moment().
  double fourier_constant(double e_infty) const { return e_infty * fourier_moment_; }
  // Moment at each refinement level (window doubling); last entry is the value used.
  const std::vector<double>& moment_history() const { return moment_history_; }

 private:
  friend CutoffFunction build_cutoff(double, double, const FourierQuadrature&);
  double a_, b_, delta_, flank_;
  double fourier_moment_ = 0.0;
  std::vector<double> moment_history_;
};

CutoffFunction build_cutoff(double a, double b, const FourierQuadrature& quadrature = {});

// Trapezoidal int |t| |psi_hat(t)| dt from samples of psi on [-half_width, half_width).
double fourier_moment_on_grid(const std::function<double(double)>& psi, double half_width, int points);

DenseOperator apply_function(const EigenSystem& eigen, const std::function<double(double)>& f);
DenseOperator apply_function(const EigenSystem& eigen, const CutoffFunction& psi);

// Seed -> diagonal disorder V on a fixed box, plus E_infty of its law.
struct DisorderSource {
  LatticeBox box;
  double e_infty = 0.0;
  std::function<LatticeOperator(std::uint64_t)> potential;
};

DisorderSource bump_disorder(const PotentialSpec& spec, const CouplingDistribution& mu, const LatticeBox& box);
DisorderSource stationary_disorder(const CouplingDistribution& mu, const LatticeBox& box);

struct Lemma1Row {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double difference_norm = 0.0;  // ||psi(H_lambda) - psi(Delta)||
  double ratio = 0.0;            // difference_norm / lambda (0 at lambda = 0)
  double bound = 0.0;            // E_infty * int |t||psi_hat|
  bool ok = false;
};

struct Lemma1Table {
  int nu = 0;
  int side = 0;
  double a = 0.0, b = 0.0;
  std::vector<Lemma1Row> rows;

  bool all_ok() const;
  // max over seeds of |ratio(l1) - ratio(l2)| / max(ratio(l1), ratio(l2)).
  double linearity_spread(double lambda1, double lambda2) const;
};

Lemma1Table lemma1_check(const DisorderSource& source, const std::vector<double>& lambdas, const CutoffFunction& psi,
                         const std::vector<std::uint64_t>& seeds, std::size_t dense_cap = kDefaultDenseCap);

struct TorusScanResult {
  int nu = 0;
  double delta = 0.0;
  int grid = 0;
  double min_value = 0.0;
  std::vector<double> argmin;  // theta*, each in [0, 2pi)
  std::size_t points_in_w = 0;
  double bound_3delta = 0.0;
  double slack = 0.0;          // 2 pi nu / grid
  bool pass = false;
};

// Exhaustive grid scan of 4 sum sin^2(theta_i) over W = {|sum cos theta_i| < 1 - delta/2}.
TorusScanResult torus_scan(int nu, double delta, int grid);

// Minimum of 4 sum sin^2 over grid momenta 2 pi m / grid (m in Z_grid^nu) with
// 2 sum cos in [a, b]. Returns nullopt if no momentum qualifies.
std::optional<double> symbol_minimum_on_momenta(int nu, int grid, double a, double b);

struct BulkFilter {
  int collar_width = 5;
  double mass_cutoff = 0.01;
};

struct MourreRow {
  double a = 0.0, b = 0.0, delta = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t rank = 0;           // rank of P_I
  std::size_t filtered_rank = 0;  // Ritz vectors surviving the bulk filter
  Eigen::VectorXd ritz_values;    // eigenvalues of P[A,H]P on range(P), ascending
  Eigen::VectorXd collar_mass;    // boundary-collar mass of each Ritz vector
  double m_unfiltered = 0.0;
  double m = 0.0;                 // filtered minimum
  bool filtered = false;          // whether the collar filter was applied
  bool degenerate = false;        // empty projection (before or after filtering)

  double margin_2delta() const { return m - 2.0 * delta; }
  double margin_3delta() const { return m - 3.0 * delta; }
};

// Minimum of the compressed commutator P C P on range(P), P = spectral projection
// of the eigensystem onto [a, b]. Ritz vectors with collar mass above the cutoff
// are discarded (collar width 0 disables the filter).
MourreRow mourre_check_commutator(const EigenSystem& eigen, const LatticeOperator& comm, double a, double b,
                                  double delta, const BulkFilter& filter);
MourreRow mourre_check(const LatticeOperator& h, const EigenSystem& eigen, const LatticeOperator& a_op,
                       const CutoffFunction& psi, const BulkFilter& filter);

struct MourreReport {
  double a = 0.0, b = 0.0, delta = 0.0;
  BulkFilter filter;
  std::vector<double> lambda_values;
  std::vector<MourreRow> rows;                // sorted by (lambda, seed)
  std::vector<double> worst_margin_2delta;    // per lambda, min over seeds
  std::vector<double> envelope;               // running min of worst margins
  std::optional<double> lambda_threshold;     // largest lambda with envelope >= 0
  double max_potential_commutator = 0.0;      // max_seed ||[A, V]||
  double lipschitz_surrogate = 0.0;
};

MourreReport lambda_threshold_scan(const DisorderSource& source, const CutoffFunction& psi,
                                   const std::vector<double>& lambda_grid, const std::vector<std::uint64_t>& seeds,
                                   const BulkFilter& filter, std::size_t dense_cap = kDefaultDenseCap);

}  // namespace mourrelab
