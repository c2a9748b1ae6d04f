#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mourrelab/lattice.hpp"
#include "mourrelab/random.hpp"

namespace mourrelab {

// 1 - t^3 (10 - 15 t + 6 t^2) on [0, 1]; 1 below, 0 above. C^2.
double smoothstep_falloff(double t);
double smoothstep_falloff_derivative(double t);
double smoothstep_falloff_second_derivative(double t);

// Radial plateau bump: 1 for |x|_2 <= rho, smoothstep falloff on [rho, 1],
// 0 for |x|_2 >= 1.
class BumpProfile {
 public:
  explicit BumpProfile(double plateau_radius);

  double plateau_radius() const { return plateau_radius_; }
  double radial(double radius) const;
  double radial_derivative(double radius) const;
  double radial_second_derivative(double radius) const;
  double operator()(std::span<const double> x) const;

  // sup |g'| = 15 / (8 (1 - rho)).
  double first_derivative_bound() const;
  // sup |g''| = 10 / (sqrt(3) (1 - rho)^2).
  double second_derivative_bound() const;
  // Bound on every second partial derivative of x -> g(|x|) in `dim` dimensions.
  double hessian_bound(int dim) const;

 private:
  double plateau_radius_;
};

BumpProfile make_bump_profile(double plateau_radius);

struct BumpCenter {
  Site site;
  int annulus;  // k, 1-based
  int radius;   // r(n) = 2^{k-2} M
};

// Dyadic annuli A_k = {2^{k-1} M < |m|_inf <= 2^k M}, k = 1..K, with 2 dim
// centers per annulus at +-d_k e_i, d_k = 3 * 2^{k-2} M.
struct PotentialSpec {
  int dim = 1;
  int base_scale = 4;
  int annulus_count = 0;
  BumpProfile profile{0.5};
  std::vector<BumpCenter> centers;

  // Smallest half side of a box that contains every annulus.
  int required_half_side() const;
};

PotentialSpec build_support(int base_scale, int annulus_count, int dim, const BumpProfile& profile);

// Diagonal of phi((m - n) / r(n)) over the box (l2 norm inside the profile).
LatticeOperator evaluate_bump_on_box(const PotentialSpec& spec, const BumpCenter& center, const LatticeBox& box);
Eigen::VectorXd bump_values(const PotentialSpec& spec, const BumpCenter& center, const LatticeBox& box);

struct SupportInterval {
  double lo;
  double hi;
};

// Law of the couplings: atomic, uniform on [lo, hi], or a finite mixture.
class CouplingDistribution {
 public:
  enum class Kind { Atomic, Uniform, Mixture };

  static CouplingDistribution atomic(std::vector<double> points, std::vector<double> weights);
  static CouplingDistribution uniform(double lo, double hi);
  static CouplingDistribution mixture(std::vector<CouplingDistribution> children, std::vector<double> weights);

  Kind kind() const { return kind_; }
  double e_minus() const { return e_minus_; }
  double e_plus() const { return e_plus_; }
  double e_infty() const { return std::max(std::abs(e_minus_), std::abs(e_plus_)); }
  bool zero_in_support() const;
  // Closed support as merged sorted intervals (atoms are degenerate intervals).
  std::vector<SupportInterval> support() const;
  double mean() const;
  double variance() const;
  // Probability of the open window (lo, hi).
  double window_mass(double lo, double hi) const;

  double draw(std::mt19937_64& gen) const;

  nlohmann::json to_json() const;
  static CouplingDistribution from_json(const nlohmann::json& j);

 private:
  Kind kind_ = Kind::Atomic;
  std::vector<double> points_;
  std::vector<double> weights_;
  double lo_ = 0.0;
  double hi_ = 0.0;
  std::vector<CouplingDistribution> children_;
  double e_minus_ = 0.0;
  double e_plus_ = 0.0;
};

struct Realization {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double e_infty = 0.0;
  std::vector<double> couplings;  // one per spec center
  LatticeOperator potential;      // V^omega, diagonal
  LatticeOperator hamiltonian;    // Delta + lambda V^omega
};

Realization sample_realization(const PotentialSpec& spec, const CouplingDistribution& mu, double lambda,
                               std::uint64_t seed, const LatticeBox& box);
// Same couplings, new coupling for one center.
Realization with_coupling(const Realization& base, const PotentialSpec& spec, std::size_t center_index,
                          double coupling, const LatticeBox& box);
// Rejection-sample omega in (lo, hi) from mu; nullopt after `cap` draws.
std::optional<double> draw_conditioned(const CouplingDistribution& mu, std::uint64_t seed, std::uint64_t key,
                                       double lo, double hi, std::size_t cap = 1'000'000);

// i.i.d. coupling on every site (comparison runs only).
LatticeOperator stationary_potential(const LatticeBox& box, const CouplingDistribution& mu, std::uint64_t seed);

struct BumpCheck {
  BumpCenter center;
  double center_ratio = 0.0;  // |n|_inf / r(n)
  bool bounded = false;       // 0 <= phi_k <= 1 on the box
  bool plateau = false;       // Lambda_{ceil(|n|^{1/2})}(n) inside {phi_k = 1}, sitewise
  bool plateau_analytic = false;  // sqrt(dim) ceil(|n|^{1/2}) <= rho r(n)
  double commutator_norm = 0.0;         // ||[A, phi_k]||
  double double_commutator_norm = 0.0;  // ||[A, [A, phi_k]]||
  double coordinate_constant = 0.0;     // c = max |coordinate| / r(n) over supp phi_k
  double double_commutator_bound = 0.0; // 2 c^2 sum_{j,k} (|d_j d_k phi| + |d_k^2 phi|)
  bool double_commutator_ok = false;
};

struct HypothesisReport {
  std::vector<BumpCheck> bumps;
  bool disjoint = false;
  double sup_commutator_norm = 0.0;  // sup_k ||[A, phi_k]||
  double commutator_uniformity = 0.0;  // max_k / min_k ||[A, phi_k]||
  double plateau_threshold = 0.0;   // inner annulus radius beyond which the plateau holds
  bool uniformity_ok = false;
  double uniformity_limit = 4.0;

  bool all_bounded() const;
  bool all_plateau() const;
  bool all_double_commutator_ok() const;
  bool pass() const;
};

HypothesisReport check_hypothesis(const PotentialSpec& spec, const LatticeBox& box, double commut_tol = 1e-10);

// Minimal structured-config view of a potential (dim, M, K, plateau_radius).
nlohmann::json to_json(const PotentialSpec& spec);

}  // namespace mourrelab
