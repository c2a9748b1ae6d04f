#pragma once

#include <optional>
#include <vector>

#include "mourrelab/lattice.hpp"
#include "mourrelab/potential.hpp"

namespace mourrelab {

// [-2 nu, 2 nu] + lambda supp(mu), merged into sorted disjoint closed intervals.
struct SpectrumPrediction {
  std::vector<SupportInterval> intervals;

  bool contains(double e, double fattening = 0.0) const;
  double total_length() const;
};

SpectrumPrediction predict_essential_spectrum(int nu, double lambda, const CouplingDistribution& mu);

struct WeylVector {
  double energy = 0.0;
  std::vector<double> momentum;  // theta with 2 sum cos theta_i = E
  int window = 0;                // j: values vanish for |n - center|_2 >= j
  Site center;
  Eigen::VectorXd values;        // unit l2 norm on the box
};

inline constexpr double kDefaultWindowPlateau = 0.2;

// f(n) = N^{-1} cos(theta . (n - c)) w((n - c) / j), w the smoothstep plateau
// profile with plateau radius window_plateau. theta_i = arccos(E / 2 nu) unless
// an explicit momentum is passed.
WeylVector make_weyl_vector(double energy, int window, const Site& center, const LatticeBox& box,
                            std::optional<std::vector<double>> momentum = std::nullopt,
                            double window_plateau = kDefaultWindowPlateau);

// Largest j such that {n : |n - c|_2 < j} lies inside the box and inside the
// plateau {phi = 1} of the given bump (0 if none).
int max_feasible_window(const PotentialSpec& spec, std::size_t center_index, const LatticeBox& box);

// Weyl vector centered on a bump; throws PlacementError (carrying the max
// feasible j) if its support leaves the plateau.
WeylVector place_weyl_vector(const PotentialSpec& spec, std::size_t center_index, double energy, int window,
                             const LatticeBox& box, double window_plateau = kDefaultWindowPlateau);

struct WeylResidual {
  double free_residual = 0.0;       // ||(Delta - E) f||
  double residual = 0.0;            // ||(H - (E + lambda r)) f||
  double coupling_deviation = 0.0;  // lambda |omega_k - r|
  double triangle_bound = 0.0;      // free_residual + coupling_deviation
  bool within_bound = false;
};

// Precondition: the vector sits in the plateau of bump `center_index` and that
// bump's coupling lies in (r - 1/ell, r + 1/ell).
WeylResidual weyl_residual_check(const Realization& realization, const PotentialSpec& spec, std::size_t center_index,
                                 double energy, double coupling_value, int ell, const WeylVector& vector,
                                 const LatticeBox& box);

struct DosHistogram {
  double lo = 0.0, hi = 0.0;
  std::vector<double> density;  // normalized: sum density * width = 1
  std::vector<std::size_t> counts;
  double outside_fraction = 0.0;  // eigenvalues outside the prediction (if given)

  double bin_width() const { return (hi - lo) / static_cast<double>(density.size()); }
};

DosHistogram density_of_states(const EigenSystem& eigen, int bins,
                               const std::optional<SpectrumPrediction>& prediction = std::nullopt);

}  // namespace mourrelab
