#include "mourrelab/spectral.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mourrelab/errors.hpp"

namespace mourrelab {

bool SpectrumPrediction::contains(double e, double fattening) const {
  return std::any_of(intervals.begin(), intervals.end(),
                     [&](const SupportInterval& iv) { return e >= iv.lo - fattening && e <= iv.hi + fattening; });
}

double SpectrumPrediction::total_length() const {
  double len = 0.0;
  for (const auto& iv : intervals) len += iv.hi - iv.lo;
  return len;
}

SpectrumPrediction predict_essential_spectrum(int nu, double lambda, const CouplingDistribution& mu) {
  if (nu < 1) throw ArgumentError("predict_essential_spectrum: nu must be positive");
  if (!(lambda >= 0.0)) throw ArgumentError(fmt::format("lambda must be non-negative, got {}", lambda));
  const double band = 2.0 * nu;
  std::vector<SupportInterval> parts;
  for (const auto& iv : mu.support()) parts.push_back({-band + lambda * iv.lo, band + lambda * iv.hi});
  std::sort(parts.begin(), parts.end(), [](const auto& x, const auto& y) { return x.lo < y.lo; });
  SpectrumPrediction out;
  for (const auto& iv : parts) {
    if (!out.intervals.empty() && iv.lo <= out.intervals.back().hi)
      out.intervals.back().hi = std::max(out.intervals.back().hi, iv.hi);
    else
      out.intervals.push_back(iv);
  }
  return out;
}

namespace {

int squared_distance(const Site& a, const Site& b) {
  int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Sites n with |n - c|_2 < j, scanning the cube Lambda_{j-1}(c). Returns false
// as soon as visit returns false; sites outside the box count as failures.
template <typename Visit>
bool for_each_in_ball(const LatticeBox& box, const Site& c, int j, Visit&& visit) {
  const int dim = box.dim();
  Site cur(dim);
  for (int i = 0; i < dim; ++i) cur[i] = c[i] - (j - 1);
  while (true) {
    if (squared_distance(cur, c) < j * j) {
      if (!box.contains(cur) || !visit(cur)) return false;
    }
    int i = 0;
    while (i < dim && ++cur[i] > c[i] + (j - 1)) {
      cur[i] = c[i] - (j - 1);
      ++i;
    }
    if (i == dim) return true;
  }
}

}  // namespace

WeylVector make_weyl_vector(double energy, int window, const Site& center, const LatticeBox& box,
                            std::optional<std::vector<double>> momentum, double window_plateau) {
  const int nu = box.dim();
  if (!(energy > -2.0 * nu && energy < 2.0 * nu))
    throw ArgumentError(fmt::format("energy {} must lie in (-{}, {})", energy, 2 * nu, 2 * nu));
  if (window < 1) throw ArgumentError("window half width must be >= 1");
  if (static_cast<int>(center.size()) != nu) throw ArgumentError("center dimension differs from the box");

  WeylVector out;
  out.energy = energy;
  out.window = window;
  out.center = center;
  if (momentum) {
    if (static_cast<int>(momentum->size()) != nu) throw ArgumentError("momentum dimension differs from the box");
    double s = 0.0;
    for (double t : *momentum) s += 2.0 * std::cos(t);
    if (std::abs(s - energy) > 1e-12) throw ArgumentError("explicit momentum is off the energy shell");
    out.momentum = *momentum;
  } else {
    out.momentum.assign(static_cast<std::size_t>(nu), std::acos(energy / (2.0 * nu)));
  }

  const BumpProfile w(window_plateau);
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(box.size()));
  const bool inside = for_each_in_ball(box, center, window, [&](const Site& n) {
    double phase = 0.0;
    for (int i = 0; i < nu; ++i) phase += out.momentum[static_cast<std::size_t>(i)] * (n[i] - center[i]);
    const double radius = std::sqrt(static_cast<double>(squared_distance(n, center))) / window;
    out.values[static_cast<Eigen::Index>(box.index(n))] = std::cos(phase) * w.radial(radius);
    return true;
  });
  if (!inside) throw PlacementError("Weyl vector support leaves the box", 0);
  const double norm = out.values.norm();
  if (norm == 0.0) throw ArgumentError("Weyl vector vanishes identically (window too small for this momentum)");
  out.values /= norm;
  return out;
}

int max_feasible_window(const PotentialSpec& spec, std::size_t center_index, const LatticeBox& box) {
  if (center_index >= spec.centers.size()) throw ArgumentError("center index out of range");
  const BumpCenter& bump = spec.centers[center_index];
  const Eigen::VectorXd phi = bump_values(spec, bump, box);
  int best = 0;
  for (int j = 1; j <= bump.radius + 1; ++j) {
    const bool ok = for_each_in_ball(box, bump.site, j,
                                     [&](const Site& n) { return phi[static_cast<Eigen::Index>(box.index(n))] == 1.0; });
    if (!ok) break;
    best = j;
  }
  return best;
}

WeylVector place_weyl_vector(const PotentialSpec& spec, std::size_t center_index, double energy, int window,
                             const LatticeBox& box, double window_plateau) {
  const int feasible = max_feasible_window(spec, center_index, box);
  if (feasible == 0) throw PlacementError("no plateau cube large enough for a Weyl vector", 0);
  if (window > feasible)
    throw PlacementError(fmt::format("window {} leaves the plateau; max feasible window is {}", window, feasible),
                         feasible);
  return make_weyl_vector(energy, window, spec.centers[center_index].site, box, std::nullopt, window_plateau);
}

WeylResidual weyl_residual_check(const Realization& realization, const PotentialSpec& spec, std::size_t center_index,
                                 double energy, double coupling_value, int ell, const WeylVector& vector,
                                 const LatticeBox& box) {
  if (center_index >= spec.centers.size()) throw ArgumentError("center index out of range");
  if (ell < 1) throw ArgumentError("ell must be >= 1");
  const Eigen::VectorXd phi = bump_values(spec, spec.centers[center_index], box);
  for (Eigen::Index i = 0; i < vector.values.size(); ++i)
    if (vector.values[i] != 0.0 && phi[i] != 1.0) throw PreconditionError("Weyl vector support escapes the plateau");
  const double omega = realization.couplings[center_index];
  if (!(std::abs(omega - coupling_value) < 1.0 / ell))
    throw PreconditionError(fmt::format("coupling {} is not within 1/{} of {}", omega, ell, coupling_value));

  const LatticeOperator laplacian = build_laplacian(box);
  const Eigen::VectorXd& f = vector.values;
  WeylResidual out;
  out.free_residual = (laplacian.apply(f) - energy * f).norm();
  const double shifted = energy + realization.lambda * coupling_value;
  out.residual = (realization.hamiltonian.apply(f) - shifted * f).norm();
  out.coupling_deviation = realization.lambda * std::abs(omega - coupling_value);
  out.triangle_bound = out.free_residual + out.coupling_deviation;
  out.within_bound = out.residual <= out.triangle_bound + 1e-12;
  return out;
}

DosHistogram density_of_states(const EigenSystem& eigen, int bins, const std::optional<SpectrumPrediction>& prediction) {
  if (bins < 10) throw ArgumentError(fmt::format("density_of_states needs >= 10 bins, got {}", bins));
  const Eigen::VectorXd& ev = eigen.eigenvalues;
  if (ev.size() == 0) throw ArgumentError("density_of_states: empty spectrum");
  DosHistogram h;
  h.lo = ev.minCoeff();
  h.hi = ev.maxCoeff();
  if (h.hi - h.lo < 1e-12) {
    h.lo -= 0.5;
    h.hi += 0.5;
  }
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (h.hi - h.lo) / bins;
  std::size_t outside = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const auto bin = std::min<std::size_t>(static_cast<std::size_t>((ev[i] - h.lo) / width), bins - 1);
    ++h.counts[bin];
    if (prediction && !prediction->contains(ev[i], 1e-12)) ++outside;
  }
  h.density.resize(h.counts.size());
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    h.density[b] = static_cast<double>(h.counts[b]) / (static_cast<double>(ev.size()) * width);
  h.outside_fraction = static_cast<double>(outside) / static_cast<double>(ev.size());
  return h;
}

}  // namespace mourrelab
