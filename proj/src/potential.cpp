#include "mourrelab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "mourrelab/errors.hpp"

namespace mourrelab {

double smoothstep_falloff(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  // Rounding near t = 1 can dip a few ulps below zero.
  return std::clamp(1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t), 0.0, 1.0);
}

double smoothstep_falloff_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double u = t * (1.0 - t);
  return -30.0 * u * u;
}

double smoothstep_falloff_second_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
}

BumpProfile::BumpProfile(double plateau_radius) : plateau_radius_(plateau_radius) {
  if (!(plateau_radius > 0.0 && plateau_radius < 1.0))
    throw ArgumentError(fmt::format("plateau radius must lie in (0, 1), got {}", plateau_radius));
}

double BumpProfile::radial(double radius) const {
  return smoothstep_falloff((radius - plateau_radius_) / (1.0 - plateau_radius_));
}

double BumpProfile::radial_derivative(double radius) const {
  const double w = 1.0 - plateau_radius_;
  return smoothstep_falloff_derivative((radius - plateau_radius_) / w) / w;
}

double BumpProfile::radial_second_derivative(double radius) const {
  const double w = 1.0 - plateau_radius_;
  return smoothstep_falloff_second_derivative((radius - plateau_radius_) / w) / (w * w);
}

double BumpProfile::operator()(std::span<const double> x) const {
  double sq = 0.0;
  for (double c : x) sq += c * c;
  return radial(std::sqrt(sq));
}

double BumpProfile::first_derivative_bound() const { return 15.0 / (8.0 * (1.0 - plateau_radius_)); }

double BumpProfile::second_derivative_bound() const {
  const double w = 1.0 - plateau_radius_;
  return 10.0 / (std::sqrt(3.0) * w * w);
}

double BumpProfile::hessian_bound(int dim) const {
  // Hessian of g(|x|) is g'' xx^T/|x|^2 + (g'/|x|)(I - xx^T/|x|^2); g' vanishes for |x| <= rho.
  if (dim == 1) return second_derivative_bound();
  return second_derivative_bound() + first_derivative_bound() / plateau_radius_;
}

BumpProfile make_bump_profile(double plateau_radius) { return BumpProfile(plateau_radius); }

int PotentialSpec::required_half_side() const {
  if (annulus_count == 0) return 1;
  return (1 << annulus_count) * base_scale;
}

PotentialSpec build_support(int base_scale, int annulus_count, int dim, const BumpProfile& profile) {
  if (base_scale < 4 || base_scale % 2 != 0)
    throw ArgumentError(fmt::format("base scale M must be even and >= 4, got {}", base_scale));
  if (annulus_count < 0 || annulus_count > 20)
    throw ArgumentError(fmt::format("annulus count must lie in 0..20, got {}", annulus_count));
  if (dim < 1) throw ArgumentError("dimension must be positive");

  PotentialSpec spec;
  spec.dim = dim;
  spec.base_scale = base_scale;
  spec.annulus_count = annulus_count;
  spec.profile = profile;
  for (int k = 1; k <= annulus_count; ++k) {
    // r = 2^{k-2} M and d = 3 r; M even keeps both integral for k = 1.
    const int radius = (1 << k) * base_scale / 4;
    const int offset = 3 * radius;
    for (int axis = 0; axis < dim; ++axis)
      for (int sign : {+1, -1}) {
        Site s(dim, 0);
        s[axis] = sign * offset;
        spec.centers.push_back({std::move(s), k, radius});
      }
  }
  return spec;
}

namespace {

int linf(std::span<const int> s) {
  int m = 0;
  for (int c : s) m = std::max(m, std::abs(c));
  return m;
}

// Visits every site of the cube Lambda_radius(center) intersected with the box.
template <typename Fn>
void for_each_in_cube(const LatticeBox& box, const Site& center, int radius, Fn&& fn) {
  const int dim = box.dim();
  const int L = box.half_side();
  Site lo(dim), hi(dim), cur(dim);
  for (int i = 0; i < dim; ++i) {
    lo[i] = std::max(-L, center[i] - radius);
    hi[i] = std::min(L, center[i] + radius);
    if (lo[i] > hi[i]) return;
  }
  cur = lo;
  while (true) {
    fn(cur);
    int i = 0;
    while (i < dim && ++cur[i] > hi[i]) {
      cur[i] = lo[i];
      ++i;
    }
    if (i == dim) return;
  }
}

void require_contains_spec(const PotentialSpec& spec, const LatticeBox& box) {
  if (box.dim() != spec.dim)
    throw ArgumentError(fmt::format("box dimension {} differs from potential dimension {}", box.dim(), spec.dim));
  if (box.half_side() < spec.required_half_side())
    throw CapacityError(fmt::format("box half side {} cannot contain annulus K={} (needs half side >= {})",
                                    box.half_side(), spec.annulus_count, spec.required_half_side()));
}

}  // namespace

Eigen::VectorXd bump_values(const PotentialSpec& spec, const BumpCenter& center, const LatticeBox& box) {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(box.size()));
  std::vector<double> x(spec.dim);
  const double r = center.radius;
  for_each_in_cube(box, center.site, center.radius, [&](const Site& m) {
    for (int i = 0; i < spec.dim; ++i) x[i] = (m[i] - center.site[i]) / r;
    const double v = spec.profile(x);
    if (v != 0.0) values[static_cast<Eigen::Index>(box.index(m))] = v;
  });
  return values;
}

LatticeOperator evaluate_bump_on_box(const PotentialSpec& spec, const BumpCenter& center, const LatticeBox& box) {
  if (box.dim() != spec.dim) throw ArgumentError("box and potential dimension differ");
  return build_diagonal(box, bump_values(spec, center, box));
}

// ---------------------------------------------------------------------------
// Coupling distribution

namespace {

void require_weights(const std::vector<double>& weights, std::size_t n, const char* what) {
  if (weights.size() != n) throw ArgumentError(fmt::format("{}: {} weights for {} entries", what, weights.size(), n));
  if (n == 0) throw ArgumentError(fmt::format("{}: empty", what));
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError(fmt::format("{}: weights must be non-negative", what));
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError(fmt::format("{}: weights sum to {}, not 1", what, sum));
}

std::vector<SupportInterval> merge(std::vector<SupportInterval> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  std::vector<SupportInterval> out;
  for (const auto& iv : v) {
    if (!out.empty() && iv.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  return out;
}

}  // namespace

CouplingDistribution CouplingDistribution::atomic(std::vector<double> points, std::vector<double> weights) {
  require_weights(weights, points.size(), "atomic distribution");
  for (double p : points)
    if (!std::isfinite(p)) throw ArgumentError("atomic distribution: points must be finite");
  CouplingDistribution d;
  d.kind_ = Kind::Atomic;
  d.points_ = std::move(points);
  d.weights_ = std::move(weights);
  const auto sup = d.support();
  d.e_minus_ = sup.front().lo;
  d.e_plus_ = sup.back().hi;
  return d;
}

CouplingDistribution CouplingDistribution::uniform(double lo, double hi) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi))
    throw ArgumentError(fmt::format("uniform distribution needs finite lo < hi, got [{}, {}]", lo, hi));
  CouplingDistribution d;
  d.kind_ = Kind::Uniform;
  d.lo_ = lo;
  d.hi_ = hi;
  d.e_minus_ = lo;
  d.e_plus_ = hi;
  return d;
}

CouplingDistribution CouplingDistribution::mixture(std::vector<CouplingDistribution> children, std::vector<double> weights) {
  require_weights(weights, children.size(), "mixture distribution");
  CouplingDistribution d;
  d.kind_ = Kind::Mixture;
  d.children_ = std::move(children);
  d.weights_ = std::move(weights);
  const auto sup = d.support();
  if (sup.empty()) throw ArgumentError("mixture distribution: all weights vanish");
  d.e_minus_ = sup.front().lo;
  d.e_plus_ = sup.back().hi;
  return d;
}

std::vector<SupportInterval> CouplingDistribution::support() const {
  std::vector<SupportInterval> parts;
  switch (kind_) {
    case Kind::Atomic:
      for (std::size_t i = 0; i < points_.size(); ++i)
        if (weights_[i] > 0.0) parts.push_back({points_[i], points_[i]});
      break;
    case Kind::Uniform:
      parts.push_back({lo_, hi_});
      break;
    case Kind::Mixture:
      for (std::size_t i = 0; i < children_.size(); ++i)
        if (weights_[i] > 0.0)
          for (const auto& iv : children_[i].support()) parts.push_back(iv);
      break;
  }
  return merge(std::move(parts));
}

bool CouplingDistribution::zero_in_support() const {
  const auto sup = support();
  return std::any_of(sup.begin(), sup.end(), [](const auto& iv) { return iv.lo <= 0.0 && 0.0 <= iv.hi; });
}

double CouplingDistribution::mean() const {
  switch (kind_) {
    case Kind::Atomic:
      return std::inner_product(points_.begin(), points_.end(), weights_.begin(), 0.0);
    case Kind::Uniform:
      return 0.5 * (lo_ + hi_);
    case Kind::Mixture: {
      double m = 0.0;
      for (std::size_t i = 0; i < children_.size(); ++i) m += weights_[i] * children_[i].mean();
      return m;
    }
  }
  return 0.0;
}

double CouplingDistribution::variance() const {
  switch (kind_) {
    case Kind::Atomic: {
      const double m = mean();
      double v = 0.0;
      for (std::size_t i = 0; i < points_.size(); ++i) v += weights_[i] * (points_[i] - m) * (points_[i] - m);
      return v;
    }
    case Kind::Uniform:
      return (hi_ - lo_) * (hi_ - lo_) / 12.0;
    case Kind::Mixture: {
      const double m = mean();
      double second = 0.0;
      for (std::size_t i = 0; i < children_.size(); ++i) {
        const double mi = children_[i].mean();
        second += weights_[i] * (children_[i].variance() + mi * mi);
      }
      return second - m * m;
    }
  }
  return 0.0;
}

double CouplingDistribution::window_mass(double lo, double hi) const {
  switch (kind_) {
    case Kind::Atomic: {
      double w = 0.0;
      for (std::size_t i = 0; i < points_.size(); ++i)
        if (points_[i] > lo && points_[i] < hi) w += weights_[i];
      return w;
    }
    case Kind::Uniform:
      return std::max(0.0, std::min(hi, hi_) - std::max(lo, lo_)) / (hi_ - lo_);
    case Kind::Mixture: {
      double w = 0.0;
      for (std::size_t i = 0; i < children_.size(); ++i) w += weights_[i] * children_[i].window_mass(lo, hi);
      return w;
    }
  }
  return 0.0;
}

namespace {

std::size_t pick(const std::vector<double>& weights, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc && weights[i] > 0.0) return i;
  }
  // u landed in the rounding gap above the cumulative sum: last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return 0;
}

}  // namespace

double CouplingDistribution::draw(std::mt19937_64& gen) const {
  switch (kind_) {
    case Kind::Atomic:
      return points_[pick(weights_, uniform01(gen))];
    case Kind::Uniform:
      return lo_ + (hi_ - lo_) * uniform01(gen);
    case Kind::Mixture:
      return children_[pick(weights_, uniform01(gen))].draw(gen);
  }
  return 0.0;
}

nlohmann::json CouplingDistribution::to_json() const {
  nlohmann::json j;
  switch (kind_) {
    case Kind::Atomic:
      j = {{"kind", "atomic"}, {"points", points_}, {"weights", weights_}};
      break;
    case Kind::Uniform:
      j = {{"kind", "uniform"}, {"lo", lo_}, {"hi", hi_}};
      break;
    case Kind::Mixture: {
      nlohmann::json comps = nlohmann::json::array();
      for (const auto& c : children_) comps.push_back(c.to_json());
      j = {{"kind", "mixture"}, {"components", comps}, {"weights", weights_}};
      break;
    }
  }
  return j;
}

namespace {

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ArgumentError(fmt::format("{}.{}: unknown key", path, key));
  }
  for (const char* a : allowed)
    if (!j.contains(a)) throw ArgumentError(fmt::format("{}.{}: missing required key", path, a));
}

CouplingDistribution parse_distribution(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ArgumentError(fmt::format("{}: expected an object", path));
  if (!j.contains("kind") || !j["kind"].is_string()) throw ArgumentError(fmt::format("{}.kind: missing or not a string", path));
  const std::string kind = j["kind"].get<std::string>();
  try {
    if (kind == "atomic") {
      require_keys(j, {"kind", "points", "weights"}, path);
      return CouplingDistribution::atomic(j["points"].get<std::vector<double>>(), j["weights"].get<std::vector<double>>());
    }
    if (kind == "uniform") {
      require_keys(j, {"kind", "lo", "hi"}, path);
      return CouplingDistribution::uniform(j["lo"].get<double>(), j["hi"].get<double>());
    }
    if (kind == "mixture") {
      require_keys(j, {"kind", "components", "weights"}, path);
      std::vector<CouplingDistribution> children;
      for (std::size_t i = 0; i < j["components"].size(); ++i)
        children.push_back(parse_distribution(j["components"][i], fmt::format("{}.components[{}]", path, i)));
      return CouplingDistribution::mixture(std::move(children), j["weights"].get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(fmt::format("{}: {}", path, e.what()));
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ArgumentError(fmt::format("{}: {}", path, msg));
  }
  throw ArgumentError(fmt::format("{}.kind: unknown distribution kind '{}'", path, kind));
}

}  // namespace

CouplingDistribution CouplingDistribution::from_json(const nlohmann::json& j) { return parse_distribution(j, "distribution"); }

// ---------------------------------------------------------------------------
// Realizations

namespace {

Realization assemble(const PotentialSpec& spec, std::vector<double> couplings, double lambda, std::uint64_t seed,
                     double e_infty, const LatticeBox& box) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(box.size()));
  for (std::size_t i = 0; i < spec.centers.size(); ++i)
    if (couplings[i] != 0.0) v += couplings[i] * bump_values(spec, spec.centers[i], box);
  LatticeOperator potential = build_diagonal(box, v);
  LatticeOperator hamiltonian = build_laplacian(box) + lambda * potential;
  return Realization{seed, lambda, e_infty, std::move(couplings), std::move(potential), std::move(hamiltonian)};
}

}  // namespace

Realization sample_realization(const PotentialSpec& spec, const CouplingDistribution& mu, double lambda,
                               std::uint64_t seed, const LatticeBox& box) {
  if (!(lambda >= 0.0)) throw ArgumentError(fmt::format("lambda must be non-negative, got {}", lambda));
  require_contains_spec(spec, box);
  std::vector<double> couplings(spec.centers.size());
  for (std::size_t i = 0; i < couplings.size(); ++i) {
    auto gen = keyed_engine(seed, i);
    couplings[i] = mu.draw(gen);
  }
  return assemble(spec, std::move(couplings), lambda, seed, mu.e_infty(), box);
}

Realization with_coupling(const Realization& base, const PotentialSpec& spec, std::size_t center_index, double coupling,
                          const LatticeBox& box) {
  if (center_index >= base.couplings.size()) throw ArgumentError("center index out of range");
  std::vector<double> couplings = base.couplings;
  couplings[center_index] = coupling;
  return assemble(spec, std::move(couplings), base.lambda, base.seed, base.e_infty, box);
}

std::optional<double> draw_conditioned(const CouplingDistribution& mu, std::uint64_t seed, std::uint64_t key, double lo,
                                       double hi, std::size_t cap) {
  auto gen = keyed_engine(seed, key);
  for (std::size_t i = 0; i < cap; ++i) {
    const double w = mu.draw(gen);
    if (w > lo && w < hi) return w;
  }
  return std::nullopt;
}

LatticeOperator stationary_potential(const LatticeBox& box, const CouplingDistribution& mu, std::uint64_t seed) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(box.size()));
  for (std::size_t i = 0; i < box.size(); ++i) {
    auto gen = keyed_engine(seed, i);
    v[static_cast<Eigen::Index>(i)] = mu.draw(gen);
  }
  return build_diagonal(box, v);
}

// ---------------------------------------------------------------------------
// Hypothesis checker

bool HypothesisReport::all_bounded() const {
  return std::all_of(bumps.begin(), bumps.end(), [](const auto& b) { return b.bounded; });
}

bool HypothesisReport::all_plateau() const {
  return std::all_of(bumps.begin(), bumps.end(), [](const auto& b) { return b.plateau; });
}

bool HypothesisReport::all_double_commutator_ok() const {
  return std::all_of(bumps.begin(), bumps.end(), [](const auto& b) { return b.double_commutator_ok; });
}

bool HypothesisReport::pass() const {
  return disjoint && all_bounded() && all_plateau() && uniformity_ok && all_double_commutator_ok();
}

HypothesisReport check_hypothesis(const PotentialSpec& spec, const LatticeBox& box, double commut_tol) {
  require_contains_spec(spec, box);
  const LatticeOperator a = build_conjugate_operator(box);
  const double rho = spec.profile.plateau_radius();
  const int dim = spec.dim;

  HypothesisReport report;
  report.plateau_threshold = 64.0 * dim / (rho * rho);

  // Open cubes |m - n|_inf < r contain supp phi_k; pairwise disjoint iff some axis separates them.
  report.disjoint = true;
  for (std::size_t i = 0; i < spec.centers.size() && report.disjoint; ++i)
    for (std::size_t j = i + 1; j < spec.centers.size(); ++j) {
      const auto& p = spec.centers[i];
      const auto& q = spec.centers[j];
      bool separated = false;
      for (int ax = 0; ax < dim; ++ax)
        if (std::abs(p.site[ax] - q.site[ax]) >= p.radius + q.radius) separated = true;
      if (!separated) {
        report.disjoint = false;
        break;
      }
    }
  std::vector<int> cover(box.size(), 0);

  NormOptions norm_options;
  norm_options.tol = commut_tol;
  double min_norm = std::numeric_limits<double>::infinity();
  for (const auto& center : spec.centers) {
    BumpCheck check;
    check.center = center;
    check.center_ratio = static_cast<double>(linf(center.site)) / center.radius;

    const Eigen::VectorXd phi = bump_values(spec, center, box);
    check.bounded = (phi.array() >= 0.0).all() && (phi.array() <= 1.0).all();

    double c = 0.0;
    for (std::size_t s = 0; s < box.size(); ++s) {
      if (phi[static_cast<Eigen::Index>(s)] == 0.0) continue;
      ++cover[s];
      for (int ax = 1; ax <= dim; ++ax) c = std::max(c, std::abs(box.coordinate(s, ax)) / static_cast<double>(center.radius));
    }
    check.coordinate_constant = c;

    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(linf(center.site)))));
    check.plateau = true;
    for_each_in_cube(box, center.site, side, [&](const Site& m) {
      if (phi[static_cast<Eigen::Index>(box.index(m))] != 1.0) check.plateau = false;
    });
    // The clipped cube must also be whole.
    for (int ax = 0; ax < dim; ++ax)
      if (std::abs(center.site[ax]) + side > box.half_side()) check.plateau = false;
    check.plateau_analytic = std::sqrt(static_cast<double>(dim)) * side <= rho * center.radius;

    const LatticeOperator phi_op = build_diagonal(box, phi);
    const LatticeOperator first = commutator(a, phi_op);
    const LatticeOperator second = commutator(a, first);
    check.commutator_norm = operator_norm(first, norm_options);
    check.double_commutator_norm = operator_norm(second, norm_options);
    // sum over j, k of (|d_j d_k phi| + |d_k^2 phi|), each bounded by the Hessian bound.
    const double h = spec.profile.hessian_bound(dim);
    check.double_commutator_bound = 2.0 * c * c * static_cast<double>(dim * dim) * 2.0 * h;
    check.double_commutator_ok = check.double_commutator_norm <= check.double_commutator_bound;

    report.sup_commutator_norm = std::max(report.sup_commutator_norm, check.commutator_norm);
    min_norm = std::min(min_norm, check.commutator_norm);
    report.bumps.push_back(std::move(check));
  }
  if (std::any_of(cover.begin(), cover.end(), [](int n) { return n > 1; })) report.disjoint = false;

  report.commutator_uniformity = report.bumps.empty() || min_norm == 0.0 ? 1.0 : report.sup_commutator_norm / min_norm;
  report.uniformity_ok = report.commutator_uniformity <= report.uniformity_limit;
  return report;
}

nlohmann::json to_json(const PotentialSpec& spec) {
  return {{"dim", spec.dim},
          {"M", spec.base_scale},
          {"K", spec.annulus_count},
          {"plateau_radius", spec.profile.plateau_radius()}};
}

}  // namespace mourrelab
