#include <doctest.h>

#include <cmath>

#include "mourrelab/errors.hpp"
#include "mourrelab/potential.hpp"

using namespace mourrelab;

TEST_CASE("smoothstep falloff and derivative bounds") {
  CHECK(smoothstep_falloff(-1.0) == 1.0);
  CHECK(smoothstep_falloff(0.0) == 1.0);
  CHECK(smoothstep_falloff(0.5) == doctest::Approx(0.5));
  CHECK(smoothstep_falloff(1.0) == 0.0);
  // Derivatives against central differences.
  const double h = 1e-5;
  for (double t = 0.05; t < 1.0; t += 0.05) {
    CHECK(smoothstep_falloff_derivative(t) ==
          doctest::Approx((smoothstep_falloff(t + h) - smoothstep_falloff(t - h)) / (2 * h)).epsilon(1e-7));
    CHECK(smoothstep_falloff_second_derivative(t) ==
          doctest::Approx((smoothstep_falloff_derivative(t + h) - smoothstep_falloff_derivative(t - h)) / (2 * h))
              .epsilon(1e-6));
  }
  // Sampled suprema match the closed-form bounds.
  for (double rho : {0.25, 0.5, 0.9}) {
    BumpProfile g(rho);
    double d1 = 0.0, d2 = 0.0;
    for (int k = 0; k <= 200000; ++k) {
      const double r = rho + (1.0 - rho) * k / 200000.0;
      d1 = std::max(d1, std::abs(g.radial_derivative(r)));
      d2 = std::max(d2, std::abs(g.radial_second_derivative(r)));
    }
    CHECK(d1 == doctest::Approx(g.first_derivative_bound()).epsilon(1e-6));
    CHECK(d2 == doctest::Approx(g.second_derivative_bound()).epsilon(1e-6));
    CHECK(g.hessian_bound(1) == g.second_derivative_bound());
    CHECK(g.hessian_bound(3) == doctest::Approx(g.second_derivative_bound() + g.first_derivative_bound() / rho));
  }
}

TEST_CASE("bump profile invariants") {
  BumpProfile g(0.5);
  const double origin[2] = {0.0, 0.0};
  CHECK(g(origin) == 1.0);
  double prev = 1.0;
  for (double r = 0.0; r <= 1.2; r += 0.001) {
    const double v = g.radial(r);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v <= prev);
    if (r <= 0.5) CHECK(v == 1.0);
    if (r >= 1.0) CHECK(v == 0.0);
    prev = v;
  }
  const double x[2] = {0.6, 0.8};
  CHECK(g(x) == 0.0);
  CHECK_THROWS_AS(BumpProfile(0.0), ArgumentError);
  CHECK_THROWS_AS(BumpProfile(1.0), ArgumentError);
}

TEST_CASE("support construction") {
  const auto spec = build_support(4, 2, 1, BumpProfile(0.5));
  REQUIRE(spec.centers.size() == 4);
  CHECK(spec.centers[0].site == Site{6});
  CHECK(spec.centers[1].site == Site{-6});
  CHECK(spec.centers[0].radius == 2);
  CHECK(spec.centers[2].site == Site{12});
  CHECK(spec.centers[2].radius == 4);
  CHECK(spec.required_half_side() == 16);

  const auto s3 = build_support(8, 3, 3, BumpProfile(0.5));
  CHECK(s3.centers.size() == 18);
  for (const auto& c : s3.centers) {
    int norm = 0;
    for (int x : c.site) norm = std::max(norm, std::abs(x));
    // Center sits in its annulus and its open cube stays inside it.
    CHECK(norm > (1 << (c.annulus - 1)) * 8);
    CHECK(norm <= (1 << c.annulus) * 8);
    CHECK(norm - c.radius >= (1 << (c.annulus - 1)) * 8);
    CHECK(norm + c.radius <= (1 << c.annulus) * 8);
  }
  CHECK_THROWS_AS(build_support(5, 1, 1, BumpProfile(0.5)), ArgumentError);
  CHECK_THROWS_AS(build_support(2, 1, 1, BumpProfile(0.5)), ArgumentError);
  CHECK_THROWS_AS(build_support(4, -1, 1, BumpProfile(0.5)), ArgumentError);
}

TEST_CASE("bump evaluation on a box") {
  const auto spec = build_support(8, 1, 2, BumpProfile(0.5));
  LatticeBox box(2, spec.required_half_side());
  const auto phi = evaluate_bump_on_box(spec, spec.centers[0], box);
  CHECK(phi.symmetry() == Symmetry::Symmetric);
  const Eigen::VectorXd v = bump_values(spec, spec.centers[0], box);
  CHECK(v[static_cast<Eigen::Index>(box.index(Site{12, 0}))] == 1.0);
  CHECK(v[static_cast<Eigen::Index>(box.index(Site{12 + 2, 0}))] == 1.0);   // |x| = 0.5
  CHECK(v[static_cast<Eigen::Index>(box.index(Site{12 + 4, 0}))] == 0.0);   // |x| = 1
  CHECK(v[static_cast<Eigen::Index>(box.index(Site{12 + 3, 0}))] == doctest::Approx(0.5));
  CHECK(v.minCoeff() >= 0.0);
  CHECK(v.maxCoeff() <= 1.0);
}

TEST_CASE("coupling distributions") {
  const auto u = CouplingDistribution::uniform(-1.0, 1.0);
  CHECK(u.e_infty() == 1.0);
  CHECK(u.zero_in_support());
  CHECK(u.mean() == 0.0);
  CHECK(u.variance() == doctest::Approx(1.0 / 3.0));
  CHECK(u.window_mass(-0.5, 0.5) == doctest::Approx(0.5));

  const auto at = CouplingDistribution::atomic({0.0, 1.0}, {0.5, 0.5});
  CHECK(at.e_minus() == 0.0);
  CHECK(at.e_plus() == 1.0);
  CHECK(at.support().size() == 2);
  CHECK(at.window_mass(0.99, 1.01) == doctest::Approx(0.5));
  CHECK(at.variance() == doctest::Approx(0.25));

  const auto mix = CouplingDistribution::mixture({CouplingDistribution::uniform(-1, 0),
                                                  CouplingDistribution::uniform(-0.5, 2)},
                                                 {0.25, 0.75});
  REQUIRE(mix.support().size() == 1);
  CHECK(mix.support()[0].lo == -1.0);
  CHECK(mix.support()[0].hi == 2.0);
  CHECK(mix.e_infty() == 2.0);
  CHECK(mix.mean() == doctest::Approx(0.25 * -0.5 + 0.75 * 0.75));

  CHECK_THROWS_AS(CouplingDistribution::atomic({0.0}, {0.5}), ArgumentError);
  CHECK_THROWS_AS(CouplingDistribution::uniform(1.0, 1.0), ArgumentError);

  for (const auto& d : {u, at, mix}) {
    const auto back = CouplingDistribution::from_json(d.to_json());
    CHECK(back.to_json() == d.to_json());
  }
  CHECK_THROWS_AS(CouplingDistribution::from_json({{"kind", "uniform"}, {"lo", 0}, {"hi", 1}, {"x", 2}}),
                  ArgumentError);

  // Same seed, same stream; draws stay inside the support.
  auto g1 = keyed_engine(5, 0), g2 = keyed_engine(5, 0), g3 = keyed_engine(5, 1);
  int same_as_other_key = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = mix.draw(g1);
    CHECK(x == mix.draw(g2));
    if (x == mix.draw(g3)) ++same_as_other_key;
    CHECK(x >= -1.0);
    CHECK(x <= 2.0);
  }
  CHECK(same_as_other_key == 0);
}

TEST_CASE("realizations") {
  const auto spec = build_support(4, 2, 1, BumpProfile(0.5));
  LatticeBox box(1, 16);
  const auto mu = CouplingDistribution::uniform(-1.0, 1.0);
  const auto r1 = sample_realization(spec, mu, 0.3, 11, box);
  const auto r2 = sample_realization(spec, mu, 0.3, 11, box);
  CHECK(r1.couplings == r2.couplings);
  CHECK(r1.couplings != sample_realization(spec, mu, 0.3, 12, box).couplings);
  CHECK(r1.hamiltonian.symmetry() == Symmetry::Symmetric);
  CHECK(operator_norm(r1.potential) <= mu.e_infty());
  CHECK(((r1.hamiltonian - build_laplacian(box)) - 0.3 * r1.potential).max_abs_entry() < 1e-15);
  // V = sum omega_k phi_k.
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(33);
  for (std::size_t k = 0; k < spec.centers.size(); ++k)
    expect += r1.couplings[k] * bump_values(spec, spec.centers[k], box);
  CHECK((r1.potential.dense().diagonal() - expect).cwiseAbs().maxCoeff() < 1e-15);

  const auto r3 = with_coupling(r1, spec, 2, 0.75, box);
  CHECK(r3.couplings[2] == 0.75);
  CHECK(r3.couplings[0] == r1.couplings[0]);

  CHECK_THROWS_AS(sample_realization(spec, mu, 0.3, 1, LatticeBox(1, 15)), CapacityError);

  const auto at = CouplingDistribution::atomic({0.0, 1.0}, {0.5, 0.5});
  CHECK(draw_conditioned(at, 1, 7, 0.99, 1.01).value() == 1.0);
  CHECK_FALSE(draw_conditioned(at, 1, 7, 0.3, 0.4, 1000).has_value());
  const auto w = draw_conditioned(mu, 4, 2, 0.49, 0.51);
  REQUIRE(w.has_value());
  CHECK(std::abs(*w - 0.5) < 0.01);

  const auto st = stationary_potential(LatticeBox(2, 3), mu, 9);
  CHECK(operator_norm(st) <= 1.0);
  CHECK(st.entries().nonZeros() == 49);
}

TEST_CASE("hypothesis checker") {
  SUBCASE("M = 64, K = 3, rho = 1/2 in one dimension") {
    const auto spec = build_support(64, 3, 1, BumpProfile(0.5));
    const auto rep = check_hypothesis(spec, LatticeBox(1, spec.required_half_side()));
    CHECK(rep.disjoint);
    CHECK(rep.all_bounded());
    CHECK(rep.all_plateau());
    CHECK(rep.uniformity_ok);
    CHECK(rep.commutator_uniformity <= 4.0);
    CHECK(rep.all_double_commutator_ok());
    CHECK(rep.pass());
    for (const auto& b : rep.bumps) {
      CHECK(b.center_ratio == 3.0);
      CHECK(b.double_commutator_norm < b.double_commutator_bound);
    }
    CHECK(rep.plateau_threshold == doctest::Approx(256.0));
  }
  SUBCASE("small scale fails the plateau condition") {
    // r = 2 at center 6: the cube of half side ceil(sqrt 6) = 3 leaves the plateau.
    const auto spec = build_support(4, 1, 1, BumpProfile(0.5));
    const auto rep = check_hypothesis(spec, LatticeBox(1, 8));
    CHECK(rep.disjoint);
    CHECK_FALSE(rep.all_plateau());
    CHECK_FALSE(rep.pass());
  }
  SUBCASE("two dimensions") {
    const auto spec = build_support(16, 2, 2, BumpProfile(0.5));
    const auto rep = check_hypothesis(spec, LatticeBox(2, spec.required_half_side()));
    CHECK(rep.disjoint);
    CHECK(rep.all_bounded());
    CHECK(rep.uniformity_ok);
    CHECK(rep.all_double_commutator_ok());
  }
}
