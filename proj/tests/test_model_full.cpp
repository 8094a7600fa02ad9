#include <gtest/gtest.h>

#include <cmath>

#include "nslg/model_full.hpp"

using namespace nslg;

namespace {

template <std::size_t NC>
Field<NC> gen(const Grid& g, auto fn) {
  return Field<NC>::generate(g, [&](const std::array<double, 3>& x) { return fn(x); });
}

double tangency(const VectorField& M, const VectorField& dM) {
  double m = 0.0;
  for (std::size_t q = 0; q < M.points(); ++q) m = std::max(m, std::abs(dot(M.at(q), dM.at(q))));
  return m;
}

FullState compatible_pair(const Grid& g, double eps) {
  PerturbState s = zero_perturbation(g, {0, 0, 1});
  s.psi = gen<3>(g, [eps](auto x) { return std::array<double, 3>{eps * std::sin(x[0]), eps * std::sin(x[1]), 0.0}; });
  make_compatible(s);
  return recompose(s);
}

}  // namespace

TEST(Eos, Values) {
  Grid g = Grid::cube(1, 8);
  Params p;
  auto e = eos(ScalarField(g, 2.0), p);
  EXPECT_DOUBLE_EQ(e.pressure[0][3], 4.0);
  EXPECT_DOUBLE_EQ(e.internal_energy[0][3], 4.0);
  e = eos(ScalarField(g, 1.0), p);
  EXPECT_DOUBLE_EQ(e.pressure[0][0], 1.0);
  EXPECT_DOUBLE_EQ(e.internal_energy[0][0], 1.0);
  Params q;
  q.a = 0.5;
  q.gamma_p = 1.4;
  // mpmath, 40 digits: 0.6453922541595420718895909704481058025516
  EXPECT_NEAR(eos(ScalarField(g, 1.2), q).pressure[0][0], 0.64539225415954207189, 1e-15);
  EXPECT_THROW(eos(ScalarField(g, 0.0), p), std::domain_error);
}

TEST(Eos, ThermodynamicIdentity) {
  Params p;
  p.a = 0.7;
  p.gamma_p = 1.67;
  for (double r : {0.5, 1.0, 1.3, 2.0}) {
    double h = 1e-6;
    double wprime = (internal_energy_of(r + h, p) - internal_energy_of(r - h, p)) / (2 * h);
    EXPECT_NEAR(wprime * r - internal_energy_of(r, p), pressure_of(r, p), 1e-8);
  }
}

TEST(EffectiveField, Cases) {
  Grid g = Grid::cube(2, 16);
  Params p;
  p.A = 0.7;
  p.mu0 = 1.5;
  VectorField Mc(g);
  std::fill(Mc.c[2].begin(), Mc.c[2].end(), 1.0);
  EXPECT_LE(max_abs(effective_field(Mc, VectorField(g), p)), 1e-14);
  auto H = ExternalField::constant(g, {0, 0, 2.0}).static_field();
  auto h = effective_field(Mc, H, p);
  EXPECT_NEAR(h.c[2][7], 3.0, 1e-14);
  EXPECT_NEAR(h.c[0][7], 0.0, 1e-14);
  const double r2 = std::sqrt(2.0);
  auto M = gen<3>(g, [r2](auto x) { return std::array<double, 3>{std::sin(x[0]) / r2, std::cos(x[0]) / r2, 1 / r2}; });
  auto ref = gen<3>(g, [&](auto x) {
    return std::array<double, 3>{-2 * p.A * std::sin(x[0]) / r2, -2 * p.A * std::cos(x[0]) / r2, 2 * p.mu0};
  });
  EXPECT_LE(max_abs_diff(effective_field(M, H, p), ref), 1e-10);
}

TEST(LagrangeMultiplier, Cases) {
  Grid g = Grid::cube(2, 8);
  Params p;
  VectorField M(g);
  std::fill(M.c[2].begin(), M.c[2].end(), 1.0);
  EXPECT_EQ(max_abs(lagrange_multiplier(M, MatrixField(g), VectorField(g), p)), 0.0);
  Params q;
  q.lambda_d = 2;
  q.A = 0.5;
  MatrixField G(g);
  std::fill(G.c[0].begin(), G.c[0].end(), std::sqrt(3.0));
  EXPECT_NEAR(lagrange_multiplier(M, G, VectorField(g), q)[0][5], 6.0, 1e-14);
  auto H = ExternalField::constant(g, {0, 0, 2}).static_field();
  EXPECT_NEAR(lagrange_multiplier(M, MatrixField(g), H, p)[0][1], -2.0, 1e-15);
}

TEST(Llg, EquilibriumAndMacrospin) {
  Grid g = Grid::cube(2, 8);
  Params p;
  p.gamma_g = 0.7;
  p.lambda_d = 0.3;
  p.A = 2.3;
  VectorField Me(g);
  std::fill(Me.c[2].begin(), Me.c[2].end(), 1.0);
  for (auto f : {LlgForm::cross, LlgForm::multiplier}) EXPECT_LE(max_abs(llg_rhs(Me, VectorField(g), VectorField(g), p, f)), 1e-15);
  VectorField M(g);
  std::fill(M.c[0].begin(), M.c[0].end(), 1.0);
  auto H = ExternalField::constant(g, {0, 0, 1}).static_field();
  auto r = llg_rhs(M, VectorField(g), H, p, LlgForm::cross);
  EXPECT_NEAR(r.c[0][4], 0.0, 1e-15);
  EXPECT_NEAR(r.c[1][4], p.gamma_g, 1e-15);
  EXPECT_NEAR(r.c[2][4], p.lambda_d, 1e-15);
}

TEST(Llg, FormEquivalenceAndTangency) {
  Grid g = Grid::cube(2, 64);
  Params p;
  p.gamma_g = 0.8;
  p.lambda_d = 0.6;
  p.A = 0.9;
  auto H = gen<3>(g, [](auto x) { return std::array<double, 3>{0.3 * std::sin(x[1]), 0.1, 1.0 + 0.2 * std::cos(x[0])}; });
  auto v = gen<3>(g, [](auto x) { return std::array<double, 3>{std::sin(x[1]), std::cos(x[0]), 0.2}; });
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto M = random_unit_field(g, {0, 0, 1}, 0.2, seed, 2);
    auto a = llg_rhs(M, v, H, p, LlgForm::cross);
    auto b = llg_rhs(M, v, H, p, LlgForm::multiplier);
    double scale = std::max(1.0, max_abs(a));
    EXPECT_LE(max_abs_diff(a, b), 1e-9 * scale);
    EXPECT_LE(tangency(M, a), 1e-11 * scale);
    EXPECT_LE(tangency(M, b), 1e-9 * scale);
  }
}

TEST(FullRhs, EquilibriumIsFixedPoint) {
  Grid g = Grid::cube(2, 16);
  auto r = full_rhs(equilibrium_state(g, {0, 0, 1}), VectorField(g), Params{});
  EXPECT_LE(max_abs(r.d_rho) + max_abs(r.d_v) + max_abs(r.d_F) + max_abs(r.d_M), 1e-12);
}

TEST(FullRhs, ShearFlow) {
  Grid g = Grid::cube(2, 32);
  Params p;
  p.mu = 0.7;
  auto s = equilibrium_state(g, {0, 0, 1});
  s.v = gen<3>(g, [](auto x) { return std::array<double, 3>{std::sin(x[1]), 0.0, 0.0}; });
  auto r = full_rhs(s, VectorField(g), p);
  auto ref = gen<3>(g, [&](auto x) { return std::array<double, 3>{-p.mu * std::sin(x[1]), 0.0, 0.0}; });
  EXPECT_LE(max_abs_diff(r.d_v, ref), 1e-12);
  EXPECT_LE(max_abs(r.d_rho), 1e-13);
  for (std::size_t q = 0; q < g.size(); ++q) {
    for (int c = 0; c < 9; ++c) {
      double want = c == static_cast<int>(mi(0, 1)) ? std::cos(g.point(q)[1]) : 0.0;
      EXPECT_NEAR(r.d_F.c[c][q], want, 1e-12);
    }
  }
  EXPECT_LE(max_abs(r.d_M), 1e-14);
}

TEST(FullRhs, PressureAndElasticAgainstRefinedGrid) {
  Params p;
  auto build = [](const Grid& g) {
    auto s = compatible_pair(g, 0.05);
    s.rho = gen<1>(g, [](auto x) { return 1.0 + 0.1 * std::sin(x[0]); });
    return s;
  };
  auto reference = [&](const Grid& g) {
    auto s = build(g);
    auto e = eos(s.rho, p);
    VectorField gp = gradient(e.pressure);
    VectorField el = stress_divergence_elastic(s.rho, s.F);
    VectorField out(g);
    for (int i = 0; i < 3; ++i)
      for (std::size_t q = 0; q < g.size(); ++q) out.c[i][q] = (-gp.c[i][q] + el.c[i][q]) / s.rho[0][q];
    return out;
  };
  Grid coarse = Grid::cube(2, 32);
  Grid fine = Grid::cube(2, 128);
  auto r = full_rhs(build(coarse), VectorField(coarse), p);
  auto ref = reference(fine);
  double err = 0.0;
  for (std::size_t q = 0; q < coarse.size(); ++q) {
    auto ix = coarse.index(q);
    std::size_t qf = static_cast<std::size_t>(4 * ix[0]) * 128 + static_cast<std::size_t>(4 * ix[1]);
    for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(r.d_v.c[i][q] - ref.c[i][qf]));
  }
  EXPECT_LE(err, 1e-8);
}

TEST(FullRhs, FloorsAreErrors) {
  Grid g = Grid::cube(2, 8);
  auto s = equilibrium_state(g, {0, 0, 1});
  s.rho[0][3] = 0.0;
  try {
    full_rhs(s, VectorField(g), Params{});
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::vacuum);
  }
  auto t = equilibrium_state(g, {0, 0, 1});
  t.F.c[0][2] = 0.0;
  try {
    full_rhs(t, VectorField(g), Params{});
    FAIL();
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_deformation);
  }
}

TEST(StressDivergence, Cases) {
  Grid g = Grid::cube(2, 32);
  auto s = equilibrium_state(g, {0, 0, 1});
  EXPECT_LE(max_abs(stress_divergence_elastic(s.rho, s.F)), 1e-14);
  s.rho = gen<1>(g, [](auto x) { return 1.0 + 0.2 * std::sin(x[0]); });
  auto ref = gen<3>(g, [](auto x) { return std::array<double, 3>{0.2 * std::cos(x[0]), 0.0, 0.0}; });
  EXPECT_LE(max_abs_diff(stress_divergence_elastic(s.rho, s.F), ref), 1e-13);
}

TEST(StressDivergence, CompletedReformulationMatchesDirect) {
  Grid g = Grid::cube(2, 32);
  for (double eps : {1e-2, 5e-2}) {
    auto s = compatible_pair(g, eps);
    auto direct = stress_divergence_elastic(s.rho, s.F);
    MatrixField U = inverse_fluctuation(s.F);
    ScalarField theta = s.rho;
    for (auto& x : theta[0]) x -= 1.0;
    VectorField psi = recover_psi(U);
    EXPECT_LE(max_abs_diff(direct, reformulated_elastic_div_exact(theta, psi, U, Params{})), 1e-9);
  }
}

TEST(StressDivergence, PrintedReformulationMissesQuadraticTerms) {
  Grid g = Grid::cube(2, 32);
  std::vector<double> res;
  for (double eps : {1e-2, 5e-3}) {
    auto s = compatible_pair(g, eps);
    MatrixField U = inverse_fluctuation(s.F);
    ScalarField theta = s.rho;
    for (auto& x : theta[0]) x -= 1.0;
    res.push_back(max_abs_diff(stress_divergence_elastic(s.rho, s.F), reformulated_elastic_div(theta, recover_psi(U), U, Params{})));
  }
  EXPECT_GT(res[0], 1e-5);
  EXPECT_NEAR(res[0] / res[1], 4.0, 0.2);
}

TEST(FullRhsInvariants, MassConservation) {
  Grid g = Grid::cube(2, 32);
  auto ps = random_perturbation(g, {0, 0, 1}, 1e-1, 3, {.compatible = true});
  auto s = recompose(ps);
  auto r = full_rhs(s, VectorField(g), Params{});
  EXPECT_LE(std::abs(spatial_mean(r.d_rho)[0]), 1e-13);
}

TEST(FullRhsInvariants, TangencyBothForms) {
  Grid g = Grid::cube(2, 32);
  auto ps = random_perturbation(g, {0, 0, 1}, 1e-1, 5, {.compatible = true});
  auto s = recompose(ps);
  auto H = ExternalField::constant(g, {0.2, 0, 1}).static_field();
  for (auto f : {LlgForm::cross, LlgForm::multiplier}) {
    auto r = full_rhs(s, H, Params{}, {.llg = f});
    EXPECT_LE(tangency(s.M, r.d_M), 1e-11 * std::max(1.0, max_abs(r.d_M)));
  }
}

TEST(FullRhsInvariants, MomentumAssemblyEquivalence) {
  Grid g = Grid::cube(2, 32);
  auto s = recompose(random_perturbation(g, {0, 0, 1}, 1e-1, 9, {.compatible = true}));
  EXPECT_LE(max_abs_diff(hookean_stress_from_energy(s.F), rho_ffT(s.rho, s.F)), 1e-12);
}

TEST(FullRhsInvariants, GalileanShiftOnlyChangesTransport) {
  Grid g = Grid::cube(2, 32);
  auto s = recompose(random_perturbation(g, {0, 0, 1}, 1e-1, 13, {.compatible = true}));
  auto H = ExternalField::constant(g, {0, 0.3, 1}).static_field();
  Params p;
  auto t0 = momentum_terms(s, H, p);
  auto s1 = s;
  const Vec3 c{0.4, -0.2, 0.1};
  for (int i = 0; i < 3; ++i)
    for (auto& x : s1.v.c[i]) x += c[i];
  auto t1 = momentum_terms(s1, H, p);
  EXPECT_LE(max_abs_diff(t0.pressure, t1.pressure), 1e-14);
  EXPECT_LE(max_abs_diff(t0.viscous, t1.viscous), 1e-12);
  EXPECT_LE(max_abs_diff(t0.elastic, t1.elastic), 1e-14);
  EXPECT_LE(max_abs_diff(t0.ericksen, t1.ericksen), 1e-14);
  MatrixField J = jacobian(s.v);
  VectorField shift(g);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < g.size(); ++q) {
      double acc = 0.0;
      for (int j = 0; j < 3; ++j) acc += c[j] * J.c[mi(i, j)][q];
      shift.c[i][q] = t0.advection.c[i][q] - s.rho[0][q] * acc;
    }
  EXPECT_LE(max_abs_diff(t1.advection, shift), 1e-13);
}
