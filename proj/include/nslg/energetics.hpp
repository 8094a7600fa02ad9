#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nslg/deformation.hpp"
#include "nslg/model_full.hpp"
#include "nslg/model_perturb.hpp"
#include "nslg/state.hpp"

namespace nslg {

struct CoeffChoice {
  double delta = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
  double c0 = 1.0;
  double c1 = 1.0;
  double c_p = 1.0;
};

struct EnergyReport {
  double E = 0.0;
  double K = 0.0;
  double F_helm = 0.0;
  double D = 0.0;
};

struct FunctionalPair {
  double E = 0.0;
  double D = 0.0;
};

struct FunctionalSample {
  double t = 0.0;
  double E_total = 0.0, K = 0.0, F_helm = 0.0, D_total = 0.0;
  double Es_local = 0.0, Ds_local = 0.0;
  double Es_global = 0.0, Ds_global = 0.0;
  double E_instant = 0.0, D_instant = 0.0;
  double res_sphere = 0.0, res_det = 0.0, res_curl = 0.0, res_compat = 0.0;
  Vec3 dbar{}, ubar{}, psibar{};
};

namespace detail {

inline void require_order(int s) {
  if (s < 1 || s > kMaxSobolevOrder) throw std::invalid_argument("sobolev order must lie in [1,6]");
}

inline double quad(const Grid& g, const std::vector<double>& v) { return pairwise_sum(v) * g.cell_volume(); }

inline Vec3 mean3(const VectorField& f) {
  auto m = spatial_mean(f);
  return {m[0], m[1], m[2]};
}

}  // namespace detail

// K = int rho|v|^2/2, F = int w(rho) + A|grad M|^2 + W(F)/det F - mu0 M.H, D = viscous + lambda|M x H_eff|^2
inline EnergyReport total_energy_dissipation(const FullState& s, const VectorField& H, const Params& p) {
  const Grid& g = s.grid();
  MatrixField Jv = jacobian(s.v);
  ScalarField divv = divergence(s.v);
  MatrixField GM = jacobian(s.M);
  VectorField heff = effective_field(s.M, H, p);
  std::vector<double> k(g.size()), f(g.size()), d(g.size());
  for (std::size_t q = 0; q < g.size(); ++q) {
    const double rho = s.rho[0][q];
    Vec3 v = s.v.at(q);
    k[q] = 0.5 * rho * dot(v, v);
    Mat3 F = s.F.at(q);
    double w2 = 0.0;
    for (double x : F) w2 += x * x;
    f[q] = internal_energy_of(rho, p) + p.A * grad_sq_at(GM, q) + 0.5 * w2 / det3(F) - p.mu0 * dot(s.M.at(q), H.at(q));
    Vec3 mh = cross(s.M.at(q), heff.at(q));
    d[q] = p.mu * grad_sq_at(Jv, q) + (p.mu + p.xi) * divv[0][q] * divv[0][q] + p.lambda_d * dot(mh, mh);
  }
  EnergyReport r;
  r.K = detail::quad(g, k);
  r.F_helm = detail::quad(g, f);
  r.D = detail::quad(g, d);
  r.E = r.K + r.F_helm;
  return r;
}

inline FunctionalPair local_functionals(const FullState& s, const Params& p, int order) {
  FunctionalPair r;
  r.E = sobolev_norm_sq(s.rho, order) + sobolev_norm_sq(s.F, order) + sobolev_norm_sq(s.v, order, &s.rho) +
        sobolev_norm_sq(jacobian(s.M), order);
  r.D = p.mu * sobolev_norm_sq(jacobian(s.v), order) + (p.mu + p.xi) * sobolev_norm_sq(divergence(s.v), order) +
        2.0 * p.lambda_d * p.A * sobolev_norm_sq(laplacian(s.M), order);
  return r;
}

// same expression on the initial data
inline double local_initial_energy(const FullState& s0, const Params& p, int order) { return local_functionals(s0, p, order).E; }

inline FunctionalPair global_functionals(const PerturbState& s, int order) {
  detail::require_order(order);
  Vec3 db = detail::mean3(s.d);
  MatrixField Gd = jacobian(s.d);
  MatrixField U = gradient_matrix(s.psi);
  FunctionalPair r;
  r.E = sobolev_norm_sq(s.theta, order) + sobolev_norm_sq(s.u, order) + dot(db, db) + sobolev_norm_sq(subtract_mean(s.d), order) +
        sobolev_norm_sq(Gd, order) + sobolev_norm_sq(U, order);
  r.D = sobolev_norm_sq(jacobian(s.u), order) + sobolev_norm_sq(gradient(s.theta), order - 1) + sobolev_norm_sq(U, order) +
        sobolev_norm_sq(Gd, order) + sobolev_norm_sq(laplacian(s.d), order) + sobolev_norm_sq(divergence(s.u), order);
  return r;
}

// from full initial data: |rho0-1|^2 + |v0|^2 + |mean(M0-M_e)|^2 + |M0 - mean M0|^2 + |grad M0|^2 + |F0^{-1} - I|^2
inline double global_initial_energy(const FullState& s0, const Vec3& M_e, int order, double det_floor = 1e-6) {
  detail::require_order(order);
  ScalarField th = s0.rho;
  for (auto& x : th.c[0]) x -= 1.0;
  Vec3 mb = detail::mean3(s0.M);
  Vec3 db{mb[0] - M_e[0], mb[1] - M_e[1], mb[2] - M_e[2]};
  return sobolev_norm_sq(th, order) + sobolev_norm_sq(s0.v, order) + dot(db, db) + sobolev_norm_sq(subtract_mean(s0.M), order) +
         sobolev_norm_sq(jacobian(s0.M), order) + sobolev_norm_sq(inverse_fluctuation(s0.F, det_floor), order);
}

// w(theta) = (1+theta)^(gamma-2)
inline ScalarField weight_w(const ScalarField& theta, const Params& p) {
  ScalarField w(theta.grid);
  for (std::size_t q = 0; q < theta.points(); ++q) {
    double r = 1.0 + theta[0][q];
    if (!(r > 0.0)) throw ModelError(ErrorKind::vacuum, "1+theta = " + std::to_string(r));
    w[0][q] = std::pow(r, p.gamma_p - 2.0);
  }
  return w;
}

// c0 = sup (1+theta)^(-gamma/2), c1 = sup (1+theta)^((2-gamma)/2)
inline CoeffChoice with_weight_constants(CoeffChoice c, const ScalarField& theta, const Params& p) {
  double c0 = 0.0, c1 = 0.0;
  for (double th : theta.c[0]) {
    double r = 1.0 + th;
    if (!(r > 0.0)) throw ModelError(ErrorKind::vacuum, "1+theta = " + std::to_string(r));
    c0 = std::max(c0, std::pow(r, -0.5 * p.gamma_p));
    c1 = std::max(c1, std::pow(r, 0.5 * (2.0 - p.gamma_p)));
  }
  c.c0 = c0;
  c.c1 = c1;
  return c;
}

struct InstantReport {
  double E = 0.0;
  double D = 0.0;
  std::array<double, 11> E_terms{};
  std::array<double, 10> D_terms{};
};

inline InstantReport instant_functionals(const PerturbState& s, const Params& p, int order, const CoeffChoice& c) {
  detail::require_order(order);
  const double ag = p.a * p.gamma_p;
  const double eps = c.epsilon, del = c.delta, eta = c.eta;
  ScalarField w = weight_w(s.theta, p);
  ScalarField rho = s.theta;
  for (auto& x : rho.c[0]) x += 1.0;
  VectorField gth = gradient(s.theta);
  Vec3 db = detail::mean3(s.d);
  MatrixField Gd = jacobian(s.d);
  MatrixField Gpsi = gradient_matrix(s.psi);
  MatrixField Gu = jacobian(s.u);
  ScalarField divu = divergence(s.u);
  ScalarField divpsi = divergence(s.psi);
  VectorField u_gth = s.u;
  u_gth += gth;

  const double gpsi2 = sobolev_norm_sq(Gpsi, order);
  const double gu2 = sobolev_norm_sq(Gu, order);
  const double divu2 = sobolev_norm_sq(divu, order);

  InstantReport r;
  auto& e = r.E_terms;
  e[0] = eps * ag * sobolev_norm_sq(s.theta, order, &w);
  e[1] = eps * sobolev_norm_sq(s.u, order, &rho);
  e[2] = eps * eta * sobolev_norm_sq(u_gth, order - 1);
  e[3] = -eps * eta * sobolev_norm_sq(s.u, order - 1);
  e[4] = -eps * eta * sobolev_norm_sq(gth, order - 1);
  e[5] = dot(db, db);
  e[6] = sobolev_norm_sq(subtract_mean(s.d), order);
  e[7] = sobolev_norm_sq(Gd, order);
  e[8] = del * gpsi2;
  e[9] = del * sobolev_norm_sq(subtract_mean(s.u), order);
  e[10] = -(2.0 * del / p.mu) * sobolev_inner(subtract_mean(s.psi), s.u, order);

  const double X = std::sqrt(gu2);
  const double Y = std::sqrt(divu2);
  const double Z = std::sqrt(gpsi2);
  const double W = std::sqrt(sobolev_norm_sq(gth, order - 1, &w));
  auto& d = r.D_terms;
  d[0] = (eps * p.mu + del * p.mu - del * c.c_p / p.mu) * gu2;
  d[1] = (eps + del) * (p.mu + p.xi) * divu2;
  d[2] = eps * eta * ag * sobolev_norm_sq(gth, order, &w);
  d[3] = (del / p.mu) * gpsi2;
  d[4] = -(eps + del) * sobolev_inner(Gpsi, Gu, order);
  d[5] = -((p.mu + p.xi) / p.mu) * del * sobolev_inner(divpsi, divu, order);
  d[6] = -c.c0 * eps * eta * (p.mu * X + (p.mu + p.xi) * Y + Z) * W;
  d[7] = -c.c1 * del * ag * (p.mu * X + Z) * W;
  d[8] = 2.0 * p.A * p.lambda_d * sobolev_norm_sq(Gd, order);
  d[9] = 2.0 * p.A * p.lambda_d * sobolev_norm_sq(laplacian(s.d), order);

  r.E = pairwise_sum(e.data(), e.size());
  r.D = pairwise_sum(d.data(), d.size());
  return r;
}

}  // namespace nslg
