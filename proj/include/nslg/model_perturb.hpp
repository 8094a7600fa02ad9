#pragma once

#include <cmath>

#include "nslg/deformation.hpp"
#include "nslg/model_full.hpp"
#include "nslg/state.hpp"

namespace nslg {

struct PerturbRhs {
  ScalarField d_theta;
  VectorField d_u;
  VectorField d_psi;
  VectorField d_d;
};

struct PerturbOptions {
  bool dealias = true;
  bool check_compatibility = false;
  double consistency_tol = 1e-8;
  double rho_floor = 1e-8;
};

// (u.grad) psi^i = u_j d_j psi^i
inline VectorField psi_transport(const PerturbState& s, const MatrixField& U, bool masked) {
  VectorField t = transport<3>(s.u, U);
  if (masked) dealias(t);
  return t;
}

inline PerturbRhs perturb_rhs(const PerturbState& s, const Params& p, const PerturbOptions& o = {}) {
  const Grid& g = s.grid();
  for (std::size_t q = 0; q < g.size(); ++q)
    if (!(1.0 + s.theta[0][q] > o.rho_floor)) throw ModelError(ErrorKind::vacuum, "1+theta = " + std::to_string(1.0 + s.theta[0][q]));
  MatrixField U = gradient_matrix(s.psi);
  if (o.check_compatibility) detail::check_link(s.theta, U, o.consistency_tol);

  PerturbRhs r{ScalarField(g), VectorField(g), VectorField(g), VectorField(g)};

  ScalarField gt = gtilde_remainder(U);
  gt *= -1.0;
  MatrixField Ju = jacobian(s.u);
  ScalarField divu = divergence(s.u);
  VectorField gth = gradient(s.theta);
  MatrixField Gd = jacobian(s.d);

  for (std::size_t q = 0; q < g.size(); ++q) {
    double ug = s.u.c[0][q] * gth.c[0][q] + s.u.c[1][q] * gth.c[1][q] + s.u.c[2][q] * gth.c[2][q];
    r.d_theta[0][q] = -ug - (1.0 + s.theta[0][q]) * divu[0][q];
  }

  ScalarField Q(g);
  ScalarField tg(g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    Q[0][q] = pressure_of(1.0 + s.theta[0][q], p) - p.A * grad_sq_at(Gd, q) + gt[0][q];
    tg[0][q] = s.theta[0][q] + gt[0][q];
  }
  VectorField gQ = gradient(Q);
  VectorField gtg = gradient(tg);
  VectorField lapu = laplacian(s.u);
  VectorField gdu = gradient(divu);
  VectorField lappsi = laplacian(s.psi);
  VectorField adv = transport<3>(s.u, Ju);

  MatrixField T(g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (std::size_t q = 0; q < g.size(); ++q) {
        double acc = 0.0;
        for (int a = 0; a < 3; ++a) acc += Gd.c[mi(a, i)][q] * Gd.c[mi(a, j)][q];
        T.c[mi(i, j)][q] = acc;
      }
  VectorField divT = divergence(T);

  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < g.size(); ++q) {
      const double th = s.theta[0][q];
      double ugt = 0.0;
      for (int j = 0; j < 3; ++j) ugt += U.c[mi(i, j)][q] * gth.c[j][q];
      double mom = -(1.0 + th) * adv.c[i][q] - gQ.c[i][q] + p.mu * lapu.c[i][q] + (p.mu + p.xi) * gdu.c[i][q] -
                   (1.0 + th) * lappsi.c[i][q] - 2.0 * ugt - th * gtg.c[i][q] - 2.0 * p.A * divT.c[i][q];
      r.d_u.c[i][q] = mom / (1.0 + th);
    }

  VectorField tp = psi_transport(s, U, false);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < g.size(); ++q) r.d_psi.c[i][q] = -s.u.c[i][q] - tp.c[i][q];

  VectorField lapd = laplacian(s.d);
  VectorField ud = transport<3>(s.u, Gd);
  const double k = 2.0 * p.A;
  for (std::size_t q = 0; q < g.size(); ++q) {
    Vec3 m{s.d.c[0][q] + s.M_e[0], s.d.c[1][q] + s.M_e[1], s.d.c[2][q] + s.M_e[2]};
    Vec3 a{ud.c[0][q], ud.c[1][q], ud.c[2][q]};
    double ma = dot(m, a) / dot(m, m);
    Vec3 ld = lapd.at(q);
    Vec3 mxl = cross(m, ld);
    double gd2 = grad_sq_at(Gd, q);
    for (int i = 0; i < 3; ++i)
      r.d_d.c[i][q] = -(a[i] - ma * m[i]) + k * p.lambda_d * ld[i] + k * p.lambda_d * gd2 * m[i] - k * p.gamma_g * mxl[i];
  }

  if (o.dealias) {
    dealias(r.d_theta);
    dealias(r.d_u);
    dealias(r.d_psi);
  }
  return r;
}

// w = mu (u - mean u) - (psi - mean psi)
inline VectorField aux_w(const PerturbState& s, const Params& p) {
  VectorField w = subtract_mean(s.u);
  w *= p.mu;
  w -= subtract_mean(s.psi);
  return w;
}

// max |lap(d_psi) + lap(psi)/mu + lap(w)/mu + lap(u.grad psi)|
inline double psi_wave_residual(const PerturbState& s, const PerturbRhs& sd, const Params& p, bool dealiased = true) {
  VectorField a = laplacian(sd.d_psi);
  VectorField b = laplacian(s.psi);
  VectorField c = laplacian(aux_w(s, p));
  VectorField d = laplacian(psi_transport(s, gradient_matrix(s.psi), dealiased));
  double m = 0.0;
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < s.grid().size(); ++q)
      m = std::max(m, std::abs(a.c[i][q] + (b.c[i][q] + c.c[i][q]) / p.mu + d.c[i][q]));
  return m;
}

inline Vec3 dbar_rhs(const PerturbState& s, const Params& p) {
  const Grid& g = s.grid();
  ScalarField divu = divergence(s.u);
  MatrixField Gd = jacobian(s.d);
  auto dbar = spatial_mean(s.d);
  Vec3 out{};
  for (int i = 0; i < 3; ++i) {
    std::vector<double> t(g.size());
    for (std::size_t q = 0; q < g.size(); ++q)
      t[q] = divu[0][q] * (s.d.c[i][q] - dbar[i]) +
             2.0 * p.A * p.lambda_d * grad_sq_at(Gd, q) * (s.d.c[i][q] - dbar[i] + s.M_e[i] + dbar[i]);
    out[i] = pairwise_sum(t) / static_cast<double>(g.size());
  }
  return out;
}

inline double sphere_constraint_residual(const PerturbState& s) {
  double m = 0.0;
  for (std::size_t q = 0; q < s.grid().size(); ++q) {
    Vec3 d = s.d.at(q);
    m = std::max(m, std::abs(dot(d, d) + 2.0 * dot(s.M_e, d)));
  }
  return m;
}

inline PerturbState axpy(const PerturbState& y, double h, const PerturbRhs& k) {
  PerturbState out = y;
  auto upd = [h](auto& dst, const auto& src) {
    for (std::size_t c = 0; c < dst.c.size(); ++c)
      for (std::size_t q = 0; q < dst.c[c].size(); ++q) dst.c[c][q] += h * src.c[c][q];
  };
  upd(out.theta, k.d_theta);
  upd(out.u, k.d_u);
  upd(out.psi, k.d_psi);
  upd(out.d, k.d_d);
  return out;
}

inline PerturbRhs operator+(PerturbRhs a, const PerturbRhs& b) {
  a.d_theta += b.d_theta;
  a.d_u += b.d_u;
  a.d_psi += b.d_psi;
  a.d_d += b.d_d;
  return a;
}

}  // namespace nslg
