#pragma once

#include <cmath>
#include <stdexcept>

#include "nslg/deformation.hpp"
#include "nslg/errors.hpp"
#include "nslg/grid.hpp"
#include "nslg/params.hpp"
#include "nslg/state.hpp"

namespace nslg {

struct FullRhs {
  ScalarField d_rho;
  VectorField d_v;
  MatrixField d_F;
  VectorField d_M;
};

struct EosFields {
  ScalarField pressure;
  ScalarField internal_energy;
};

inline double pressure_of(double rho, const Params& p) { return p.a * std::pow(rho, p.gamma_p); }
inline double internal_energy_of(double rho, const Params& p) { return p.a / (p.gamma_p - 1.0) * std::pow(rho, p.gamma_p); }

inline EosFields eos(const ScalarField& rho, const Params& p) {
  EosFields out{ScalarField(rho.grid), ScalarField(rho.grid)};
  for (std::size_t q = 0; q < rho.points(); ++q) {
    double r = rho[0][q];
    if (!(r > 0.0)) throw std::domain_error("eos: nonpositive density " + std::to_string(r));
    out.pressure[0][q] = pressure_of(r, p);
    out.internal_energy[0][q] = internal_energy_of(r, p);
  }
  return out;
}

// H_eff = 2A lap M + mu0 H_ext
inline VectorField effective_field(const VectorField& M, const VectorField& H, const Params& p) {
  VectorField out = laplacian(M);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < M.points(); ++q) out.c[i][q] = 2.0 * p.A * out.c[i][q] + p.mu0 * H.c[i][q];
  return out;
}

inline double grad_sq_at(const MatrixField& G, std::size_t q) {
  double s = 0.0;
  for (const auto& pl : G.c) s += pl[q] * pl[q];
  return s;
}

// Gamma = 2 lambda A |grad M|^2 - lambda mu0 M.H
inline ScalarField lagrange_multiplier(const VectorField& M, const MatrixField& grad_M, const VectorField& H, const Params& p) {
  ScalarField out(M.grid);
  for (std::size_t q = 0; q < M.points(); ++q)
    out[0][q] = 2.0 * p.lambda_d * p.A * grad_sq_at(grad_M, q) - p.lambda_d * p.mu0 * dot(M.at(q), H.at(q));
  return out;
}

enum class LlgForm { cross, multiplier };

// (v.grad) f_a = v_j d_j f_a, with G = jacobian(f)
template <std::size_t NC>
Field<NC> transport(const VectorField& v, const Field<NC * 3>& G) {
  Field<NC> out(v.grid);
  for (std::size_t a = 0; a < NC; ++a)
    for (int j = 0; j < 3; ++j)
      for (std::size_t q = 0; q < v.points(); ++q) out.c[a][q] += v.c[j][q] * G.c[3 * a + j][q];
  return out;
}

inline Field<27> jacobian9(const MatrixField& F) {
  Field<27> out(F.grid);
  for (int c = 0; c < 9; ++c) {
    auto g = gradient_plane(F.grid, F.c[c]);
    for (int j = 0; j < 3; ++j) out.c[3 * c + j] = std::move(g[j]);
  }
  return out;
}

// transport is projected onto the tangent plane of M
inline VectorField llg_rhs(const VectorField& M, const VectorField& v, const VectorField& H, const Params& p, LlgForm form) {
  MatrixField GM = jacobian(M);
  VectorField lapM = laplacian(M);
  VectorField adv = transport<3>(v, GM);
  VectorField out(M.grid);
  for (std::size_t q = 0; q < M.points(); ++q) {
    Vec3 m = M.at(q);
    Vec3 lm = lapM.at(q);
    Vec3 h = H.at(q);
    Vec3 heff{2.0 * p.A * lm[0] + p.mu0 * h[0], 2.0 * p.A * lm[1] + p.mu0 * h[1], 2.0 * p.A * lm[2] + p.mu0 * h[2]};
    Vec3 mxh = cross(m, heff);
    Vec3 a{adv.c[0][q], adv.c[1][q], adv.c[2][q]};
    double ma = dot(m, a) / dot(m, m);
    for (int i = 0; i < 3; ++i) adv.c[i][q] = a[i] - ma * m[i];
    Vec3 r{};
    if (form == LlgForm::cross) {
      Vec3 mmh = cross(m, mxh);
      for (int i = 0; i < 3; ++i) r[i] = -adv.c[i][q] - p.gamma_g * mxh[i] - p.lambda_d * mmh[i];
    } else {
      double gam = 2.0 * p.lambda_d * p.A * grad_sq_at(GM, q) - p.lambda_d * p.mu0 * dot(m, h);
      for (int i = 0; i < 3; ++i)
        r[i] = -adv.c[i][q] + 2.0 * p.A * p.lambda_d * lm[i] + p.lambda_d * p.mu0 * h[i] + gam * m[i] - p.gamma_g * mxh[i];
    }
    out.set(q, r);
  }
  return out;
}

inline MatrixField rho_ffT(const ScalarField& rho, const MatrixField& F) {
  MatrixField S(F.grid);
  for (std::size_t q = 0; q < F.points(); ++q) {
    Mat3 f = F.at(q);
    Mat3 s = matmul(f, transpose(f));
    for (auto& x : s) x *= rho[0][q];
    S.set(q, s);
  }
  return S;
}

// (div (rho F F^T))_i = d_j (rho F^{ik} F^{jk})
inline VectorField stress_divergence_elastic(const ScalarField& rho, const MatrixField& F) {
  return divergence(rho_ffT(rho, F));
}

// W'(F) F^T / det F with W = |F|^2 / 2
inline MatrixField hookean_stress_from_energy(const MatrixField& F) {
  MatrixField S(F.grid);
  for (std::size_t q = 0; q < F.points(); ++q) {
    Mat3 f = F.at(q);
    Mat3 s = matmul(f, transpose(f));
    double d = det3(f);
    for (auto& x : s) x /= d;
    S.set(q, s);
  }
  return S;
}

struct ModelOptions {
  LlgForm llg = LlgForm::cross;
  bool dealias = true;
  double rho_floor = 1e-8;
  double det_floor = 1e-6;
};

inline void check_full_state(const FullState& s, const ModelOptions& o) {
  for (std::size_t q = 0; q < s.grid().size(); ++q) {
    if (!(s.rho[0][q] > o.rho_floor)) throw ModelError(ErrorKind::vacuum, "rho = " + std::to_string(s.rho[0][q]));
    double d = det3(s.F.at(q));
    if (!(d > o.det_floor)) throw ModelError(ErrorKind::degenerate_deformation, "det F = " + std::to_string(d));
  }
}

struct MomentumTerms {
  VectorField advection;   // -rho v.grad v
  VectorField pressure;    // -grad(P - A|grad M|^2 + mu0 M.H)
  VectorField viscous;     // mu lap v + (mu+xi) grad div v
  VectorField elastic;     // div(rho F F^T)
  VectorField ericksen;    // -2A div(grad M (.) grad M)
  VectorField field;       // mu0 (grad H)^T M
};

inline MomentumTerms momentum_terms(const FullState& s, const VectorField& H, const Params& p) {
  const Grid& g = s.grid();
  MatrixField J = jacobian(s.v);
  MatrixField GM = jacobian(s.M);
  MomentumTerms t{transport<3>(s.v, J), VectorField(g), laplacian(s.v), stress_divergence_elastic(s.rho, s.F),
                  VectorField(g), VectorField(g)};
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < g.size(); ++q) t.advection.c[i][q] *= -s.rho[0][q];

  ScalarField Q(g);
  for (std::size_t q = 0; q < g.size(); ++q)
    Q[0][q] = pressure_of(s.rho[0][q], p) - p.A * grad_sq_at(GM, q) + p.mu0 * dot(s.M.at(q), H.at(q));
  t.pressure = gradient(Q);
  t.pressure *= -1.0;

  VectorField gd = grad_div(s.v);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < g.size(); ++q) t.viscous.c[i][q] = p.mu * t.viscous.c[i][q] + (p.mu + p.xi) * gd.c[i][q];

  MatrixField T(g);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (std::size_t q = 0; q < g.size(); ++q) {
        double acc = 0.0;
        for (int a = 0; a < 3; ++a) acc += GM.c[mi(a, i)][q] * GM.c[mi(a, j)][q];
        T.c[mi(i, j)][q] = acc;
      }
  t.ericksen = divergence(T);
  t.ericksen *= -2.0 * p.A;

  if (p.mu0 != 0.0) {
    MatrixField JH = jacobian(H);
    for (int i = 0; i < 3; ++i)
      for (std::size_t q = 0; q < g.size(); ++q) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += s.M.c[j][q] * JH.c[mi(j, i)][q];
        t.field.c[i][q] = p.mu0 * acc;
      }
  }
  return t;
}

inline FullRhs full_rhs(const FullState& s, const VectorField& H, const Params& p, const ModelOptions& o = {}) {
  check_full_state(s, o);
  const Grid& g = s.grid();
  FullRhs r{ScalarField(g), VectorField(g), MatrixField(g), VectorField(g)};

  VectorField flux = s.v;
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < g.size(); ++q) flux.c[i][q] *= s.rho[0][q];
  r.d_rho = divergence(flux);
  r.d_rho *= -1.0;

  MomentumTerms t = momentum_terms(s, H, p);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < g.size(); ++q)
      r.d_v.c[i][q] = (t.advection.c[i][q] + t.pressure.c[i][q] + t.viscous.c[i][q] + t.elastic.c[i][q] +
                       t.ericksen.c[i][q] + t.field.c[i][q]) /
                      s.rho[0][q];

  MatrixField J = jacobian(s.v);
  Field<27> GF = jacobian9(s.F);
  MatrixField adv = transport<9>(s.v, GF);
  for (std::size_t q = 0; q < g.size(); ++q) {
    Mat3 jv = J.at(q);
    Mat3 f = s.F.at(q);
    Mat3 jf = matmul(jv, f);
    for (int c = 0; c < 9; ++c) r.d_F.c[c][q] = -adv.c[c][q] + jf[c];
  }

  r.d_M = llg_rhs(s.M, s.v, H, p, o.llg);

  if (o.dealias) {
    dealias(r.d_rho);
    dealias(r.d_v);
    dealias(r.d_F);
  }
  return r;
}

inline FullState axpy(const FullState& y, double h, const FullRhs& k) {
  FullState out = y;
  auto upd = [h](auto& dst, const auto& src) {
    for (std::size_t c = 0; c < dst.c.size(); ++c)
      for (std::size_t q = 0; q < dst.c[c].size(); ++q) dst.c[c][q] += h * src.c[c][q];
  };
  upd(out.rho, k.d_rho);
  upd(out.v, k.d_v);
  upd(out.F, k.d_F);
  upd(out.M, k.d_M);
  return out;
}

inline FullRhs operator+(FullRhs a, const FullRhs& b) {
  a.d_rho += b.d_rho;
  a.d_v += b.d_v;
  a.d_F += b.d_F;
  a.d_M += b.d_M;
  return a;
}

inline DeformationReport deformation_report(const ScalarField& rho, const MatrixField& F, const Tolerances& tol = {}) {
  DeformationReport r;
  MatrixField U = inverse_fluctuation(F, tol.det_floor);
  r.curl_residual_max = curl_residual(U);
  r.det_constraint_max = det_constraint_residual(rho, F);
  ScalarField theta = rho;
  for (auto& x : theta[0]) x -= 1.0;
  r.psi = recover_psi(U, tol.mean_tol);
  VectorField direct = stress_divergence_elastic(rho, F);
  if (compatibility_residual(theta, U) <= tol.det_consistency_tol)
    r.identity_residual_max = max_abs_diff(direct, reformulated_elastic_div_exact(theta, r.psi, U, Params{}, tol.det_consistency_tol));
  else
    r.identity_residual_max = std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace nslg
