#pragma once

#include <algorithm>
#include <cmath>

#include "nslg/errors.hpp"
#include "nslg/grid.hpp"
#include "nslg/params.hpp"
#include "nslg/small.hpp"

namespace nslg {

inline Mat3 mat_at(const MatrixField& F, std::size_t p) { return F.at(p); }

inline double det_at(const MatrixField& F, std::size_t p) { return det3(F.at(p)); }

inline MatrixField inverse_fluctuation(const MatrixField& F, double det_floor = 1e-6) {
  MatrixField U(F.grid);
  const Mat3 I = identity3();
  for (std::size_t p = 0; p < F.points(); ++p) {
    Mat3 f = F.at(p);
    double d = det3(f);
    if (!(d > det_floor)) throw ModelError(ErrorKind::degenerate_deformation, "det F = " + std::to_string(d));
    Mat3 g = inv3(f);
    for (int q = 0; q < 9; ++q) g[q] -= I[q];
    U.set(p, g);
  }
  return U;
}

// U(i,j) = d_j psi^i
inline MatrixField gradient_matrix(const VectorField& psi) { return jacobian(psi); }

// max over i,j,k of |d_i U^{jk} - d_k U^{ji}|
inline double curl_residual(const MatrixField& U) {
  const Grid& g = U.grid;
  double m = 0.0;
  for (int j = 0; j < 3; ++j) {
    std::array<std::array<Plane, 3>, 3> dU;  // dU[k][i] = d_i U^{jk}
    for (int k = 0; k < 3; ++k) dU[k] = gradient_plane(g, U.c[mi(j, k)]);
    for (int i = 0; i < 3; ++i)
      for (int k = i + 1; k < 3; ++k)
        for (std::size_t p = 0; p < g.size(); ++p) m = std::max(m, std::abs(dU[k][i][p] - dU[i][k][p]));
  }
  return m;
}

inline VectorField recover_psi(const MatrixField& U, double mean_tol = 1e-10) {
  const Grid& g = U.grid;
  auto mean = spatial_mean(U);
  for (int q = 0; q < 9; ++q)
    if (std::abs(mean[q]) > mean_tol)
      throw ModelError(ErrorKind::non_gradient_mean, "mean of U component " + std::to_string(q) + " = " + std::to_string(mean[q]));
  VectorField psi(g);
  for (int j = 0; j < 3; ++j) {
    Spectrum acc(g.spectral_size(), cplx{0.0, 0.0});
    for (int a = 0; a < g.dim(); ++a) {
      Spectrum s = g.forward(U.c[mi(j, a)]);
      const auto& k = g.wavenumber(a);
      const auto& ny = g.nyquist(a);
      for (std::size_t q = 0; q < s.size(); ++q)
        if (!ny[q]) acc[q] += cplx{0.0, -k[q]} * s[q];
    }
    for (std::size_t q = 0; q < acc.size(); ++q) {
      double k2 = 0.0;
      for (int a = 0; a < g.dim(); ++a)
        if (!g.nyquist(a)[q]) k2 += g.wavenumber(a)[q] * g.wavenumber(a)[q];
      acc[q] = k2 > 0.0 ? acc[q] / k2 : cplx{0.0, 0.0};
    }
    psi.c[j] = g.inverse(acc);
  }
  return psi;
}

// g = U U^T + R + R^T - U R^T - R U^T + R R^T with R = U U (I+U)^{-1}
inline MatrixField g_remainder(const MatrixField& U, double det_floor = 1e-6) {
  MatrixField out(U.grid);
  const Mat3 I = identity3();
  for (std::size_t p = 0; p < U.points(); ++p) {
    Mat3 u = U.at(p);
    Mat3 ipu = u;
    for (int q = 0; q < 9; ++q) ipu[q] += I[q];
    double d = det3(ipu);
    if (!(d > det_floor)) throw ModelError(ErrorKind::degenerate_deformation, "det(I+U) = " + std::to_string(d));
    Mat3 R = matmul(matmul(u, u), inv3(ipu));
    Mat3 ut = transpose(u);
    Mat3 rt = transpose(R);
    Mat3 uut = matmul(u, ut);
    Mat3 urt = matmul(u, rt);
    Mat3 rut = matmul(R, ut);
    Mat3 rrt = matmul(R, rt);
    Mat3 r{};
    for (int q = 0; q < 9; ++q) r[q] = uut[q] + R[q] + rt[q] - urt[q] - rut[q] + rrt[q];
    out.set(p, r);
  }
  return out;
}

// det(I+U) - 1 - tr U = sum of principal 2x2 minors + det U
inline double gtilde_at(const Mat3& u) {
  return (u[0] * u[4] - u[1] * u[3]) + (u[0] * u[8] - u[2] * u[6]) + (u[4] * u[8] - u[5] * u[7]) + det3(u);
}

inline ScalarField gtilde_remainder(const MatrixField& U) {
  ScalarField out(U.grid);
  for (std::size_t p = 0; p < U.points(); ++p) out[0][p] = gtilde_at(U.at(p));
  return out;
}

inline double compatibility_residual(const ScalarField& theta, const MatrixField& U) {
  double m = 0.0;
  for (std::size_t p = 0; p < U.points(); ++p) {
    Mat3 u = U.at(p);
    m = std::max(m, std::abs(theta[0][p] - trace3(u) - gtilde_at(u)));
  }
  return m;
}

namespace detail {

inline void check_link(const ScalarField& theta, const MatrixField& U, double tol) {
  double r = compatibility_residual(theta, U);
  if (r > tol) throw ModelError(ErrorKind::inconsistent, "max |1+theta - det(I+U)| = " + std::to_string(r));
}

// (U grad theta)_i = U^{ij} d_j theta, optionally symmetrized
inline VectorField u_times_grad(const MatrixField& U, const VectorField& gth, bool symmetric) {
  VectorField out(U.grid);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (std::size_t p = 0; p < U.points(); ++p) {
        double uij = symmetric ? U.c[mi(i, j)][p] + U.c[mi(j, i)][p] : 2.0 * U.c[mi(i, j)][p];
        out.c[i][p] += uij * gth.c[j][p];
      }
  return out;
}

inline VectorField reformulated_common(const ScalarField& theta, const VectorField& psi, const MatrixField& U,
                                       bool exact) {
  const Grid& g = theta.grid;
  // tr U = theta + gt, so gt = -(det(I+U) - 1 - tr U)
  ScalarField gt = gtilde_remainder(U);
  gt *= -1.0;
  VectorField lap = laplacian(psi);
  VectorField gth = gradient(theta);
  VectorField ggt = gradient(gt);
  ScalarField tg = theta;
  for (std::size_t p = 0; p < g.size(); ++p) tg[0][p] += gt[0][p];
  VectorField gtg = gradient(tg);
  VectorField cross = u_times_grad(U, gth, exact);
  VectorField out(g);
  for (int i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < g.size(); ++p) {
      double th = theta[0][p];
      out.c[i][p] = -(1.0 + th) * lap.c[i][p] - cross.c[i][p] - ggt.c[i][p] - th * gtg.c[i][p];
    }
  if (exact) {
    MatrixField gr = g_remainder(U);
    for (auto& pl : gr.c)
      for (std::size_t p = 0; p < g.size(); ++p) pl[p] *= 1.0 + theta[0][p];
    out += divergence(gr);
  }
  return out;
}

}  // namespace detail

// -(1+theta) lap psi - 2 grad psi . grad theta - grad g~ - theta grad(theta + g~)
inline VectorField reformulated_elastic_div(const ScalarField& theta, const VectorField& psi, const MatrixField& U,
                                            const Params&, double consistency_tol = 1e-8) {
  detail::check_link(theta, U, consistency_tol);
  return detail::reformulated_common(theta, psi, U, false);
}

// completed identity: symmetric cross term plus div((1+theta) g(U))
inline VectorField reformulated_elastic_div_exact(const ScalarField& theta, const VectorField& psi, const MatrixField& U,
                                                  const Params&, double consistency_tol = 1e-8) {
  detail::check_link(theta, U, consistency_tol);
  return detail::reformulated_common(theta, psi, U, true);
}

inline double det_constraint_residual(const ScalarField& rho, const MatrixField& F) {
  double m = 0.0;
  for (std::size_t p = 0; p < F.points(); ++p) m = std::max(m, std::abs(rho[0][p] * det3(F.at(p)) - 1.0));
  return m;
}

struct DeformationReport {
  double curl_residual_max = 0.0;
  double det_constraint_max = 0.0;
  VectorField psi;
  double identity_residual_max = 0.0;
};

}  // namespace nslg
