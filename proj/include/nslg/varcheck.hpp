#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "nslg/energetics.hpp"
#include "nslg/model_full.hpp"
#include "nslg/state.hpp"
#include "nslg/stepper.hpp"

namespace nslg {

struct VariationReport {
  double max_abs_mismatch = 0.0;
  double relative_mismatch = 0.0;
  int probe_count = 0;
};

// M-dependent part of the free energy: int A|grad M|^2 - mu0 M.H
inline double magnetic_free_energy(const VectorField& M, const VectorField& H, const Params& p) {
  const Grid& g = M.grid;
  MatrixField G = jacobian(M);
  std::vector<double> t(g.size());
  for (std::size_t q = 0; q < g.size(); ++q) t[q] = p.A * grad_sq_at(G, q) - p.mu0 * dot(M.at(q), H.at(q));
  return pairwise_sum(t) * g.cell_volume();
}

// h = -(2A lap M + mu0 H)
inline VectorField free_energy_gradient(const VectorField& M, const VectorField& H, const Params& p) {
  VectorField h = effective_field(M, H, p);
  h *= -1.0;
  return h;
}

struct ProbeOptions {
  int max_mode = 3;
  bool tangent = false;
  std::uint64_t seed = 1;
};

inline VariationReport free_energy_variation_check(const VectorField& M, const VectorField& H, const Params& p, int probe_count,
                                                   double fd_eps, const ProbeOptions& o = {}) {
  if (!(fd_eps >= 1e-8 && fd_eps <= 1e-4)) throw std::invalid_argument("fd_eps must lie in [1e-8, 1e-4]");
  const Grid& g = M.grid;
  VectorField h = free_energy_gradient(M, H, p);
  const double hn = std::sqrt(inner_product_l2(h, h));
  std::mt19937_64 rng(o.seed);
  VariationReport r;
  r.probe_count = probe_count;
  for (int k = 0; k < probe_count; ++k) {
    VectorField phi = detail::random_trig_field<3>(g, rng, o.max_mode, true);
    if (o.tangent) {
      for (std::size_t q = 0; q < g.size(); ++q) {
        Vec3 m = M.at(q), f = phi.at(q);
        double c = dot(m, f) / dot(m, m);
        for (int i = 0; i < 3; ++i) phi.c[i][q] = f[i] - c * m[i];
      }
    }
    phi *= 1.0 / std::sqrt(inner_product_l2(phi, phi));
    VectorField plus = M, minus = M;
    for (int i = 0; i < 3; ++i)
      for (std::size_t q = 0; q < g.size(); ++q) {
        plus.c[i][q] += fd_eps * phi.c[i][q];
        minus.c[i][q] -= fd_eps * phi.c[i][q];
      }
    double fd = (magnetic_free_energy(plus, H, p) - magnetic_free_energy(minus, H, p)) / (2.0 * fd_eps);
    double ex = inner_product_l2(h, phi);
    double err = std::abs(fd - ex);
    double denom = std::max(std::abs(ex), hn);
    r.max_abs_mismatch = std::max(r.max_abs_mismatch, err);
    r.relative_mismatch = std::max(r.relative_mismatch, denom > 0.0 ? err / denom : err);
  }
  return r;
}

// (1/lambda) M° = (h.M)M - h with M° = d_M + v.grad M - gamma_g M x h
inline double angular_momentum_balance_residual(const VectorField& M, const VectorField& v, const VectorField& H, const Params& p) {
  const Grid& g = M.grid;
  VectorField dM = llg_rhs(M, v, H, p, LlgForm::cross);
  VectorField h = free_energy_gradient(M, H, p);
  VectorField adv = transport<3>(v, jacobian(M));
  double res = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    Vec3 m = M.at(q), hh = h.at(q), a = adv.at(q);
    double ma = dot(m, a) / dot(m, m);
    Vec3 mxh = cross(m, hh);
    double hm = dot(hh, m);
    for (int i = 0; i < 3; ++i) {
      double ring = dM.c[i][q] + (a[i] - ma * m[i]) - p.gamma_g * mxh[i];
      res = std::max(res, std::abs(ring / p.lambda_d - (hm * m[i] - hh[i])));
    }
  }
  return res;
}

// relative gap between (1/lambda) int |M x M°|^2 and lambda int |M x H_eff|^2
struct DissipationForms {
  double rate_form = 0.0;
  double field_form = 0.0;
  double relative = 0.0;
};

inline DissipationForms dissipation_equivalence(const VectorField& M, const VectorField& H, const Params& p) {
  const Grid& g = M.grid;
  VectorField dM = llg_rhs(M, VectorField(g), H, p, LlgForm::cross);
  VectorField heff = effective_field(M, H, p);
  std::vector<double> a(g.size()), b(g.size());
  for (std::size_t q = 0; q < g.size(); ++q) {
    Vec3 m = M.at(q), he = heff.at(q), d = dM.at(q);
    Vec3 mxh = cross(m, he);
    Vec3 ring{d[0] + p.gamma_g * mxh[0], d[1] + p.gamma_g * mxh[1], d[2] + p.gamma_g * mxh[2]};
    Vec3 mr = cross(m, ring);
    a[q] = dot(mr, mr) / p.lambda_d;
    b[q] = p.lambda_d * dot(mxh, mxh);
  }
  DissipationForms r;
  r.rate_form = pairwise_sum(a) * g.cell_volume();
  r.field_form = pairwise_sum(b) * g.cell_volume();
  double s = std::max(std::abs(r.rate_form), std::abs(r.field_form));
  r.relative = s > 0.0 ? std::abs(r.rate_form - r.field_form) / s : 0.0;
  return r;
}

inline double dissipation_equivalence_residual(const VectorField& M, const VectorField& H, const Params& p) {
  return dissipation_equivalence(M, H, p).relative;
}

struct EnergyRateRow {
  double dt = 0.0;
  double E0 = 0.0;
  double E1 = 0.0;
  double dissipated = 0.0;
  double residual = 0.0;
  double order = std::numeric_limits<double>::quiet_NaN();
};

// |E(T) - E(0) + int_0^T D dt| for each dt, with observed order between successive rows
inline std::vector<EnergyRateRow> energy_rate_check(const FullSystem& sys, const FullState& initial, double T,
                                                    const std::vector<double>& dt_list, StepConfig cfg = {}) {
  for (std::size_t i = 1; i < dt_list.size(); ++i)
    if (!(dt_list[i] < dt_list[i - 1])) throw std::invalid_argument("dt_list must be decreasing");
  FullSystem quiet = sys;
  quiet.full_diagnostics = false;
  cfg.track_dissipation = true;
  cfg.scheme = Scheme::rk4;
  std::vector<EnergyRateRow> rows;
  for (double dt : dt_list) {
    cfg.dt = dt;
    auto rec = advance(quiet, initial, T, cfg, std::numeric_limits<int>::max());
    if (rec.termination != Termination::completed) throw std::runtime_error("energy_rate_check: run stopped: " + rec.message);
    EnergyRateRow row;
    row.dt = dt;
    row.E0 = rec.samples.front().E_total;
    row.E1 = rec.samples.back().E_total;
    row.dissipated = rec.dissipation_integral;
    row.residual = std::abs(row.E1 - row.E0 + row.dissipated);
    if (!rows.empty() && row.residual > 0.0 && rows.back().residual > 0.0)
      row.order = std::log(rows.back().residual / row.residual) / std::log(rows.back().dt / dt);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nslg
