#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nslg/energetics.hpp"
#include "nslg/model_full.hpp"
#include "nslg/model_perturb.hpp"

namespace nslg {

enum class Scheme { rk4, picard };

struct StepConfig {
  double dt = 1e-3;
  double cfl_safety = 0.2;
  double picard_tol = 1e-10;
  int picard_max_iters = 50;
  bool renormalize_M = true;
  Scheme scheme = Scheme::rk4;
  bool track_dissipation = false;
  bool store_flow = false;
};

enum class Termination { completed, vacuum, degenerate, picard_diverged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::vacuum: return "vacuum";
    case Termination::degenerate: return "degenerate";
    case Termination::picard_diverged: return "picard_diverged";
  }
  return "?";
}

class PicardDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// velocity and density spectra at one instant, for characteristic tracing
struct FlowSnapshot {
  double t = 0.0;
  std::array<Spectrum, 3> v;
  Spectrum div_v;
  Spectrum rho;
};

template <class State>
struct RunRecord {
  std::vector<FunctionalSample> samples;
  std::optional<State> final_state;
  Termination termination = Termination::completed;
  std::string message;
  int steps = 0;
  double t_final = 0.0;
  double dissipation_integral = 0.0;
  double max_renorm_drift = 0.0;
  int cfl_violations = 0;
  std::vector<int> picard_iterations;
  std::vector<FlowSnapshot> flow;
};

// classical RK4; f(t, y) returns an increment type supporting axpy(y, h, k)
template <class State, class Fn>
State rk4_step(const State& y, double t, double dt, Fn&& f) {
  auto k1 = f(t, y);
  auto k2 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k1));
  auto k3 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k2));
  auto k4 = f(t + dt, axpy(y, dt, k3));
  State out = axpy(y, dt / 6.0, k1);
  out = axpy(out, dt / 3.0, k2);
  out = axpy(out, dt / 3.0, k3);
  return axpy(out, dt / 6.0, k4);
}

// RK4 with q' = g(t, y) integrated on the same stages
template <class State, class Fn, class Gn>
std::pair<State, double> rk4_step_with_quadrature(const State& y, double t, double dt, Fn&& f, Gn&& g) {
  auto k1 = f(t, y);
  double q1 = g(t, y);
  State y2 = axpy(y, 0.5 * dt, k1);
  auto k2 = f(t + 0.5 * dt, y2);
  double q2 = g(t + 0.5 * dt, y2);
  State y3 = axpy(y, 0.5 * dt, k2);
  auto k3 = f(t + 0.5 * dt, y3);
  double q3 = g(t + 0.5 * dt, y3);
  State y4 = axpy(y, dt, k3);
  auto k4 = f(t + dt, y4);
  double q4 = g(t + dt, y4);
  State out = axpy(y, dt / 6.0, k1);
  out = axpy(out, dt / 3.0, k2);
  out = axpy(out, dt / 3.0, k3);
  out = axpy(out, dt / 6.0, k4);
  return {std::move(out), dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)};
}

// M <- M/|M|, returns max ||M| - 1| before projection
inline double renormalize_field(VectorField& M) {
  double drift = 0.0;
  for (std::size_t q = 0; q < M.points(); ++q) {
    Vec3 m = M.at(q);
    double n = norm(m);
    if (!(n > 0.0)) throw ModelError(ErrorKind::zero_magnetization, "|M| = 0 at point " + std::to_string(q));
    drift = std::max(drift, std::abs(n - 1.0));
    for (int i = 0; i < 3; ++i) M.c[i][q] = m[i] / n;
  }
  return drift;
}

inline double renormalize_M(FullState& s) { return renormalize_field(s.M); }

inline double renormalize_d(PerturbState& s) {
  VectorField M = s.d;
  for (int i = 0; i < 3; ++i)
    for (auto& x : M.c[i]) x += s.M_e[i];
  double drift = renormalize_field(M);
  for (int i = 0; i < 3; ++i)
    for (std::size_t q = 0; q < M.points(); ++q) s.d.c[i][q] = M.c[i][q] - s.M_e[i];
  return drift;
}

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline Vec3 to3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

inline void fill_perturb_part(FunctionalSample& f, const PerturbState& ps, const Params& p, int order, const CoeffChoice& coeff) {
  auto gl = global_functionals(ps, order);
  f.Es_global = gl.E;
  f.Ds_global = gl.D;
  auto in = instant_functionals(ps, p, order, with_weight_constants(coeff, ps.theta, p));
  f.E_instant = in.E;
  f.D_instant = in.D;
  f.dbar = to3(spatial_mean(ps.d));
  f.ubar = to3(spatial_mean(ps.u));
  f.psibar = to3(spatial_mean(ps.psi));
}

// implicit solve (I - dt(mu lap + (mu+xi) grad div)) v = b, mode by mode
inline VectorField viscous_solve(const VectorField& b, double dt, const Params& p) {
  const Grid& g = b.grid;
  std::array<Spectrum, 3> s;
  for (int i = 0; i < 3; ++i) s[i] = g.forward(b.c[i]);
  for (std::size_t q = 0; q < g.spectral_size(); ++q) {
    Vec3 k{}, kt{};
    for (int a = 0; a < g.dim(); ++a) {
      k[a] = g.wavenumber(a)[q];
      kt[a] = g.nyquist(a)[q] ? 0.0 : k[a];
    }
    const double alpha = 1.0 + dt * p.mu * dot(k, k);
    const double beta = dt * (p.mu + p.xi);
    cplx kd{0.0, 0.0};
    for (int a = 0; a < 3; ++a) kd += kt[a] * s[a][q];
    const cplx f = beta * kd / (alpha * (alpha + beta * dot(kt, kt)));
    for (int a = 0; a < 3; ++a) s[a][q] = s[a][q] / alpha - f * kt[a];
  }
  VectorField out(g);
  for (int i = 0; i < 3; ++i) out.c[i] = g.inverse(s[i]);
  return out;
}

// (1 - dt c lap) m = b
inline VectorField diffusion_solve(const VectorField& b, double dt, double c) {
  const Grid& g = b.grid;
  VectorField out(g);
  for (int i = 0; i < 3; ++i) {
    Spectrum s = g.forward(b.c[i]);
    for (std::size_t q = 0; q < s.size(); ++q) {
      double k2 = 0.0;
      for (int a = 0; a < g.dim(); ++a) k2 += g.wavenumber(a)[q] * g.wavenumber(a)[q];
      s[q] /= 1.0 + dt * c * k2;
    }
    out.c[i] = g.inverse(s);
  }
  return out;
}

template <std::size_t NC>
double max_diff(const Field<NC>& a, const Field<NC>& b) {
  return max_abs_diff(a, b);
}

}  // namespace detail

struct FullSystem {
  using State = FullState;
  Params p;
  ExternalField H;
  ModelOptions opt;
  Vec3 M_e{0, 0, 1};
  int order = 2;
  CoeffChoice coeff{0.01, 1e-3, 10.0};
  bool full_diagnostics = true;

  FullRhs rhs(double t, const FullState& s) const { return full_rhs(s, H.at(t, s.grid()), p, opt); }
  double dissipation(double t, const FullState& s) const { return total_energy_dissipation(s, H.at(t, s.grid()), p).D; }
  double renormalize(FullState& s) const { return renormalize_M(s); }
  const VectorField& velocity(const FullState& s) const { return s.v; }
  ScalarField density(const FullState& s) const { return s.rho; }
  double max_speed(const FullState& s) const { return max_abs(s.v); }

  FunctionalSample sample(double t, const FullState& s) const {
    FunctionalSample f;
    f.t = t;
    auto e = total_energy_dissipation(s, H.at(t, s.grid()), p);
    f.E_total = e.E;
    f.K = e.K;
    f.F_helm = e.F_helm;
    f.D_total = e.D;
    f.res_sphere = sphere_residual(s.M);
    f.res_det = det_constraint_residual(s.rho, s.F);
    if (!full_diagnostics) {
      f.Es_local = f.Ds_local = f.Es_global = f.Ds_global = f.E_instant = f.D_instant = detail::nan();
      f.res_curl = f.res_compat = detail::nan();
      return f;
    }
    try {
      auto loc = local_functionals(s, p, order);
      f.Es_local = loc.E;
      f.Ds_local = loc.D;
    } catch (const std::invalid_argument&) {
      // density not positive: weighted norms undefined
      f.Es_local = f.Ds_local = detail::nan();
    }
    MatrixField U = inverse_fluctuation(s.F, opt.det_floor);
    f.res_curl = curl_residual(U);
    try {
      PerturbState ps = decompose(s, M_e);
      f.res_compat = compatibility_residual(ps.theta, gradient_matrix(ps.psi));
      detail::fill_perturb_part(f, ps, p, order, coeff);
    } catch (const ModelError&) {
      f.Es_global = f.Ds_global = f.E_instant = f.D_instant = f.res_compat = detail::nan();
      Vec3 mb = detail::to3(spatial_mean(s.M));
      f.dbar = {mb[0] - M_e[0], mb[1] - M_e[1], mb[2] - M_e[2]};
      f.ubar = detail::to3(spatial_mean(s.v));
      f.psibar = {detail::nan(), detail::nan(), detail::nan()};
    }
    return f;
  }
};

struct PerturbSystem {
  using State = PerturbState;
  Params p;
  PerturbOptions opt;
  int order = 2;
  CoeffChoice coeff{0.01, 1e-3, 10.0};
  bool full_diagnostics = true;

  PerturbRhs rhs(double, const PerturbState& s) const { return perturb_rhs(s, p, opt); }
  double dissipation(double, const PerturbState& s) const { return global_functionals(s, order).D; }
  double renormalize(PerturbState& s) const { return renormalize_d(s); }
  const VectorField& velocity(const PerturbState& s) const { return s.u; }
  ScalarField density(const PerturbState& s) const {
    ScalarField r = s.theta;
    for (auto& x : r.c[0]) x += 1.0;
    return r;
  }
  double max_speed(const PerturbState& s) const { return max_abs(s.u); }

  FunctionalSample sample(double t, const PerturbState& s) const {
    FunctionalSample f;
    f.t = t;
    MatrixField U = gradient_matrix(s.psi);
    f.res_sphere = sphere_constraint_residual(s);
    f.res_curl = curl_residual(U);
    f.res_compat = compatibility_residual(s.theta, U);
    double det_res = 0.0;
    for (std::size_t q = 0; q < s.grid().size(); ++q) {
      Mat3 ipu = U.at(q);
      for (int i = 0; i < 3; ++i) ipu[mi(i, i)] += 1.0;
      det_res = std::max(det_res, std::abs((1.0 + s.theta[0][q]) / det3(ipu) - 1.0));
    }
    f.res_det = det_res;
    detail::fill_perturb_part(f, s, p, order, coeff);
    if (!full_diagnostics) {
      f.E_total = f.K = f.F_helm = f.D_total = f.Es_local = f.Ds_local = detail::nan();
      return f;
    }
    try {
      FullState fs = recompose(s);
      auto e = total_energy_dissipation(fs, VectorField(s.grid()), p);
      f.E_total = e.E;
      f.K = e.K;
      f.F_helm = e.F_helm;
      f.D_total = e.D;
      auto loc = local_functionals(fs, p, order);
      f.Es_local = loc.E;
      f.Ds_local = loc.D;
    } catch (const ModelError&) {
      f.E_total = f.K = f.F_helm = f.D_total = f.Es_local = f.Ds_local = detail::nan();
    }
    return f;
  }
};

struct PicardResult {
  FullState state;
  int iterations = 0;
  std::vector<double> differences;
};

// backward Euler with frozen coefficients, stiff constant-coefficient parts implicit
inline PicardResult picard_step(const FullSystem& sys, const FullState& sn, double t, double dt, const StepConfig& cfg) {
  const Params& p = sys.p;
  ModelOptions o = sys.opt;
  o.llg = LlgForm::multiplier;
  const VectorField H = sys.H.at(t + dt, sn.grid());
  PicardResult res{sn, 0, {}};
  FullState& X = res.state;
  for (int k = 1; k <= cfg.picard_max_iters; ++k) {
    FullRhs R = full_rhs(X, H, p, o);
    VectorField Lv = laplacian(X.v);
    VectorField gd = grad_div(X.v);
    VectorField LM = laplacian(X.M);
    VectorField bv = sn.v, bM = sn.M;
    for (int i = 0; i < 3; ++i)
      for (std::size_t q = 0; q < sn.grid().size(); ++q) {
        double lv = p.mu * Lv.c[i][q] + (p.mu + p.xi) * gd.c[i][q];
        bv.c[i][q] += dt * (R.d_v.c[i][q] - lv);
        bM.c[i][q] += dt * (R.d_M.c[i][q] - 2.0 * p.A * p.lambda_d * LM.c[i][q]);
      }
    FullState next{sn.rho, detail::viscous_solve(bv, dt, p), sn.F, detail::diffusion_solve(bM, dt, 2.0 * p.A * p.lambda_d)};
    for (std::size_t q = 0; q < sn.grid().size(); ++q) next.rho[0][q] += dt * R.d_rho[0][q];
    for (int c = 0; c < 9; ++c)
      for (std::size_t q = 0; q < sn.grid().size(); ++q) next.F.c[c][q] += dt * R.d_F.c[c][q];
    double diff = std::max({detail::max_diff(next.rho, X.rho), detail::max_diff(next.v, X.v), detail::max_diff(next.F, X.F),
                            detail::max_diff(next.M, X.M)});
    res.differences.push_back(diff);
    X = std::move(next);
    if (!std::isfinite(diff)) break;
    if (diff < cfg.picard_tol) {
      res.iterations = k;
      return res;
    }
  }
  throw PicardDiverged("picard iteration did not reach tol " + std::to_string(cfg.picard_tol) + " in " +
                       std::to_string(cfg.picard_max_iters) + " iterations");
}

template <class System>
FlowSnapshot flow_snapshot(const System& sys, double t, const typename System::State& s) {
  const VectorField& v = sys.velocity(s);
  const Grid& g = v.grid;
  FlowSnapshot f;
  f.t = t;
  for (int i = 0; i < 3; ++i) f.v[i] = g.forward(v.c[i]);
  f.div_v = g.forward(divergence(v).c[0]);
  f.rho = g.forward(sys.density(s).c[0]);
  return f;
}

// dt <= safety * min(h^2 / nu_max, h / |v|max)
template <class System>
bool cfl_ok(const System& sys, const typename System::State& s, const StepConfig& cfg) {
  const Grid& g = s.grid();
  double h = std::numeric_limits<double>::infinity();
  for (int a = 0; a < g.dim(); ++a) h = std::min(h, g.spacing(a));
  const Params& p = sys.p;
  double nu = std::max({p.mu, p.mu + p.xi, 2.0 * p.A * p.lambda_d});
  double vmax = sys.max_speed(s);
  double lim = h * h / nu;
  if (vmax > 0.0) lim = std::min(lim, h / vmax);
  return cfg.dt <= cfg.cfl_safety * lim;
}

template <class System>
RunRecord<typename System::State> advance(const System& sys, const typename System::State& initial, double T_end, const StepConfig& cfg,
                                           int sample_every = 1) {
  using State = typename System::State;
  if (!(T_end > 0.0)) throw std::invalid_argument("T_end must be positive");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (sample_every < 1) throw std::invalid_argument("sample_every must be >= 1");
  RunRecord<State> rec;
  const long nsteps = std::max(1L, static_cast<long>(std::ceil(T_end / cfg.dt - 1e-9)));
  // uniform steps when T_end is a multiple of dt, so split runs replay the same increments
  const bool uniform = std::abs(static_cast<double>(nsteps) * cfg.dt - T_end) <= 1e-9 * T_end;
  State s = initial;
  double t = 0.0;
  auto f = [&](double tt, const State& y) { return sys.rhs(tt, y); };
  auto dfn = [&](double tt, const State& y) { return sys.dissipation(tt, y); };
  try {
    rec.samples.push_back(sys.sample(t, s));
    if (cfg.store_flow) rec.flow.push_back(flow_snapshot(sys, t, s));
    for (long n = 1; n <= nsteps; ++n) {
      const double h = (n == nsteps && !uniform) ? T_end - t : cfg.dt;
      if (!cfl_ok(sys, s, cfg)) ++rec.cfl_violations;
      if (cfg.scheme == Scheme::picard) {
        if constexpr (std::is_same_v<State, FullState>) {
          auto pr = picard_step(sys, s, t, h, cfg);
          rec.picard_iterations.push_back(pr.iterations);
          if (cfg.track_dissipation) rec.dissipation_integral += 0.5 * h * (dfn(t, s) + dfn(t + h, pr.state));
          s = std::move(pr.state);
        } else {
          throw std::invalid_argument("picard scheme is available for the full model only");
        }
      } else if (cfg.track_dissipation) {
        auto [y, q] = rk4_step_with_quadrature(s, t, h, f, dfn);
        s = std::move(y);
        rec.dissipation_integral += q;
      } else {
        s = rk4_step(s, t, h, f);
      }
      if (cfg.renormalize_M) rec.max_renorm_drift = std::max(rec.max_renorm_drift, sys.renormalize(s));
      t = (n == nsteps) ? T_end : t + h;
      rec.steps = static_cast<int>(n);
      if (cfg.store_flow) rec.flow.push_back(flow_snapshot(sys, t, s));
      if (n % sample_every == 0 || n == nsteps) rec.samples.push_back(sys.sample(t, s));
    }
  } catch (const ModelError& e) {
    rec.termination = e.kind() == ErrorKind::vacuum ? Termination::vacuum : Termination::degenerate;
    rec.message = e.what();
  } catch (const PicardDiverged& e) {
    rec.termination = Termination::picard_diverged;
    rec.message = e.what();
  }
  rec.t_final = t;
  rec.final_state = std::move(s);
  return rec;
}

namespace detail {

struct Particle {
  std::array<double, 3> x{};
  double I = 0.0;
};

inline void particle_rhs(const Grid& g, const FlowSnapshot& f, const Particle& p, std::array<double, 3>& dx, double& dI) {
  for (int a = 0; a < 3; ++a) dx[a] = a < g.dim() ? interpolate(g, f.v[a], p.x) : 0.0;
  dI = interpolate(g, f.div_v, p.x);
}

inline Particle particle_add(const Particle& p, double h, const std::array<double, 3>& dx, double dI) {
  Particle o = p;
  for (int a = 0; a < 3; ++a) o.x[a] += h * dx[a];
  o.I += h * dI;
  return o;
}

}  // namespace detail

// rho(t, X(t)) = rho0(x0) exp(-int div v along X); RK4 over snapshot pairs (midpoint = middle snapshot)
inline double trajectory_density_check(const Grid& g, const std::vector<FlowSnapshot>& flow, int n_particles, std::uint64_t seed) {
  if (flow.size() < 2) throw std::invalid_argument("trajectory_density_check: at least two flow snapshots required");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, kTwoPi);
  std::vector<detail::Particle> parts(n_particles);
  std::vector<double> rho0(n_particles);
  for (auto& pt : parts)
    for (int a = 0; a < g.dim(); ++a) pt.x[a] = ux(rng);
  for (int i = 0; i < n_particles; ++i) rho0[i] = interpolate(g, flow.front().rho, parts[i].x);

  double worst = 0.0;
  auto check = [&](const FlowSnapshot& f) {
    for (int i = 0; i < n_particles; ++i) {
      double pred = rho0[i] * std::exp(-parts[i].I);
      double got = interpolate(g, f.rho, parts[i].x);
      worst = std::max(worst, std::abs(pred - got) / std::abs(got));
    }
  };
  std::size_t j = 0;
  while (j + 1 < flow.size()) {
    const bool pair = j + 2 < flow.size();
    const FlowSnapshot& a = flow[j];
    const FlowSnapshot& m = flow[j + 1];
    const FlowSnapshot& b = pair ? flow[j + 2] : flow[j + 1];
    const double h = b.t - a.t;
    for (auto& pt : parts) {
      std::array<double, 3> d1, d2, d3, d4;
      double i1, i2, i3, i4;
      if (pair) {
        detail::particle_rhs(g, a, pt, d1, i1);
        detail::particle_rhs(g, m, detail::particle_add(pt, 0.5 * h, d1, i1), d2, i2);
        detail::particle_rhs(g, m, detail::particle_add(pt, 0.5 * h, d2, i2), d3, i3);
        detail::particle_rhs(g, b, detail::particle_add(pt, h, d3, i3), d4, i4);
        for (int c = 0; c < 3; ++c) pt.x[c] += h / 6.0 * (d1[c] + 2 * d2[c] + 2 * d3[c] + d4[c]);
        pt.I += h / 6.0 * (i1 + 2 * i2 + 2 * i3 + i4);
      } else {
        // one trailing interval: Heun
        detail::particle_rhs(g, a, pt, d1, i1);
        detail::particle_rhs(g, b, detail::particle_add(pt, h, d1, i1), d2, i2);
        for (int c = 0; c < 3; ++c) pt.x[c] += 0.5 * h * (d1[c] + d2[c]);
        pt.I += 0.5 * h * (i1 + i2);
      }
    }
    j += pair ? 2 : 1;
    check(flow[j]);
  }
  return worst;
}

template <class State>
double trajectory_density_check(const RunRecord<State>& run, int n_particles, std::uint64_t seed) {
  if (!run.final_state) throw std::invalid_argument("trajectory_density_check: run has no state");
  return trajectory_density_check(run.final_state->grid(), run.flow, n_particles, seed);
}

}  // namespace nslg
