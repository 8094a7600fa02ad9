#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "nslg/deformation.hpp"
#include "nslg/model_full.hpp"
#include "nslg/model_perturb.hpp"
#include "nslg/state.hpp"
#include "nslg/stepper.hpp"

namespace nslg {

// Manufactured travelling waves q(t, x) = Q(x - c t). The forcing that makes q an exact
// solution is -c.grad q - rhs(q), evaluated on a fine grid and sampled on the coarse one.

struct WaveSpec {
  double amplitude = 0.2;
  Vec3 speed{0.7, -0.4, 0.3};
};

namespace detail {

inline std::array<double, 3> shifted(const std::array<double, 3>& x, const WaveSpec& w, double t, int dim) {
  std::array<double, 3> y{0, 0, 0};
  for (int a = 0; a < dim; ++a) y[a] = x[a] - w.speed[a] * t;
  return y;
}

inline Vec3 wave_unit(const std::array<double, 3>& y, double amp) {
  double al = 0.6 + amp * (std::sin(y[0]) + 0.5 * std::cos(y[1] - y[2]));
  double be = 0.3 + amp * (std::cos(y[0] + y[1]) + std::sin(y[2]));
  return {std::sin(al) * std::cos(be), std::sin(al) * std::sin(be), std::cos(al)};
}

inline Vec3 wave_tilt(const std::array<double, 3>& y, double amp) {
  double al = amp * (0.8 + std::sin(y[0]) + 0.5 * std::cos(y[1] + y[2]));
  double be = 0.4 + std::cos(y[0] - y[1]) + amp * std::sin(y[2]);
  return {std::sin(al) * std::cos(be), std::sin(al) * std::sin(be), std::cos(al)};
}

template <std::size_t NC>
Field<NC> minus_advection(const Field<NC>& f, const Vec3& c) {
  Field<NC> out(f.grid);
  for (int a = 0; a < f.grid.dim(); ++a) {
    Field<NC> d = spectral_derivative(f, a, 1);
    d *= -c[a];
    out += d;
  }
  return out;
}

template <std::size_t NC>
Field<NC> sample_on(const Field<NC>& fine, const Grid& coarse) {
  const Grid& g = fine.grid;
  std::array<int, 3> stride{1, 1, 1};
  for (int a = 0; a < g.dim(); ++a) {
    if (g.n(a) % coarse.n(a) != 0) throw std::invalid_argument("fine grid must refine the coarse grid");
    stride[a] = g.n(a) / coarse.n(a);
  }
  Field<NC> out(coarse);
  for (std::size_t q = 0; q < coarse.size(); ++q) {
    auto ix = coarse.index(q);
    std::size_t p = 0;
    for (int a = 0; a < g.dim(); ++a) p = p * static_cast<std::size_t>(g.n(a)) + static_cast<std::size_t>(ix[a] * stride[a]);
    for (std::size_t c = 0; c < NC; ++c) out.c[c][q] = fine.c[c][p];
  }
  return out;
}

}  // namespace detail

inline FullState manufactured_full(const Grid& g, double t, const WaveSpec& w = {}) {
  const int dim = g.dim();
  const double a = w.amplitude;
  FullState s = equilibrium_state(g, {0, 0, 1});
  s.v = VectorField::generate(g, [&](const std::array<double, 3>& x) {
    auto y = detail::shifted(x, w, t, dim);
    return std::array<double, 3>{a * std::sin(y[1] + y[2]), a * std::cos(y[0]), 0.5 * a * std::sin(y[0] + y[1])};
  });
  s.F = MatrixField::generate(g, [&](const std::array<double, 3>& x) {
    auto y = detail::shifted(x, w, t, dim);
    std::array<double, 9> f{};
    f[mi(0, 0)] = 1.0 + 0.5 * a * std::sin(y[0]);
    f[mi(0, 1)] = 0.5 * a * std::cos(y[1]);
    f[mi(1, 0)] = 0.3 * a * std::cos(y[0] + y[2]);
    f[mi(1, 1)] = 1.0 + 0.5 * a * std::sin(y[1]);
    f[mi(2, 2)] = 1.0 + 0.3 * a * std::cos(y[0] - y[1]);
    f[mi(0, 2)] = 0.2 * a * std::sin(y[2]);
    return f;
  });
  for (std::size_t q = 0; q < g.size(); ++q) s.rho[0][q] = 1.0 / det3(s.F.at(q));
  s.M = VectorField::generate(g, [&](const std::array<double, 3>& x) { return detail::wave_unit(detail::shifted(x, w, t, dim), a); });
  return s;
}

inline PerturbState manufactured_perturb(const Grid& g, double t, const WaveSpec& w = {}) {
  const int dim = g.dim();
  const double a = w.amplitude;
  PerturbState s = zero_perturbation(g, {0, 0, 1});
  s.u = VectorField::generate(g, [&](const std::array<double, 3>& x) {
    auto y = detail::shifted(x, w, t, dim);
    return std::array<double, 3>{a * std::cos(y[1] - y[2]), a * std::sin(y[0]), 0.4 * a * std::cos(y[0] + y[1])};
  });
  s.psi = VectorField::generate(g, [&](const std::array<double, 3>& x) {
    auto y = detail::shifted(x, w, t, dim);
    return std::array<double, 3>{0.5 * a * std::sin(y[0] + y[1]), 0.5 * a * std::cos(y[0]) + 0.3 * a * std::sin(y[2]),
                                 0.3 * a * std::sin(y[1])};
  });
  make_compatible(s);
  s.d = VectorField::generate(g, [&](const std::array<double, 3>& x) {
    Vec3 m = detail::wave_tilt(detail::shifted(x, w, t, dim), a);
    return std::array<double, 3>{m[0], m[1], m[2] - 1.0};
  });
  return s;
}

inline FullRhs manufactured_source(const FullState& exact, const Params& p, const Vec3& c) {
  FullRhs r = full_rhs(exact, VectorField(exact.grid()), p);
  r.d_rho = detail::minus_advection(exact.rho, c) - r.d_rho;
  r.d_v = detail::minus_advection(exact.v, c) - r.d_v;
  r.d_F = detail::minus_advection(exact.F, c) - r.d_F;
  r.d_M = detail::minus_advection(exact.M, c) - r.d_M;
  return r;
}

inline PerturbRhs manufactured_source(const PerturbState& exact, const Params& p, const Vec3& c) {
  PerturbRhs r = perturb_rhs(exact, p);
  r.d_theta = detail::minus_advection(exact.theta, c) - r.d_theta;
  r.d_u = detail::minus_advection(exact.u, c) - r.d_u;
  r.d_psi = detail::minus_advection(exact.psi, c) - r.d_psi;
  r.d_d = detail::minus_advection(exact.d, c) - r.d_d;
  return r;
}

inline FullRhs sample_on(const FullRhs& f, const Grid& g) {
  return {detail::sample_on(f.d_rho, g), detail::sample_on(f.d_v, g), detail::sample_on(f.d_F, g), detail::sample_on(f.d_M, g)};
}

inline PerturbRhs sample_on(const PerturbRhs& f, const Grid& g) {
  return {detail::sample_on(f.d_theta, g), detail::sample_on(f.d_u, g), detail::sample_on(f.d_psi, g), detail::sample_on(f.d_d, g)};
}

inline double state_distance(const FullState& a, const FullState& b) {
  return std::max({max_abs_diff(a.rho, b.rho), max_abs_diff(a.v, b.v), max_abs_diff(a.F, b.F), max_abs_diff(a.M, b.M)});
}

inline double state_distance(const PerturbState& a, const PerturbState& b) {
  return std::max({max_abs_diff(a.theta, b.theta), max_abs_diff(a.u, b.u), max_abs_diff(a.psi, b.psi), max_abs_diff(a.d, b.d)});
}

template <class State>
State manufactured_state(const Grid& g, double t, const WaveSpec& w) {
  if constexpr (std::is_same_v<State, FullState>) {
    return manufactured_full(g, t, w);
  } else {
    return manufactured_perturb(g, t, w);
  }
}

template <class State>
auto model_rhs(const State& s, const Params& p) {
  if constexpr (std::is_same_v<State, FullState>) {
    return full_rhs(s, VectorField(s.grid()), p);
  } else {
    return perturb_rhs(s, p);
  }
}

// forced run on `coarse` to time T with nsteps RK4 steps; no renormalisation
template <class State>
State mms_run(const Grid& coarse, const Grid& fine, const Params& p, const WaveSpec& w, double T, int nsteps) {
  const double dt = T / nsteps;
  State s = manufactured_state<State>(coarse, 0.0, w);
  auto f = [&](double t, const State& y) {
    auto src = sample_on(manufactured_source(manufactured_state<State>(fine, t, w), p, w.speed), coarse);
    return model_rhs(y, p) + src;
  };
  for (int n = 0; n < nsteps; ++n) s = rk4_step(s, n * dt, dt, f);
  return s;
}

struct MmsRow {
  int n = 0;
  double dt = 0.0;
  double error = 0.0;
  double order = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace nslg
