#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>

#include "nslg/deformation.hpp"
#include "nslg/grid.hpp"
#include "nslg/params.hpp"
#include "nslg/small.hpp"

namespace nslg {

struct FullState {
  ScalarField rho;
  VectorField v;
  MatrixField F;
  VectorField M;
  const Grid& grid() const { return rho.grid; }
};

struct PerturbState {
  ScalarField theta;
  VectorField u;
  VectorField psi;
  VectorField d;
  Vec3 M_e{0, 0, 1};
  const Grid& grid() const { return theta.grid; }
};

class ExternalField {
 public:
  ExternalField() = default;
  explicit ExternalField(VectorField h) : field_(std::move(h)) {}
  ExternalField(const Grid& g, std::function<VectorField(double)> gen) : field_(g), gen_(std::move(gen)) {}

  static ExternalField zero(const Grid& g) { return ExternalField(VectorField(g)); }
  static ExternalField constant(const Grid& g, const Vec3& h) {
    VectorField f(g);
    for (int i = 0; i < 3; ++i) std::fill(f.c[i].begin(), f.c[i].end(), h[i]);
    return ExternalField(std::move(f));
  }

  bool time_dependent() const { return static_cast<bool>(gen_); }
  VectorField at(double t) const { return gen_ ? gen_(t) : field_; }
  // unset field reads as zero on g
  VectorField at(double t, const Grid& g) const {
    if (!gen_ && field_.c[0].empty()) return VectorField(g);
    return at(t);
  }
  const VectorField& static_field() const { return field_; }
  bool is_zero() const { return !gen_ && max_abs(field_) == 0.0; }

 private:
  VectorField field_;
  std::function<VectorField(double)> gen_;
};

inline void require_unit(const Vec3& m) {
  if (std::abs(norm(m) - 1.0) > 1e-12) throw std::invalid_argument("M_e must be a unit vector");
}

inline FullState equilibrium_state(const Grid& g, const Vec3& M_e) {
  require_unit(M_e);
  FullState s{ScalarField(g, 1.0), VectorField(g), MatrixField(g), VectorField(g)};
  for (int i = 0; i < 3; ++i) {
    std::fill(s.F.c[mi(i, i)].begin(), s.F.c[mi(i, i)].end(), 1.0);
    std::fill(s.M.c[i].begin(), s.M.c[i].end(), M_e[i]);
  }
  return s;
}

inline PerturbState zero_perturbation(const Grid& g, const Vec3& M_e) {
  require_unit(M_e);
  return {ScalarField(g), VectorField(g), VectorField(g), VectorField(g), M_e};
}

inline PerturbState decompose(const FullState& s, const Vec3& M_e, const Tolerances& tol = {}) {
  require_unit(M_e);
  const Grid& g = s.grid();
  MatrixField U = inverse_fluctuation(s.F, tol.det_floor);
  double curl = curl_residual(U);
  double scale = std::max(1.0, std::sqrt(sobolev_norm_sq(U, 1)));
  if (curl > tol.curl_tol * scale) throw ModelError(ErrorKind::incompatible_deformation, "curl residual " + std::to_string(curl));
  PerturbState out{s.rho, s.v, recover_psi(U, tol.mean_tol), s.M, M_e};
  for (std::size_t p = 0; p < g.size(); ++p) {
    out.theta[0][p] -= 1.0;
    for (int i = 0; i < 3; ++i) out.d.c[i][p] -= M_e[i];
  }
  return out;
}

inline FullState recompose(const PerturbState& s, double det_floor = 1e-6) {
  const Grid& g = s.grid();
  FullState out{s.theta, s.u, MatrixField(g), s.d};
  MatrixField U = gradient_matrix(s.psi);
  const Mat3 I = identity3();
  for (std::size_t p = 0; p < g.size(); ++p) {
    out.rho[0][p] += 1.0;
    for (int i = 0; i < 3; ++i) out.M.c[i][p] += s.M_e[i];
    Mat3 ipu = U.at(p);
    for (int q = 0; q < 9; ++q) ipu[q] += I[q];
    double d = det3(ipu);
    if (!(d > det_floor)) throw ModelError(ErrorKind::degenerate_deformation, "det(I+grad psi) = " + std::to_string(d));
    out.F.set(p, inv3(ipu));
  }
  return out;
}

// theta <- det(I + grad psi) - 1, evaluated as tr U + g~(U)
inline void make_compatible(PerturbState& s) {
  MatrixField U = gradient_matrix(s.psi);
  for (std::size_t p = 0; p < s.grid().size(); ++p) {
    Mat3 u = U.at(p);
    s.theta[0][p] = trace3(u) + gtilde_at(u);
  }
}

struct RandomOptions {
  int max_mode = 3;
  int sobolev_order = 3;
  bool compatible = false;
};

namespace detail {

template <std::size_t NC>
Field<NC> random_trig_field(const Grid& g, std::mt19937_64& rng, int kmax, bool with_mean) {
  std::normal_distribution<double> nd;
  Field<NC> f(g);
  const int k2max = g.dim() > 1 ? kmax : 0;
  const int k3max = g.dim() > 2 ? kmax : 0;
  for (std::size_t c = 0; c < NC; ++c) {
    for (int k1 = 0; k1 <= kmax; ++k1)
      for (int k2 = -k2max; k2 <= k2max; ++k2)
        for (int k3 = -k3max; k3 <= k3max; ++k3) {
          bool half = k1 > 0 || (k1 == 0 && (k2 > 0 || (k2 == 0 && k3 >= 0)));
          if (!half) continue;
          bool zero = k1 == 0 && k2 == 0 && k3 == 0;
          if (zero && !with_mean) continue;
          double w = 1.0 / (1.0 + k1 * k1 + k2 * k2 + k3 * k3);
          double a = nd(rng) * w;
          double b = zero ? 0.0 : nd(rng) * w;
          for (std::size_t p = 0; p < g.size(); ++p) {
            auto x = g.point(p);
            double ph = k1 * x[0] + k2 * x[1] + k3 * x[2];
            f.c[c][p] += a * std::cos(ph) + b * std::sin(ph);
          }
        }
  }
  return f;
}

template <std::size_t NC>
void scale_to_norm(Field<NC>& f, double amplitude, int s) {
  double n = std::sqrt(sobolev_norm_sq(f, s));
  f *= n > 0.0 ? amplitude / n : 0.0;
}

}  // namespace detail

inline PerturbState random_perturbation(const Grid& g, const Vec3& M_e, double amplitude, std::uint64_t seed,
                                        const RandomOptions& opt = {}) {
  if (amplitude < 0) throw std::invalid_argument("amplitude must be >= 0");
  PerturbState s = zero_perturbation(g, M_e);
  if (amplitude == 0.0) return s;
  std::mt19937_64 rng(seed);
  s.theta = detail::random_trig_field<1>(g, rng, opt.max_mode, false);
  s.u = detail::random_trig_field<3>(g, rng, opt.max_mode, true);
  s.psi = detail::random_trig_field<3>(g, rng, opt.max_mode, false);
  VectorField raw = detail::random_trig_field<3>(g, rng, opt.max_mode, true);
  detail::scale_to_norm(s.theta, amplitude, opt.sobolev_order);
  detail::scale_to_norm(s.u, amplitude, opt.sobolev_order);
  detail::scale_to_norm(s.psi, amplitude, opt.sobolev_order);
  detail::scale_to_norm(raw, amplitude, opt.sobolev_order);
  for (std::size_t p = 0; p < g.size(); ++p) {
    Vec3 m{M_e[0] + raw.c[0][p], M_e[1] + raw.c[1][p], M_e[2] + raw.c[2][p]};
    double n = norm(m);
    for (int i = 0; i < 3; ++i) s.d.c[i][p] = m[i] / n - M_e[i];
  }
  if (opt.compatible) make_compatible(s);
  return s;
}

// band-limited random unit vector field, low modes and moderate tilt away from M_e
inline VectorField random_unit_field(const Grid& g, const Vec3& M_e, double amplitude, std::uint64_t seed, int max_mode = 3) {
  std::mt19937_64 rng(seed);
  VectorField raw = detail::random_trig_field<3>(g, rng, max_mode, true);
  detail::scale_to_norm(raw, amplitude * std::sqrt(g.volume()), 0);
  VectorField M(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    Vec3 m{M_e[0] + raw.c[0][p], M_e[1] + raw.c[1][p], M_e[2] + raw.c[2][p]};
    double n = norm(m);
    for (int i = 0; i < 3; ++i) M.c[i][p] = m[i] / n;
  }
  return M;
}

inline double sphere_residual(const VectorField& M) {
  double m = 0.0;
  for (std::size_t p = 0; p < M.points(); ++p) m = std::max(m, std::abs(norm(M.at(p)) - 1.0));
  return m;
}

}  // namespace nslg
