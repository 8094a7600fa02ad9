#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nslg {

using cplx = std::complex<double>;
using Plane = std::vector<double>;
using Spectrum = std::vector<cplx>;
using MultiIndex = std::array<int, 3>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// deterministic pairwise summation
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

class Grid {
 public:
  Grid() = default;

  Grid(int dim, std::array<int, 3> n) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("grid dim must be 1, 2 or 3");
    auto p = std::make_shared<Impl>();
    p->dim = dim;
    for (int a = 0; a < 3; ++a) {
      if (a < dim) {
        if (n[a] < 8 || n[a] % 2 != 0)
          throw std::invalid_argument("grid n must be even and >= 8 (axis " + std::to_string(a) + ")");
        p->n[a] = n[a];
      } else {
        p->n[a] = 1;
      }
    }
    p->size = 1;
    for (int a = 0; a < dim; ++a) p->size *= static_cast<std::size_t>(p->n[a]);
    p->last_half = p->n[dim - 1] / 2 + 1;
    p->spec_size = p->size / static_cast<std::size_t>(p->n[dim - 1]) * p->last_half;
    p->build_wavenumbers();
    p->build_plans();
    impl_ = std::move(p);
  }

  static Grid cube(int dim, int n) { return Grid(dim, {n, n, n}); }

  int dim() const noexcept { return impl_->dim; }
  int n(int axis) const { return impl_->n[axis]; }
  std::array<int, 3> shape() const { return impl_->n; }
  double spacing(int axis) const { return kTwoPi / impl_->n[axis]; }
  std::size_t size() const noexcept { return impl_->size; }
  std::size_t spectral_size() const noexcept { return impl_->spec_size; }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim(); ++a) v *= spacing(a);
    return v;
  }
  double volume() const { return std::pow(kTwoPi, dim()); }
  bool valid() const noexcept { return static_cast<bool>(impl_); }

  std::array<int, 3> index(std::size_t p) const {
    std::array<int, 3> ix{0, 0, 0};
    for (int a = dim() - 1; a >= 0; --a) {
      ix[a] = static_cast<int>(p % static_cast<std::size_t>(impl_->n[a]));
      p /= static_cast<std::size_t>(impl_->n[a]);
    }
    return ix;
  }

  std::array<double, 3> point(std::size_t p) const {
    auto ix = index(p);
    std::array<double, 3> x{0, 0, 0};
    for (int a = 0; a < dim(); ++a) x[a] = ix[a] * spacing(a);
    return x;
  }

  // integer wavenumber of spectral entry q along axis a
  const std::vector<double>& wavenumber(int axis) const { return impl_->k[axis]; }
  const std::vector<unsigned char>& nyquist(int axis) const { return impl_->nyq[axis]; }
  const std::vector<unsigned char>& dealias_mask() const { return impl_->mask; }

  Spectrum forward(const Plane& f) const {
    if (f.size() != size()) throw std::invalid_argument("forward: size mismatch");
    Impl& p = *impl_;
    std::copy(f.begin(), f.end(), p.rbuf);
    fftw_execute(p.r2c);
    Spectrum out(spectral_size());
    for (std::size_t q = 0; q < out.size(); ++q) out[q] = {p.cbuf[q][0], p.cbuf[q][1]};
    return out;
  }

  Plane inverse(const Spectrum& s) const {
    if (s.size() != spectral_size()) throw std::invalid_argument("inverse: size mismatch");
    Impl& p = *impl_;
    for (std::size_t q = 0; q < s.size(); ++q) {
      p.cbuf[q][0] = s[q].real();
      p.cbuf[q][1] = s[q].imag();
    }
    fftw_execute(p.c2r);
    Plane out(size());
    const double inv = 1.0 / static_cast<double>(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.rbuf[i] * inv;
    return out;
  }

  bool operator==(const Grid& o) const {
    if (impl_ == o.impl_) return true;
    if (!impl_ || !o.impl_) return false;
    return impl_->dim == o.impl_->dim && impl_->n == o.impl_->n;
  }

 private:
  struct Impl {
    int dim = 1;
    std::array<int, 3> n{1, 1, 1};
    std::size_t size = 0;
    std::size_t spec_size = 0;
    int last_half = 0;
    std::array<std::vector<double>, 3> k;
    std::array<std::vector<unsigned char>, 3> nyq;
    std::vector<unsigned char> mask;
    double* rbuf = nullptr;
    fftw_complex* cbuf = nullptr;
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;

    void build_wavenumbers() {
      for (int a = 0; a < 3; ++a) {
        k[a].assign(spec_size, 0.0);
        nyq[a].assign(spec_size, 0);
      }
      mask.assign(spec_size, 1);
      std::array<int, 3> ext{1, 1, 1};
      for (int a = 0; a < dim; ++a) ext[a] = n[a];
      ext[dim - 1] = last_half;
      for (std::size_t q = 0; q < spec_size; ++q) {
        std::size_t r = q;
        std::array<int, 3> ix{0, 0, 0};
        for (int a = dim - 1; a >= 0; --a) {
          ix[a] = static_cast<int>(r % static_cast<std::size_t>(ext[a]));
          r /= static_cast<std::size_t>(ext[a]);
        }
        for (int a = 0; a < dim; ++a) {
          int kk = ix[a];
          if (a != dim - 1 && kk > n[a] / 2) kk -= n[a];
          if (a != dim - 1 && kk == n[a] / 2) kk = -n[a] / 2;
          k[a][q] = kk;
          nyq[a][q] = (std::abs(kk) == n[a] / 2) ? 1 : 0;
          if (3 * std::abs(kk) >= n[a]) mask[q] = 0;
        }
      }
    }

    void build_plans() {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      rbuf = fftw_alloc_real(size);
      cbuf = fftw_alloc_complex(spec_size);
      int dims[3] = {n[0], n[1], n[2]};
      r2c = fftw_plan_dft_r2c(dim, dims, rbuf, cbuf, FFTW_ESTIMATE);
      c2r = fftw_plan_dft_c2r(dim, dims, cbuf, rbuf, FFTW_ESTIMATE);
      if (!r2c || !c2r) throw std::runtime_error("fftw planning failed");
    }

    ~Impl() {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      if (r2c) fftw_destroy_plan(r2c);
      if (c2r) fftw_destroy_plan(c2r);
      if (rbuf) fftw_free(rbuf);
      if (cbuf) fftw_free(cbuf);
    }
  };
  std::shared_ptr<Impl> impl_;
};

template <std::size_t NC>
struct Field {
  static constexpr std::size_t ncomp = NC;
  Grid grid;
  std::array<Plane, NC> c;

  Field() = default;
  explicit Field(const Grid& g, double fill = 0.0) : grid(g) {
    for (auto& p : c) p.assign(g.size(), fill);
  }

  Plane& operator[](std::size_t i) { return c[i]; }
  const Plane& operator[](std::size_t i) const { return c[i]; }
  std::size_t points() const { return grid.size(); }

  std::array<double, NC> at(std::size_t p) const {
    std::array<double, NC> r{};
    for (std::size_t i = 0; i < NC; ++i) r[i] = c[i][p];
    return r;
  }
  void set(std::size_t p, const std::array<double, NC>& v) {
    for (std::size_t i = 0; i < NC; ++i) c[i][p] = v[i];
  }

  template <class Fn>
  static Field generate(const Grid& g, Fn&& fn) {
    Field out(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      auto x = g.point(p);
      if constexpr (NC == 1) {
        out.c[0][p] = fn(x);
      } else {
        out.set(p, fn(x));
      }
    }
    return out;
  }

  Field& operator+=(const Field& o) {
    for (std::size_t i = 0; i < NC; ++i)
      for (std::size_t p = 0; p < c[i].size(); ++p) c[i][p] += o.c[i][p];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t i = 0; i < NC; ++i)
      for (std::size_t p = 0; p < c[i].size(); ++p) c[i][p] -= o.c[i][p];
    return *this;
  }
  Field& operator*=(double s) {
    for (auto& pl : c)
      for (auto& x : pl) x *= s;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  bool operator==(const Field& o) const { return grid == o.grid && c == o.c; }
};

using ScalarField = Field<1>;
using VectorField = Field<3>;
using MatrixField = Field<9>;

inline constexpr std::size_t mi(int i, int j) { return static_cast<std::size_t>(3 * i + j); }

template <std::size_t NC>
void require_same_grid(const Field<NC>& f, const Grid& g, const char* what) {
  if (!(f.grid == g)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

// multiply a spectrum by the symbol of d^m, Nyquist zeroed on odd orders
inline void apply_derivative(const Grid& g, Spectrum& s, const MultiIndex& m) {
  for (int a = 0; a < 3; ++a) {
    if (m[a] == 0) continue;
    if (a >= g.dim()) {
      std::fill(s.begin(), s.end(), cplx{0.0, 0.0});
      return;
    }
    const auto& k = g.wavenumber(a);
    const auto& ny = g.nyquist(a);
    const bool odd = m[a] % 2 != 0;
    for (std::size_t q = 0; q < s.size(); ++q) {
      if (odd && ny[q]) {
        s[q] = 0.0;
        continue;
      }
      cplx ik{0.0, k[q]};
      cplx f{1.0, 0.0};
      for (int r = 0; r < m[a]; ++r) f *= ik;
      s[q] *= f;
    }
  }
}

inline Plane derivative(const Grid& g, const Spectrum& s, const MultiIndex& m) {
  Spectrum t = s;
  apply_derivative(g, t, m);
  return g.inverse(t);
}

inline MultiIndex axis_index(int axis, int order) {
  MultiIndex m{0, 0, 0};
  m[axis] = order;
  return m;
}

template <std::size_t NC>
Field<NC> spectral_derivative(const Field<NC>& f, int axis, int order) {
  if (axis < 0 || axis >= f.grid.dim())
    throw std::invalid_argument("spectral_derivative: axis " + std::to_string(axis) + " out of range");
  if (order < 1) throw std::invalid_argument("spectral_derivative: order must be >= 1");
  Field<NC> out(f.grid);
  for (std::size_t i = 0; i < NC; ++i) out.c[i] = derivative(f.grid, f.grid.forward(f.c[i]), axis_index(axis, order));
  return out;
}

inline Plane laplacian_plane(const Grid& g, const Spectrum& s) {
  Spectrum t(s.size());
  for (std::size_t q = 0; q < s.size(); ++q) {
    double k2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) k2 += g.wavenumber(a)[q] * g.wavenumber(a)[q];
    t[q] = -k2 * s[q];
  }
  return g.inverse(t);
}

inline Plane laplacian_plane(const Grid& g, const Plane& f) { return laplacian_plane(g, g.forward(f)); }

template <std::size_t NC>
Field<NC> laplacian(const Field<NC>& f) {
  Field<NC> out(f.grid);
  for (std::size_t i = 0; i < NC; ++i) out.c[i] = laplacian_plane(f.grid, f.c[i]);
  return out;
}

// gradient of a plane: three components, zero along inactive axes
inline std::array<Plane, 3> gradient_plane(const Grid& g, const Plane& f) {
  std::array<Plane, 3> out;
  Spectrum s = g.forward(f);
  for (int a = 0; a < 3; ++a) out[a] = a < g.dim() ? derivative(g, s, axis_index(a, 1)) : Plane(g.size(), 0.0);
  return out;
}

inline VectorField gradient(const ScalarField& f) {
  VectorField out(f.grid);
  out.c = gradient_plane(f.grid, f.c[0]);
  return out;
}

// J(i,j) = d_j v_i
inline MatrixField jacobian(const VectorField& v) {
  MatrixField out(v.grid);
  for (int i = 0; i < 3; ++i) {
    auto gi = gradient_plane(v.grid, v.c[i]);
    for (int j = 0; j < 3; ++j) out.c[mi(i, j)] = std::move(gi[j]);
  }
  return out;
}

inline Plane divergence_plane(const Grid& g, const std::array<const Plane*, 3>& comps) {
  Spectrum acc(g.spectral_size(), cplx{0.0, 0.0});
  for (int a = 0; a < g.dim(); ++a) {
    Spectrum s = g.forward(*comps[a]);
    apply_derivative(g, s, axis_index(a, 1));
    for (std::size_t q = 0; q < s.size(); ++q) acc[q] += s[q];
  }
  return g.inverse(acc);
}

inline ScalarField divergence(const VectorField& v) {
  ScalarField out(v.grid);
  out.c[0] = divergence_plane(v.grid, {&v.c[0], &v.c[1], &v.c[2]});
  return out;
}

// (div G)_i = d_j G^{ji}
inline VectorField divergence(const MatrixField& G) {
  VectorField out(G.grid);
  for (int i = 0; i < 3; ++i) out.c[i] = divergence_plane(G.grid, {&G.c[mi(0, i)], &G.c[mi(1, i)], &G.c[mi(2, i)]});
  return out;
}

inline VectorField grad_div(const VectorField& v) { return gradient(divergence(v)); }

inline void dealias(const Grid& g, Plane& f) {
  Spectrum s = g.forward(f);
  const auto& m = g.dealias_mask();
  for (std::size_t q = 0; q < s.size(); ++q)
    if (!m[q]) s[q] = 0.0;
  f = g.inverse(s);
}

template <std::size_t NC>
void dealias(Field<NC>& f) {
  for (auto& p : f.c) dealias(f.grid, p);
}

inline std::vector<MultiIndex> multi_indices_of_order(int dim, int order) {
  std::vector<MultiIndex> out;
  for (int a = 0; a <= order; ++a)
    for (int b = 0; b <= order - a; ++b) {
      int c = order - a - b;
      MultiIndex m{a, b, c};
      bool ok = true;
      for (int ax = dim; ax < 3; ++ax)
        if (m[ax] != 0) ok = false;
      if (ok) out.push_back(m);
    }
  return out;
}

inline std::vector<MultiIndex> multi_indices(int dim, int s) {
  std::vector<MultiIndex> out;
  for (int r = 0; r <= s; ++r) {
    auto v = multi_indices_of_order(dim, r);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

inline double quad_product(const Grid& g, const Plane& f, const Plane& h, const Plane* w) {
  std::vector<double> t(g.size());
  if (w) {
    for (std::size_t p = 0; p < t.size(); ++p) t[p] = f[p] * h[p] * (*w)[p];
  } else {
    for (std::size_t p = 0; p < t.size(); ++p) t[p] = f[p] * h[p];
  }
  return pairwise_sum(t) * g.cell_volume();
}

template <std::size_t NC>
double inner_product_l2(const Field<NC>& f, const Field<NC>& h, const ScalarField* weight = nullptr) {
  require_same_grid(h, f.grid, "inner_product_l2");
  if (weight) require_same_grid(*weight, f.grid, "inner_product_l2 weight");
  double s = 0.0;
  for (std::size_t i = 0; i < NC; ++i) s += quad_product(f.grid, f.c[i], h.c[i], weight ? &weight->c[0] : nullptr);
  return s;
}

inline constexpr int kMaxSobolevOrder = 6;

// sum over |m| <= s of <d^m f, d^m h>_w
template <std::size_t NC>
double sobolev_inner(const Field<NC>& f, const Field<NC>& h, int s, const ScalarField* weight = nullptr) {
  if (s < 0 || s > kMaxSobolevOrder) throw std::invalid_argument("sobolev order out of range [0,6]");
  require_same_grid(h, f.grid, "sobolev_inner");
  const Grid& g = f.grid;
  const Plane* w = weight ? &weight->c[0] : nullptr;
  auto idx = multi_indices(g.dim(), s);
  double total = 0.0;
  for (std::size_t i = 0; i < NC; ++i) {
    Spectrum sf = g.forward(f.c[i]);
    Spectrum sh = (&f == &h) ? sf : g.forward(h.c[i]);
    for (const auto& m : idx) {
      Plane df = derivative(g, sf, m);
      if (&f == &h) {
        total += quad_product(g, df, df, w);
      } else {
        total += quad_product(g, df, derivative(g, sh, m), w);
      }
    }
  }
  return total;
}

template <std::size_t NC>
double sobolev_norm_sq(const Field<NC>& f, int s, const ScalarField* weight = nullptr) {
  if (weight) {
    for (double x : weight->c[0])
      if (!(x > 0.0)) throw std::invalid_argument("sobolev_norm_sq: weight must be positive");
  }
  return sobolev_inner(f, f, s, weight);
}

template <std::size_t NC>
std::array<double, NC> spatial_mean(const Field<NC>& f) {
  std::array<double, NC> m{};
  for (std::size_t i = 0; i < NC; ++i) m[i] = pairwise_sum(f.c[i]) / static_cast<double>(f.grid.size());
  return m;
}

template <std::size_t NC>
Field<NC> subtract_mean(Field<NC> f) {
  auto m = spatial_mean(f);
  for (std::size_t i = 0; i < NC; ++i)
    for (auto& x : f.c[i]) x -= m[i];
  return f;
}

template <std::size_t NC>
double max_abs(const Field<NC>& f) {
  double m = 0.0;
  for (const auto& pl : f.c)
    for (double x : pl) m = std::max(m, std::abs(x));
  return m;
}

template <std::size_t NC>
double max_abs_diff(const Field<NC>& a, const Field<NC>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < NC; ++i)
    for (std::size_t p = 0; p < a.c[i].size(); ++p) m = std::max(m, std::abs(a.c[i][p] - b.c[i][p]));
  return m;
}

template <std::size_t NC>
bool all_finite(const Field<NC>& f) {
  for (const auto& pl : f.c)
    for (double x : pl)
      if (!std::isfinite(x)) return false;
  return true;
}

// L2 norm squared from the Fourier coefficients (Parseval)
template <std::size_t NC>
double modal_l2_sq(const Field<NC>& f) {
  const Grid& g = f.grid;
  const int last = g.dim() - 1;
  const int nl = g.n(last);
  double total = 0.0;
  for (std::size_t i = 0; i < NC; ++i) {
    Spectrum s = g.forward(f.c[i]);
    for (std::size_t q = 0; q < s.size(); ++q) {
      int kl = static_cast<int>(g.wavenumber(last)[q]);
      double w = (kl == 0 || kl == nl / 2) ? 1.0 : 2.0;
      total += w * std::norm(s[q]);
    }
  }
  return total * g.volume() / (static_cast<double>(g.size()) * static_cast<double>(g.size()));
}

// evaluate the trigonometric interpolant of a spectrum at an arbitrary point
inline double interpolate(const Grid& g, const Spectrum& s, const std::array<double, 3>& x) {
  const int last = g.dim() - 1;
  const int nl = g.n(last);
  double acc = 0.0;
  for (std::size_t q = 0; q < s.size(); ++q) {
    if (s[q] == cplx{0.0, 0.0}) continue;
    double phase = 0.0;
    for (int a = 0; a < g.dim(); ++a) phase += g.wavenumber(a)[q] * x[a];
    int kl = static_cast<int>(g.wavenumber(last)[q]);
    double w = (kl == 0 || kl == nl / 2) ? 1.0 : 2.0;
    acc += w * (s[q].real() * std::cos(phase) - s[q].imag() * std::sin(phase));
  }
  return acc / static_cast<double>(g.size());
}

}  // namespace nslg
