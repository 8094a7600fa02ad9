#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "nslg/energetics.hpp"
#include "nslg/params.hpp"

namespace nslg {

using Mat4 = std::array<std::array<double, 4>, 4>;

// quadratic-form matrix in V = (|grad u|, |div u|, |grad psi|, |grad theta|_w)
inline Mat4 coeff_matrix(const Params& p, const CoeffChoice& c) {
  const double ag = p.a * p.gamma_p;
  const double e = c.epsilon, d = c.delta, h = c.eta, mx = p.mu + p.xi;
  const double a1 = e * p.mu + d * p.mu - d * c.c_p / p.mu;
  const double a2 = (e + d) * mx;
  const double b = -0.5 * (1.0 + d);
  const double cc = -d * mx / (2.0 * p.mu);
  const double ee = d / p.mu;
  const double r1 = -0.5 * (c.c0 * e * h * p.mu + c.c1 * d * p.mu * ag);
  const double r2 = -0.5 * c.c0 * e * h * mx;
  const double q = -0.5 * (c.c0 * e * h + c.c1 * d * ag);
  const double f = e * h * ag;
  return {{{a1, 0.0, b, r1}, {0.0, a2, cc, r2}, {b, cc, ee, q}, {r1, r2, q, f}}};
}

// determinant of the leading k x k block, Gaussian elimination with partial pivoting
inline double leading_minor(const Mat4& m, int k) {
  std::array<std::array<long double, 4>, 4> a{};
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a[i][j] = m[i][j];
  long double det = 1.0L;
  for (int col = 0; col < k; ++col) {
    int piv = col;
    for (int r = col + 1; r < k; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (a[piv][col] == 0.0L) return 0.0;
    if (piv != col) {
      std::swap(a[piv], a[col]);
      det = -det;
    }
    det *= a[col][col];
    for (int r = col + 1; r < k; ++r) {
      long double f = a[r][col] / a[col][col];
      for (int j = col; j < k; ++j) a[r][j] -= f * a[col][j];
    }
  }
  return static_cast<double>(det);
}

inline double quadratic_form(const Mat4& m, const std::array<double, 4>& v) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s += v[i] * m[i][j] * v[j];
  return s;
}

struct MinorReport {
  // direct determinants of the leading blocks
  double M1 = 0.0, M2 = 0.0, M3 = 0.0, M4 = 0.0;
  // reference closed forms
  double M3_closed = 0.0, M4_closed = 0.0;
  double Xi0 = 0.0, Xi1 = 0.0, Xi2 = 0.0, u_det = 0.0;
  // re-derived closed forms
  double M3_corrected = 0.0, M4_corrected = 0.0, Xi0_corrected = 0.0;
  double c_sharp = 0.0;
};

inline double rel_diff(double a, double b) {
  double s = std::max({std::abs(a), std::abs(b), std::numeric_limits<double>::min()});
  return std::abs(a - b) / s;
}

inline MinorReport coeff_minors(const Params& p, const CoeffChoice& c) {
  const double ag = p.a * p.gamma_p;
  const double e = c.epsilon, d = c.delta, h = c.eta, mu = p.mu, mx = p.mu + p.xi, cp = c.c_p;
  Mat4 m = coeff_matrix(p, c);
  MinorReport r;
  r.M1 = leading_minor(m, 1);
  r.M2 = leading_minor(m, 2);
  r.M3 = leading_minor(m, 3);
  r.M4 = leading_minor(m, 4);

  r.M3_closed = mx * (((1.0 - cp / (mu * mu)) * (1.0 - mx / 4.0) - 0.25) * d * d * d +
                      (e * (2.0 - cp / (mu * mu) - mx / 4.0) - 0.75) * d * d + (e * e - 0.75) * d - 0.25);

  const double D = mu * mu * (e + d) - d * cp;
  const double U = d / mu - mu * (1.0 + d) * (1.0 + d) / (4.0 * D) - d * d * mx / (4.0 * mu * mu * (e + d));
  const double K = 0.5 + mu * mu * (1.0 + d) / (4.0 * D);
  const double L = K + d * mx / (4.0 * mu * (e + d));
  r.u_det = U;
  r.Xi2 = c.c0 * c.c0 * e * e * (-0.25 * (mu * mu * mu / D + mx / (e + d)) * U - L * L);
  r.Xi1 = e * (U * (ag - mu * mu * mu * c.c0 * c.c1 * d * ag / (2.0 * D)) - 2.0 * c.c0 * c.c1 * d * ag * K * L);
  r.Xi0 = (c.c1 * d * ag) * (c.c1 * d * ag) * (mu * mu * mu * U / (4.0 * D) + K * K);
  const double pre = (e + d) * mx / mu * D;
  r.M4_closed = pre * (r.Xi2 * h * h + r.Xi1 * h + r.Xi0);

  const double a1 = D / mu;
  r.M3_corrected = mx * (a1 * (e + d) * d / mu - a1 * d * d * mx / (4.0 * mu * mu) - (e + d) * (1.0 + d) * (1.0 + d) / 4.0);
  r.Xi0_corrected = -r.Xi0;
  r.M4_corrected = pre * (r.Xi2 * h * h + r.Xi1 * h + r.Xi0_corrected);
  r.c_sharp = std::min(d / 2.0, e - 4.0 * cp * cp * d / (mu * mu));
  return r;
}

inline bool minors_positive(const MinorReport& r) {
  return r.M1 > 0 && r.M2 > 0 && r.M3 > 0 && r.M4 > 0 && r.Xi0 > 0 && r.c_sharp > 0;
}

struct SearchLimits {
  double eps_min = 1.0, eps_max = 1e4;
  double delta_min = 1e-6, delta_max = 1.0;
  double eta_min = 1e-8, eta_max = 1.0;
  int per_decade = 10;
  double c0 = 1.0, c1 = 1.0, c_p = 1.0;
};

struct SearchResult {
  bool found = false;
  CoeffChoice choice;
  MinorReport minors;
  // nearest miss when not found: largest min_k sign(M_k)|M_k|^(1/k) / max|entry|
  double score = -std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
};

namespace detail {

inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  int n = static_cast<int>(std::lround(std::log10(hi / lo) * per_decade));
  std::vector<double> v;
  for (int i = 0; i <= n; ++i) v.push_back(lo * std::pow(10.0, static_cast<double>(i) / per_decade));
  return v;
}

inline double pd_score(const Mat4& m, const MinorReport& r) {
  double mx = 0.0;
  for (const auto& row : m)
    for (double x : row) mx = std::max(mx, std::abs(x));
  std::array<double, 4> v{r.M1, r.M2, r.M3, r.M4};
  double s = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) s = std::min(s, std::copysign(std::pow(std::abs(v[k]), 1.0 / (k + 1)), v[k]) / mx);
  return s;
}

}  // namespace detail

inline SearchResult coeff_search(const Params& p, const SearchLimits& lim = {}) {
  SearchResult best;
  if (!(p.mu > 0) || !(p.mu + p.xi > 0)) return best;
  auto E = detail::log_grid(lim.eps_min, lim.eps_max, lim.per_decade);
  auto Dl = detail::log_grid(lim.delta_min, lim.delta_max, lim.per_decade);
  auto H = detail::log_grid(lim.eta_min, lim.eta_max, lim.per_decade);
  for (double e : E)
    for (double d : Dl)
      for (double h : H) {
        CoeffChoice c{d, h, e, lim.c0, lim.c1, lim.c_p};
        MinorReport r = coeff_minors(p, c);
        ++best.evaluated;
        if (minors_positive(r)) {
          best.found = true;
          best.choice = c;
          best.minors = r;
          best.score = detail::pd_score(coeff_matrix(p, c), r);
          return best;
        }
        double sc = detail::pd_score(coeff_matrix(p, c), r);
        if (sc > best.score) {
          best.score = sc;
          best.choice = c;
          best.minors = r;
        }
      }
  return best;
}

}  // namespace nslg
