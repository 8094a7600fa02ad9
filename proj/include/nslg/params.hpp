#pragma once

#include <string>
#include <vector>

namespace nslg {

struct Params {
  double a = 1.0;
  double gamma_p = 2.0;
  double A = 1.0;
  double lambda_d = 1.0;
  double gamma_g = 1.0;
  double mu = 1.0;
  double xi = 0.0;
  double mu0 = 1.0;
};

inline std::vector<std::string> validate_params(const Params& p) {
  std::vector<std::string> v;
  if (!(p.a > 0)) v.emplace_back("a>0");
  if (!(p.gamma_p > 1)) v.emplace_back("gamma_p>1");
  if (!(p.A > 0)) v.emplace_back("A>0");
  if (!(p.lambda_d > 0)) v.emplace_back("lambda_d>0");
  if (!(p.gamma_g >= 0)) v.emplace_back("gamma_g>=0");
  if (!(p.mu > 0)) v.emplace_back("mu>0");
  if (!(p.mu + p.xi > 0)) v.emplace_back("mu+xi>0");
  if (!(p.mu0 >= 0)) v.emplace_back("mu0>=0");
  return v;
}

struct Tolerances {
  double sphere_tol = 1e-8;
  double det_floor = 1e-6;
  double rho_floor = 1e-8;
  double curl_tol = 1e-8;
  double mean_tol = 1e-10;
  double det_consistency_tol = 1e-8;
};

}  // namespace nslg
