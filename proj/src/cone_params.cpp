#include "sme/cone_params.hpp"

#include <cmath>

namespace sme {

double decay_exponent(double dim_sum) {
  const double half = 0.5 * (dim_sum - 3.0);
  const double disc = half * half - (dim_sum - 2.0);
  require(disc >= 0.0, errc::eta_too_large,
          "decay exponent is complex: ((s-3)/2)^2 < s-2 for s=" + std::to_string(dim_sum));
  return -half + std::sqrt(disc);
}

ConeParams make_cone_params(int n, int m, int ell, double eta, double e_exponent) {
  require(n >= 3 && m >= 2 && n + m >= 8, errc::bad_dimensions,
          "need n>=3, m>=2, n+m>=8, got n=" + std::to_string(n) + " m=" + std::to_string(m));
  require(ell >= 1, errc::bad_dimensions, "need ell>=1");
  require(eta > 0.0 && eta <= 0.25, errc::invalid_argument, "eta must lie in (0, 1/4]");
  require(e_exponent > 0.0, errc::invalid_argument, "e_exponent must be positive");

  ConeParams p;
  p.n = n;
  p.m = m;
  p.ell = ell;
  p.eta = eta;
  p.e_exponent = e_exponent;
  p.alpha0 = std::sqrt(double(m - 1) / double(n - 1));
  p.gamma = decay_exponent(double(n + m));

  p.n_tilde = 1.0 + double(n - 1) / (1.0 + eta);
  p.m_tilde = 1.0 + double(m - 1) / (1.0 + eta);
  p.gamma_tilde = decay_exponent(p.n_tilde + p.m_tilde);

  require(p.gamma_tilde < p.gamma && p.gamma < 0.0, errc::property_violation,
          "expected gamma_tilde < gamma < 0");
  require((1.0 + e_exponent) * std::fabs(p.gamma) > std::fabs(p.gamma_tilde),
          errc::exponent_gap_violated,
          "(1+e)|gamma| <= |gamma_tilde|: increase e_exponent above " +
              std::to_string(std::fabs(p.gamma_tilde) / std::fabs(p.gamma) - 1.0));
  return p;
}

}  // namespace sme
