#ifndef SME_CONE_PARAMS_HPP
#define SME_CONE_PARAMS_HPP

#include "sme/common.hpp"

namespace sme {

// Dimension data for the symmetric minimal surface equation together with the
// derived cone slope and decay exponents.  All quantities are validated at
// construction; instances are immutable.
struct ConeParams {
  int n = 0;              // base dimension (>= 3)
  int m = 0;              // fibre dimension (>= 2, n + m >= 8)
  int ell = 1;            // number of translation directions (>= 1)
  double alpha0 = 0.0;    // cone slope sqrt((m-1)/(n-1))
  double gamma = 0.0;     // decay exponent, larger root of g^2+(n+m-3)g+(n+m-2)=0
  double eta = 0.0;       // dimension perturbation, in (0, 1/4]
  double n_tilde = 0.0;   // 1 + (n-1)/(1+eta)
  double m_tilde = 0.0;   // 1 + (m-1)/(1+eta)
  double gamma_tilde = 0.0;  // decay exponent of the perturbed dimensions
  double e_exponent = 0.0;   // scale gap, needs (1+e)|gamma| > |gamma_tilde|
};

// Larger root of g^2 + (s-3)g + (s-2) = 0 where s = dim sum.  Throws
// eta_too_large when the discriminant is negative (used for both gamma and
// gamma_tilde; the gate n+m>=8 makes the unperturbed case always real).
double decay_exponent(double dim_sum);

ConeParams make_cone_params(int n, int m, int ell, double eta, double e_exponent);

}  // namespace sme

#endif  // SME_CONE_PARAMS_HPP
