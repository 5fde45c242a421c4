#ifndef SME_SME_OPERATOR_HPP
#define SME_SME_OPERATOR_HPP

#include <functional>

#include "sme/grid2d.hpp"

namespace sme {

struct OperatorResidual {
  std::vector<double> field;  // node values, same layout as the grid
  double sup_norm = 0.0;
  double l2_norm = 0.0;
};

// Conformal factor with first derivatives at a physical point.
struct FactorValue {
  double f = 1.0, f_r = 0.0, f_y = 0.0;
};
using ConformalFactorFn = std::function<FactorValue(double r, double y)>;
inline FactorValue unit_factor(double, double) { return {}; }

// M(u) = Lap u - Q(u)/(1+|Du|^2) - (m-1)/u with the radial Laplacian term
// (n-1) u_r / r replaced by (n-1) u_rr on the axis.
double sme_kernel(const NodeDerivs& nd, const ConeParams& params);

// Residual of the g-minimality equation
//   1/2 (m + (1+f|Du|^2)^-1) Df.Du + f (Lap u - f Q(u)/(1+f|Du|^2)) - (m-1)/u;
// with f == 1 this reduces, term by term in the same arithmetic, to M(u).
double g_kernel(const NodeDerivs& nd, const FactorValue& fv, const ConeParams& params);

OperatorResidual sme_residual(const Grid2D& u, const ConeParams& params);
OperatorResidual g_minimality_residual(const Grid2D& u, const ConformalFactorFn& f,
                                       const ConeParams& params);

// Q(u) = u_r^2 u_rr + u_y^2 u_yy + 2 u_r u_y u_ry sampled with the shared
// stencils.
std::vector<double> q_term(const Grid2D& u);

// Trapezoidal quadrature of sqrt(1+f|Du|^2) f^{(m-1)/2} u^{m-1} r^{n-1} over
// the mapped domain; the spherical measure mu_{m-1}(S^{m-1}) is not included.
double weighted_area(const Grid2D& u, const ConformalFactorFn& f, const ConeParams& params);

// Residual of L(u1-u2) + (1+|Du1|^2)^{-1/2} (m-1)/(u1 u2) (u1-u2), with the
// divergence-form coefficients a_ij integrated by Gauss-Legendre over the
// segment between the two gradients.
OperatorResidual difference_residual(const Grid2D& u1, const Grid2D& u2,
                                     const ConeParams& params);

// Observed convergence order from two residual sup-norms at 2x refinement.
inline double order_estimate(double coarse, double fine) {
  return std::log2(coarse / fine);
}

}  // namespace sme

#endif  // SME_SME_OPERATOR_HPP
