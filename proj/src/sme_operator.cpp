#include "sme/sme_operator.hpp"

#include <cmath>

namespace sme {

namespace {

void finish_norms(OperatorResidual& res) {
  double sup = 0.0, sumsq = 0.0;
  for (double v : res.field) {
    sup = std::max(sup, std::fabs(v));
    sumsq += v * v;
  }
  res.sup_norm = sup;
  res.l2_norm = std::sqrt(sumsq / double(res.field.size()));
}

void check_positive(const Grid2D& u) {
  for (double v : u.values)
    require(v > 0.0, errc::nonpositive_u, "operator input must be positive");
}

void check_size(const Grid2D& u) {
  require(u.n_rho >= 16 && u.n_y >= 16, errc::grid_too_coarse,
          "operator needs at least a 16x16 grid");
}

double laplacian(const NodeDerivs& nd, const ConeParams& params) {
  const double radial =
      nd.at_axis ? double(params.n - 1) * nd.u_rr : double(params.n - 1) * nd.u_r / nd.r;
  return nd.u_rr + radial + nd.u_yy;
}

double q_of(const NodeDerivs& nd) {
  return sqr(nd.u_r) * nd.u_rr + sqr(nd.u_y) * nd.u_yy + 2.0 * nd.u_r * nd.u_y * nd.u_ry;
}

}  // namespace

double g_kernel(const NodeDerivs& nd, const FactorValue& fv, const ConeParams& params) {
  const double grad2 = sqr(nd.u_r) + sqr(nd.u_y);
  const double lap = laplacian(nd, params);
  const double q = q_of(nd);
  const double denom = 1.0 + fv.f * grad2;
  const double df_du = fv.f_r * nd.u_r + fv.f_y * nd.u_y;
  return 0.5 * (double(params.m) + 1.0 / denom) * df_du +
         fv.f * (lap - fv.f * q / denom) - double(params.m - 1) / nd.u;
}

double sme_kernel(const NodeDerivs& nd, const ConeParams& params) {
  return g_kernel(nd, FactorValue{}, params);
}

OperatorResidual sme_residual(const Grid2D& u, const ConeParams& params) {
  return g_minimality_residual(u, unit_factor, params);
}

OperatorResidual g_minimality_residual(const Grid2D& u, const ConformalFactorFn& f,
                                       const ConeParams& params) {
  check_positive(u);
  check_size(u);
  OperatorResidual res;
  res.field.resize(u.values.size());
  for (std::size_t j = 0; j < u.n_y; ++j)
    for (std::size_t i = 0; i < u.n_rho; ++i) {
      const NodeDerivs nd = mapped_derivs(u, i, j);
      res.field[u.index(i, j)] = g_kernel(nd, f(nd.r, nd.yv), params);
    }
  finish_norms(res);
  return res;
}

std::vector<double> q_term(const Grid2D& u) {
  check_size(u);
  std::vector<double> out(u.values.size());
  for (std::size_t j = 0; j < u.n_y; ++j)
    for (std::size_t i = 0; i < u.n_rho; ++i)
      out[u.index(i, j)] = q_of(mapped_derivs(u, i, j));
  return out;
}

double weighted_area(const Grid2D& u, const ConformalFactorFn& f, const ConeParams& params) {
  check_positive(u);
  const double drho = u.drho();
  const double dy = u.dy();
  double total = 0.0;
  for (std::size_t j = 0; j < u.n_y; ++j) {
    const double wy =
        (!u.periodic && (j == 0 || j + 1 == u.n_y)) ? 0.5 * dy : dy;
    double column = 0.0;
    for (std::size_t i = 0; i < u.n_rho; ++i) {
      const NodeDerivs nd = mapped_derivs(u, i, j);
      const double fv = f(nd.r, nd.yv).f;
      const double grad2 = sqr(nd.u_r) + sqr(nd.u_y);
      const double integrand = std::sqrt(1.0 + fv * grad2) *
                               std::pow(fv, 0.5 * double(params.m - 1)) *
                               std::pow(nd.u, double(params.m - 1)) *
                               std::pow(nd.r, double(params.n - 1));
      const double wr = (i == 0 || i + 1 == u.n_rho) ? 0.5 * drho : drho;
      column += wr * integrand;
    }
    total += wy * column * u.R[j];  // dr = R(y) drho
  }
  return total;
}

OperatorResidual difference_residual(const Grid2D& u1, const Grid2D& u2,
                                     const ConeParams& params) {
  require(u1.n_rho == u2.n_rho && u1.n_y == u2.n_y && u1.y0 == u2.y0 && u1.y1 == u2.y1,
          errc::domain_mismatch, "difference_residual: grids must match");
  for (std::size_t k = 0; k < u1.R.size(); ++k)
    require(u1.R[k] == u2.R[k], errc::domain_mismatch,
            "difference_residual: column radii must match");
  check_positive(u1);
  check_positive(u2);

  // 8-point Gauss-Legendre on [0,1].
  static const double gx[8] = {0.01985507175123188, 0.10166676129318664,
                               0.2372337950418355,  0.40828267875217505,
                               0.5917173212478249,  0.7627662049581645,
                               0.8983332387068134,  0.9801449282487681};
  static const double gw[8] = {0.05061426814518813, 0.11119051722668723,
                               0.15685332293894364, 0.18134189168918097,
                               0.18134189168918097, 0.15685332293894364,
                               0.11119051722668723, 0.05061426814518813};

  const std::size_t nn = u1.values.size();
  std::vector<double> a11(nn), a12(nn), a22(nn), b1(nn), b2(nn), v(nn);
  std::vector<NodeDerivs> nd1(nn), nd2(nn);
  for (std::size_t j = 0; j < u1.n_y; ++j)
    for (std::size_t i = 0; i < u1.n_rho; ++i) {
      const std::size_t k = u1.index(i, j);
      nd1[k] = mapped_derivs(u1, i, j);
      nd2[k] = mapped_derivs(u2, i, j);
      v[k] = u1.at(i, j) - u2.at(i, j);
      // a_ij = int_0^1 (1+|Dut|^2)^{-1/2} (d_ij - Dut_i Dut_j/(1+|Dut|^2)) dt
      // along Dut = Du1 + t (Du2 - Du1).
      double s11 = 0.0, s12 = 0.0, s22 = 0.0;
      for (int q = 0; q < 8; ++q) {
        const double t = gx[q];
        const double pr = nd1[k].u_r + t * (nd2[k].u_r - nd1[k].u_r);
        const double py = nd1[k].u_y + t * (nd2[k].u_y - nd1[k].u_y);
        const double w2 = 1.0 + pr * pr + py * py;
        const double w = 1.0 / std::sqrt(w2);
        s11 += gw[q] * w * (1.0 - pr * pr / w2);
        s12 += gw[q] * w * (-pr * py / w2);
        s22 += gw[q] * w * (1.0 - py * py / w2);
      }
      a11[k] = s11;
      a12[k] = s12;
      a22[k] = s22;
      // b_j = (m-1) u2^{-1} (V1 V2 (V1+V2))^{-1} D_j(u1+u2).
      const double V1 = std::sqrt(1.0 + sqr(nd1[k].u_r) + sqr(nd1[k].u_y));
      const double V2 = std::sqrt(1.0 + sqr(nd2[k].u_r) + sqr(nd2[k].u_y));
      const double c = double(params.m - 1) / (nd2[k].u * V1 * V2 * (V1 + V2));
      b1[k] = c * (nd1[k].u_r + nd2[k].u_r);
      b2[k] = c * (nd1[k].u_y + nd2[k].u_y);
    }

  // Assemble L v = a_ij D_ij v + (div a)_j D_j v + b_j D_j v on grid fields.
  Grid2D va = u1, a11g = u1, a12g = u1, a22g = u1;
  va.values = v;
  a11g.values = a11;
  a12g.values = a12;
  a22g.values = a22;

  OperatorResidual res;
  res.field.resize(nn);
  for (std::size_t j = 0; j < u1.n_y; ++j)
    for (std::size_t i = 0; i < u1.n_rho; ++i) {
      const std::size_t k = u1.index(i, j);
      const NodeDerivs dv = mapped_derivs(va, i, j);
      const NodeDerivs d11 = mapped_derivs(a11g, i, j);
      const NodeDerivs d12 = mapped_derivs(a12g, i, j);
      const NodeDerivs d22 = mapped_derivs(a22g, i, j);
      // Radial divergence carries the r^{n-1} weight:
      //   r^{1-n} D_r(r^{n-1} F_r) = D_r F_r + (n-1) F_r / r.
      // At the axis F_r(0) = 0 (u_r and a12 vanish there), so F_r/r tends to
      // d(F_r)/dr = a11 v_rr + (D_r a12) v_y.
      const double Fr = a11[k] * dv.u_r + a12[k] * dv.u_y;
      const double geo = dv.at_axis
                             ? double(params.n - 1) * (a11[k] * dv.u_rr + d12.u_r * dv.u_y)
                             : double(params.n - 1) * Fr / dv.r;
      const double div = a11[k] * dv.u_rr + d11.u_r * dv.u_r + a12[k] * dv.u_ry +
                         d12.u_r * dv.u_y + a12[k] * dv.u_ry + d12.u_y * dv.u_r +
                         a22[k] * dv.u_yy + d22.u_y * dv.u_y + geo;
      const double lower = b1[k] * dv.u_r + b2[k] * dv.u_y;
      const double V1 = std::sqrt(1.0 + sqr(nd1[k].u_r) + sqr(nd1[k].u_y));
      const double zero =
          double(params.m - 1) / (V1 * nd1[k].u * nd2[k].u) * v[k];
      res.field[k] = div + lower + zero;
    }
  finish_norms(res);
  return res;
}

}  // namespace sme
