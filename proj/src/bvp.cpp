#include "sme/bvp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace sme {

namespace {

bool trace_enabled() {
  static const bool on = std::getenv("SMELAB_TRACE") != nullptr;
  return on;
}

struct NewtonSystem {
  const BvpProblem* prob;
  Grid2D* g;
  std::vector<DerivStencil> stencils;       // per node, geometry only
  std::vector<long> row_of;                 // node -> unknown row (-1 for Dirichlet)
  std::vector<std::size_t> node_of;         // row -> node
  std::size_t n_unknowns = 0;

  bool dirichlet(std::size_t i, std::size_t j) const {
    if (i + 1 == g->n_rho) return true;
    if (!g->periodic && (j == 0 || j + 1 == g->n_y)) return true;
    return false;
  }

  void build() {
    const std::size_t nn = g->values.size();
    stencils.resize(nn);
    row_of.assign(nn, -1);
    for (std::size_t j = 0; j < g->n_y; ++j)
      for (std::size_t i = 0; i < g->n_rho; ++i) {
        const std::size_t k = g->index(i, j);
        stencils[k] = mapped_deriv_stencil(*g, i, j);
        if (!dirichlet(i, j)) {
          row_of[k] = long(node_of.size());
          node_of.push_back(k);
        }
      }
    n_unknowns = node_of.size();
  }

  NodeDerivs derivs_at(std::size_t k) const {
    const DerivStencil& st = stencils[k];
    NodeDerivs nd;
    nd.r = st.r;
    nd.at_axis = st.at_axis;
    nd.u = g->values[k];
    for (const auto& e : st.entries) {
      const double v = g->at(e.i, e.j);
      nd.u_r += e.w_r * v;
      nd.u_y += e.w_y * v;
      nd.u_rr += e.w_rr * v;
      nd.u_yy += e.w_yy * v;
      nd.u_ry += e.w_ry * v;
    }
    return nd;
  }

  double residual_sup(Eigen::VectorXd* out = nullptr) const {
    double sup = 0.0;
    for (std::size_t row = 0; row < n_unknowns; ++row) {
      const double f = sme_kernel(derivs_at(node_of[row]), prob->params);
      if (out) (*out)[long(row)] = f;
      sup = std::max(sup, std::fabs(f));
    }
    return sup;
  }

  void jacobian(Eigen::SparseMatrix<double>& J) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n_unknowns * 12);
    const ConeParams& p = prob->params;
    for (std::size_t row = 0; row < n_unknowns; ++row) {
      const std::size_t k = node_of[row];
      const DerivStencil& st = stencils[k];
      const NodeDerivs nd = derivs_at(k);
      const double D = 1.0 + sqr(nd.u_r) + sqr(nd.u_y);
      const double Q = sqr(nd.u_r) * nd.u_rr + sqr(nd.u_y) * nd.u_yy +
                       2.0 * nd.u_r * nd.u_y * nd.u_ry;
      // Partials of M with respect to the six local quantities.
      const double dM_du = double(p.m - 1) / sqr(nd.u);
      double dM_rr = 1.0 - sqr(nd.u_r) / D;
      double dM_r = -(2.0 * nd.u_r * nd.u_rr + 2.0 * nd.u_y * nd.u_ry) / D +
                    Q * 2.0 * nd.u_r / sqr(D);
      if (nd.at_axis)
        dM_rr += double(p.n - 1);
      else
        dM_r += double(p.n - 1) / nd.r;
      const double dM_yy = 1.0 - sqr(nd.u_y) / D;
      const double dM_y = -(2.0 * nd.u_y * nd.u_yy + 2.0 * nd.u_r * nd.u_ry) / D +
                          Q * 2.0 * nd.u_y / sqr(D);
      const double dM_ry = -2.0 * nd.u_r * nd.u_y / D;

      // Unknowns are v = log(u): d/dv_l = u_l d/du_l, which removes the
      // curvature wall of the 1/u reaction and keeps u positive by
      // construction.
      trip.emplace_back(long(row), long(row), dM_du * g->values[k]);
      for (const auto& e : st.entries) {
        const std::size_t kk = g->index(e.i, e.j);
        const long col = row_of[kk];
        if (col < 0) continue;  // dependence on Dirichlet data
        const double w =
            dM_r * e.w_r + dM_y * e.w_y + dM_rr * e.w_rr + dM_yy * e.w_yy + dM_ry * e.w_ry;
        if (w != 0.0) trip.emplace_back(long(row), col, w * g->values[kk]);
      }
    }
    J.setFromTriplets(trip.begin(), trip.end());
  }
};

struct Barriers {
  std::vector<double> lower;     // phi_{eps^{1+e}}(r_ij)
  std::vector<double> upper;     // S_{eps,tau,eps}(r_ij, y_j)
  std::vector<double> boundary_low, boundary_up;  // data at rho = 1
};

Barriers make_barriers(const BvpProblem& pb, const Grid2D& g) {
  Barriers b;
  const std::size_t nn = g.values.size();
  b.lower.resize(nn);
  b.upper.resize(nn);
  b.boundary_low.resize(g.n_y);
  b.boundary_up.resize(g.n_y);
  const double t_low = std::pow(pb.eps, 1.0 + pb.params.e_exponent);
  for (std::size_t j = 0; j < g.n_y; ++j) {
    const double psi = pb.env.psi(g.y[j], pb.eps, pb.tau, pb.eps).v;
    for (std::size_t i = 0; i < g.n_rho; ++i) {
      const double r = g.r_of(i, j);
      b.lower[g.index(i, j)] = eval_scaled_profile(pb.std_profile, t_low, r).value;
      b.upper[g.index(i, j)] = eval_scaled_profile(pb.mod_profile, psi, r).value;
    }
    b.boundary_low[j] = b.lower[g.index(g.n_rho - 1, j)];
    b.boundary_up[j] = b.upper[g.index(g.n_rho - 1, j)];
  }
  return b;
}

void apply_boundary(const BvpProblem& pb, Grid2D& g, const Barriers& b, double sigma) {
  for (std::size_t j = 0; j < g.n_y; ++j) {
    const double datum = (1.0 - sigma) * b.boundary_low[j] + sigma * b.boundary_up[j];
    g.at(g.n_rho - 1, j) = datum;
    if (!g.periodic && (j == 0 || j + 1 == g.n_y))
      for (std::size_t i = 0; i < g.n_rho; ++i) {
        const double r = g.r_of(i, j);
        const double low = b.lower[g.index(i, j)];
        const double up = b.upper[g.index(i, j)];
        (void)r;
        g.at(i, j) = (1.0 - sigma) * low + sigma * up;
      }
  }
}

struct StepChecks {
  bool ok = false;
  double lower_margin = 0.0, upper_margin = 0.0;
  double max_grad = 0.0, max_grad_y = 0.0;
  bool squeeze_fail = false;
};

StepChecks run_checks(const BvpProblem& pb, const NewtonSystem& sys, const Barriers& b,
                      double slack) {
  const Grid2D& g = *sys.g;
  StepChecks c;
  c.lower_margin = std::numeric_limits<double>::infinity();
  c.upper_margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g.n_y; ++j)
    for (std::size_t i = 0; i < g.n_rho; ++i) {
      const std::size_t k = g.index(i, j);
      c.lower_margin = std::min(c.lower_margin, g.values[k] - b.lower[k]);
      if (i + 1 < g.n_rho)  // boundary equals S at sigma=1
        c.upper_margin = std::min(c.upper_margin, b.upper[k] - g.values[k]);
      const NodeDerivs nd = sys.derivs_at(k);
      c.max_grad = std::max(c.max_grad, std::hypot(nd.u_r, nd.u_y));
      c.max_grad_y = std::max(c.max_grad_y, std::fabs(nd.u_y));
    }
  c.squeeze_fail = c.lower_margin < -slack || c.upper_margin < -slack;
  const bool grad_fail = c.max_grad > 2.0 * pb.params.alpha0 || c.max_grad_y > pb.constants.delta0;
  c.ok = !c.squeeze_fail && !grad_fail;
  return c;
}

// Damped Newton with an Armijo line search on the least-squares merit
// (the Newton direction is a descent direction for |F|_2^2 whenever the
// Jacobian is nonsingular, definiteness not required).
std::optional<double> newton_solve(const BvpProblem& pb, NewtonSystem& sys, int* iters_out,
                                   int max_iters) {
  Grid2D& g = *sys.g;
  Eigen::VectorXd F(long(sys.n_unknowns));
  Eigen::SparseMatrix<double> J(long(sys.n_unknowns), long(sys.n_unknowns));
  double res = sys.residual_sup(&F);
  for (int it = 0; it < max_iters; ++it) {
    if (res <= pb.newton_tol) {
      if (iters_out) *iters_out = it;
      return res;
    }
    sys.jacobian(J);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
    if (lu.info() != Eigen::Success) return std::nullopt;
    const Eigen::VectorXd delta = lu.solve(-F);
    if (lu.info() != Eigen::Success) return std::nullopt;

    const double merit0 = F.squaredNorm();
    const std::vector<double> saved = g.values;
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 24; ++ls) {
      g.values = saved;
      for (std::size_t row = 0; row < sys.n_unknowns; ++row) {
        const double dv = std::clamp(lambda * delta[long(row)], -2.0, 2.0);
        g.values[sys.node_of[row]] *= std::exp(dv);
      }
      {
        const double next = sys.residual_sup(&F);
        if (F.squaredNorm() <= (1.0 - 1e-4 * lambda) * merit0 || next <= pb.newton_tol) {
          res = next;
          accepted = true;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (trace_enabled())
      std::fprintf(stderr, "[newton] it=%d lambda=%.5f res=%.3e |dv|=%.3e%s\n", it, lambda,
                   res, delta.lpNorm<Eigen::Infinity>(), accepted ? "" : " REJECT");
    if (!accepted) {
      g.values = saved;
      sys.residual_sup(&F);
      // Stencil round-off floor reached: accept if within sight of the
      // requested tolerance, otherwise report failure.
      if (res <= 2.5 * pb.newton_tol) {
        if (iters_out) *iters_out = it;
        return res;
      }
      return std::nullopt;
    }
  }
  if (res <= pb.newton_tol) {
    if (iters_out) *iters_out = max_iters;
    return res;
  }
  return std::nullopt;
}

double sliding_margin(const BvpProblem& pb, const Grid2D& g) {
  // Numerical shadow of the sliding argument: for 16 values t in [eps, 1],
  // S_{t,tau,eps} - u keeps no interior negative minimum.
  double worst = std::numeric_limits<double>::infinity();
  for (int kt = 0; kt < 16; ++kt) {
    const double t = pb.eps + (1.0 - pb.eps) * double(kt) / 15.0;
    for (std::size_t j = 0; j < g.n_y; ++j) {
      const double psi = pb.env.psi(g.y[j], t, pb.tau, pb.eps).v;
      for (std::size_t i = 0; i + 1 < g.n_rho; ++i) {
        const double S = eval_scaled_profile(pb.mod_profile, psi, g.r_of(i, j)).value;
        worst = std::min(worst, S - g.at(i, j));
      }
    }
  }
  return worst;
}

}  // namespace

BvpSolution solve_bvp(const BvpProblem& pb) {
  require(pb.eps > 0.0 && pb.tau > 0.0, errc::invalid_argument, "eps, tau must be positive");
  require(pb.eps <= pb.env.options().tau0 && pb.tau <= pb.env.options().tau0,
          errc::invalid_argument, "eps, tau must not exceed tau0 of the envelope");
  require(pb.std_profile.variant == ProfileVariant::standard &&
              pb.mod_profile.variant == ProfileVariant::modified,
          errc::invalid_argument, "solve_bvp needs one standard and one modified profile");

  const bool periodic = pb.q_period > 0.0;
  const double y0 = periodic ? -0.5 * pb.q_period : pb.env.y_lo();
  const double y1 = periodic ? 0.5 * pb.q_period : pb.env.y_hi();

  BvpSolution sol;
  sol.eps = pb.eps;
  sol.tau = pb.tau;
  const double t_low = std::pow(pb.eps, 1.0 + pb.params.e_exponent);
  sol.u = make_grid_envelope(pb.n_rho, pb.n_y, pb.env, pb.eps, y0, y1, periodic,
                             [&](double r, double) {
                               return eval_scaled_profile(pb.std_profile, t_low, r).value;
                             });

  NewtonSystem sys;
  sys.prob = &pb;
  sys.g = &sol.u;
  sys.build();
  const Barriers bar = make_barriers(pb, sol.u);

  double sigma = 0.0;
  double dsigma = pb.sigma_step0;
  std::vector<double> data(sol.u.n_y);
  auto set_data = [&](double s) {
    for (std::size_t j = 0; j < sol.u.n_y; ++j)
      data[j] = (1.0 - s) * bar.boundary_low[j] + s * bar.boundary_up[j];
  };
  set_data(sigma);
  apply_boundary(pb, sol.u, bar, sigma);
  {
    int iters = 0;
    const std::optional<double> res = newton_solve(pb, sys, &iters, 60);
    require(res.has_value(), errc::newton_diverged, "initial radial solve did not converge");
    if (trace_enabled())
      std::fprintf(stderr, "[bvp] sigma=0 newton(%d) -> %.3e\n", iters, *res);
    sol.sigma_path.push_back({sigma, iters, *res, true});
  }
  // The barriers are continuum objects; the discrete solution deviates from
  // them by truncation, amplified near the axis by the scale-family
  // sensitivity.  At sigma = 0 the exact solution is the lower barrier
  // itself, so the deviation measured here is the discretization allowance
  // used by the squeeze acceptance.
  double bias = 0.0;
  for (std::size_t k = 0; k < sol.u.values.size(); ++k)
    bias = std::max(bias, bar.lower[k] - sol.u.values[k]);
  sol.discretization_allowance = std::max(1e-8, 1.5 * bias);

  std::vector<double> last_accepted = sol.u.values;
  bool last_fail_squeeze = false;
  while (sigma < 1.0) {
    const double trial = std::min(1.0, sigma + dsigma);
    set_data(trial);
    apply_boundary(pb, sol.u, bar, trial);
    int iters = 0;
    const std::optional<double> res = newton_solve(pb, sys, &iters, pb.max_newton);
    if (trace_enabled())
      std::fprintf(stderr, "[bvp] sigma=%.4f newton(%d) -> %.3e\n", trial, iters,
                   res.value_or(-1.0));
    bool accept = res.has_value();
    StepChecks checks;
    if (accept) {
      checks = run_checks(pb, sys, bar, sol.discretization_allowance);
      accept = checks.ok;
      last_fail_squeeze = !checks.ok && checks.squeeze_fail;
    } else {
      last_fail_squeeze = false;
    }
    sol.sigma_path.push_back({trial, iters, res.value_or(-1.0), accept});
    if (accept) {
      sigma = trial;
      last_accepted = sol.u.values;
      sol.residual_final = *res;
      sol.squeeze_lower_margin = checks.lower_margin;
      sol.squeeze_upper_margin = checks.upper_margin;
      sol.max_grad = checks.max_grad;
      sol.max_grad_y = checks.max_grad_y;
      dsigma = std::min(pb.sigma_step0, 2.0 * dsigma);
    } else {
      sol.u.values = last_accepted;
      dsigma *= 0.5;
      if (dsigma < pb.min_dsigma) {
        if (last_fail_squeeze)
          fail(errc::squeeze_violated,
               "continuation obstructed by the squeeze bounds before sigma = 1");
        fail(errc::continuation_stall, "sigma step underflow at sigma = " + std::to_string(sigma));
      }
    }
  }
  sol.sigma_final = sigma;
  sol.squeeze_ok = sol.squeeze_lower_margin >= -sol.discretization_allowance &&
                   sol.squeeze_upper_margin >= -sol.discretization_allowance;
  sol.grad_ok = sol.max_grad <= 2.0 * pb.params.alpha0 && sol.max_grad_y <= pb.constants.delta0;
  sol.sliding_margin = sliding_margin(pb, sol.u);
  return sol;
}

namespace {

// Cubic Hermite interpolation of one solution column in rho, with nodal
// slopes from the second-order stencils.
double interp_column(const Grid2D& g, std::size_t j, double rho) {
  const double dr = g.drho();
  const double x = std::clamp(rho, 0.0, 1.0) / dr;
  std::size_t i = std::min(std::size_t(x), g.n_rho - 2);
  const double t = x - double(i);
  auto slope = [&](std::size_t ii) {
    if (ii == 0) return 0.0;  // even in r
    if (ii + 1 == g.n_rho)
      return (1.5 * g.at(ii, j) - 2.0 * g.at(ii - 1, j) + 0.5 * g.at(ii - 2, j)) / dr;
    return (g.at(ii + 1, j) - g.at(ii - 1, j)) / (2.0 * dr);
  };
  const double f0 = g.at(i, j), f1 = g.at(i + 1, j);
  const double g0 = slope(i) * dr, g1 = slope(i + 1) * dr;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * g0 + (-2 * t3 + 3 * t2) * f1 +
         (t3 - t2) * g1;
}

}  // namespace

EpsFamilyResult eps_family(const BvpProblem& tmpl, const std::vector<double>& eps_list) {
  require(eps_list.size() >= 3, errc::invalid_argument, "eps_family needs >= 3 epsilons");
  for (std::size_t k = 0; k + 1 < eps_list.size(); ++k)
    require(eps_list[k] > eps_list[k + 1], errc::invalid_argument,
            "eps_list must be strictly decreasing");

  EpsFamilyResult out;
  out.eps_list = eps_list;
  for (double e : eps_list) {
    BvpProblem pb = tmpl;
    pb.eps = e;
    out.solutions.push_back(solve_bvp(pb));
  }

  // Cauchy differences on the smallest-eps grid (a subset of every domain).
  const Grid2D& fine = out.solutions.back().u;
  for (std::size_t k = 0; k + 1 < out.solutions.size(); ++k) {
    const Grid2D& a = out.solutions[k].u;
    const Grid2D& b = out.solutions[k + 1].u;
    double sup = 0.0;
    for (std::size_t j = 0; j < fine.n_y; ++j)
      for (std::size_t i = 0; i < fine.n_rho; ++i) {
        const double r = fine.r_of(i, j);
        const double va = interp_column(a, j, r / a.R[j]);
        const double vb = interp_column(b, j, r / b.R[j]);
        sup = std::max(sup, std::fabs(va - vb));
      }
    out.cauchy_sup.push_back(sup);
  }

  // Quadratic extrapolation in beta = eps^{1/4} at beta = 0, on the fine grid.
  const std::size_t nfit = eps_list.size();
  std::vector<double> beta(nfit);
  for (std::size_t k = 0; k < nfit; ++k) beta[k] = std::pow(eps_list[k], 0.25);
  std::vector<double> lag(nfit, 1.0);
  // Use the last three levels for the extrapolation weights.
  const std::size_t k0 = nfit - 3;
  double L[3];
  for (int a = 0; a < 3; ++a) {
    L[a] = 1.0;
    for (int b = 0; b < 3; ++b)
      if (a != b) L[a] *= (0.0 - beta[k0 + b]) / (beta[k0 + a] - beta[k0 + b]);
  }
  out.u_tau = fine;
  for (std::size_t j = 0; j < fine.n_y; ++j)
    for (std::size_t i = 0; i < fine.n_rho; ++i) {
      const double r = fine.r_of(i, j);
      double v = 0.0;
      for (int a = 0; a < 3; ++a) {
        const Grid2D& g = out.solutions[k0 + a].u;
        v += L[a] * interp_column(g, j, r / g.R[j]);
      }
      out.u_tau.at(i, j) = v;
    }

  // Bound report against S_tau (psi_tau = tau e^{-1/h}); the check only sees
  // columns where psi_tau is representable.
  const ConeParams& cp = tmpl.params;
  out.positivity_margin = std::numeric_limits<double>::infinity();
  out.upper_margin = -std::numeric_limits<double>::infinity();
  bool any_upper = false;
  for (std::size_t j = 0; j < fine.n_y; ++j) {
    const double h = tmpl.env.h_derivs(fine.y[j]).v;
    for (std::size_t i = 0; i < fine.n_rho; ++i) {
      const double r = fine.r_of(i, j);
      const double w = out.u_tau.at(i, j) - cp.alpha0 * r;
      out.positivity_margin = std::min(out.positivity_margin, w);
      if (h > 0.02) {
        const double psi_tau = tmpl.tau * std::exp(-1.0 / h);
        const double s_excess = scaled_excess(tmpl.mod_profile, psi_tau, r);
        out.upper_margin = std::max(out.upper_margin, w - s_excess);
        any_upper = true;
      }
    }
  }
  out.upper_ok = any_upper && out.upper_margin <= 0.0;

  for (int jj = 1; jj <= 4; ++jj) {
    double worst = 0.0;
    for (std::size_t j = 0; j < fine.n_y; ++j) {
      const double h = tmpl.env.h_derivs(fine.y[j]).v;
      if (h < 1e-6) continue;
      const double w0 = out.u_tau.at(0, j);
      worst = std::max(worst, w0 / (tmpl.tau * std::pow(h, jj)));
    }
    out.near_k_ratio.push_back(worst);
  }
  return out;
}

GlobalU::GlobalU(const Grid2D& u_tau, const EnvelopeFn& env, const ConeParams& params,
                 double eps)
    : env_(env), params_(params), grid_(u_tau), eps_(eps) {
  const std::size_t nn = grid_.values.size();
  w_.resize(nn);
  w_rho_.resize(nn);
  w_y_.resize(nn);
  w_rhoy_.resize(nn);
  for (std::size_t j = 0; j < grid_.n_y; ++j)
    for (std::size_t i = 0; i < grid_.n_rho; ++i)
      w_[grid_.index(i, j)] = grid_.at(i, j) - params_.alpha0 * grid_.r_of(i, j);
  // Nodal partials of w in mapped coordinates for the Hermite patches.
  const double dr = grid_.drho(), dyv = grid_.dy();
  auto wval = [&](long i, long j) {
    if (grid_.periodic) {
      j = ((j % long(grid_.n_y)) + long(grid_.n_y)) % long(grid_.n_y);
    } else {
      j = std::clamp<long>(j, 0, long(grid_.n_y) - 1);
    }
    if (i < 0) i = -i;  // even extension
    i = std::min<long>(i, long(grid_.n_rho) - 1);
    return w_[grid_.index(std::size_t(i), std::size_t(j))];
  };
  for (std::size_t j = 0; j < grid_.n_y; ++j)
    for (std::size_t i = 0; i < grid_.n_rho; ++i) {
      const std::size_t k = grid_.index(i, j);
      const long li = long(i), lj = long(j);
      w_rho_[k] = (wval(li + 1, lj) - wval(li - 1, lj)) / (2.0 * dr);
      w_y_[k] = (wval(li, lj + 1) - wval(li, lj - 1)) / (2.0 * dyv);
      w_rhoy_[k] = (wval(li + 1, lj + 1) - wval(li - 1, lj + 1) - wval(li + 1, lj - 1) +
                    wval(li - 1, lj - 1)) /
                   (4.0 * dr * dyv);
    }
}

namespace {

// 1D Hermite basis values and two derivatives at local coordinate t.
struct HermiteBasis {
  double b[4], d[4], dd[4];
};
HermiteBasis hermite_basis(double t, double h) {
  HermiteBasis hb;
  const double t2 = t * t, t3 = t2 * t;
  hb.b[0] = 2 * t3 - 3 * t2 + 1;
  hb.b[1] = (t3 - 2 * t2 + t) * h;
  hb.b[2] = -2 * t3 + 3 * t2;
  hb.b[3] = (t3 - t2) * h;
  hb.d[0] = (6 * t2 - 6 * t) / h;
  hb.d[1] = 3 * t2 - 4 * t + 1;
  hb.d[2] = (-6 * t2 + 6 * t) / h;
  hb.d[3] = 3 * t2 - 2 * t;
  hb.dd[0] = (12 * t - 6) / (h * h);
  hb.dd[1] = (6 * t - 4) / h;
  hb.dd[2] = (-12 * t + 6) / (h * h);
  hb.dd[3] = (6 * t - 2) / h;
  return hb;
}

}  // namespace

GlobalU::Patch GlobalU::node(std::size_t i, std::size_t j) const {
  const std::size_t k = grid_.index(i, j);
  return {w_[k], w_rho_[k], w_y_[k], w_rhoy_[k]};
}

// Bicubic Hermite interpolation of w over one mapped cell; out holds
// (w, w_rho, w_y, w_rhorho, w_yy, w_rhoy) in mapped coordinates.
void GlobalU::excess_interp(double rho, double y, double out[6]) const {
  const double dr = grid_.drho(), dyv = grid_.dy();
  double ry = (y - grid_.y0) / dyv;
  if (grid_.periodic) {
    const double ny = double(grid_.n_y);
    ry -= ny * std::floor(ry / ny);
  }
  const double rx = std::clamp(rho, 0.0, 1.0) / dr;
  std::size_t i = std::min(std::size_t(rx), grid_.n_rho - 2);
  std::size_t j = grid_.periodic ? std::size_t(ry) % grid_.n_y
                                 : std::min(std::size_t(ry), grid_.n_y - 2);
  const std::size_t j1 = grid_.periodic ? (j + 1) % grid_.n_y : j + 1;
  const double tx = rx - double(i);
  const double ty = ry - double(j);

  const Patch p00 = node(i, j), p10 = node(i + 1, j), p01 = node(i, j1), p11 = node(i + 1, j1);
  const HermiteBasis hx = hermite_basis(tx, dr);
  const HermiteBasis hy = hermite_basis(ty, dyv);

  // Coefficients in the 4x4 tensor layout: rows over x-basis, cols y-basis.
  const double C[4][4] = {
      {p00.w, p00.w_y, p01.w, p01.w_y},
      {p00.w_rho, p00.w_rhoy, p01.w_rho, p01.w_rhoy},
      {p10.w, p10.w_y, p11.w, p11.w_y},
      {p10.w_rho, p10.w_rhoy, p11.w_rho, p11.w_rhoy},
  };
  for (int q = 0; q < 6; ++q) out[q] = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const double c = C[a][b];
      out[0] += c * hx.b[a] * hy.b[b];
      out[1] += c * hx.d[a] * hy.b[b];
      out[2] += c * hx.b[a] * hy.d[b];
      out[3] += c * hx.dd[a] * hy.b[b];
      out[4] += c * hx.b[a] * hy.dd[b];
      out[5] += c * hx.d[a] * hy.d[b];
    }
}

GlobalU::Value GlobalU::eval_excess(double r, double y) const {
  Value v;
  const Derivs2 h = env_.h_derivs(y);
  if (h.v <= 0.0) {
    v.cone = true;
    return v;
  }
  const double H = h.v * h.v;
  if (r >= H) {
    v.cone = true;
    return v;
  }
  // w and derivatives in physical coordinates via the rho-mapping.
  const Derivs2 he = env_.h_eps(y, eps_);
  const double R = he.v, Rd = he.d1, Rdd = he.d2;
  const double rho = r / R;
  double m[6];
  excess_interp(rho, y, m);
  const double rho_y = -rho * Rd / R;
  const double rho_yy = rho * (2.0 * Rd * Rd / (R * R) - Rdd / R);
  Value w;
  w.u = m[0];
  w.u_r = m[1] / R;
  w.u_y = m[2] + m[1] * rho_y;
  w.u_rr = m[3] / (R * R);
  w.u_yy = m[4] + 2.0 * rho_y * m[5] + rho_y * rho_y * m[3] + rho_yy * m[1];
  w.u_ry = (m[5] + rho_y * m[3]) / R - m[1] * Rd / (R * R);

  const double t = r / H;
  if (t <= 0.5) return w;

  // Blend with the cutoff and its chain-rule derivatives.
  const double Hy = 2.0 * h.v * h.d1;
  const double Hyy = 2.0 * h.d1 * h.d1 + 2.0 * h.v * h.d2;
  const double t_r = 1.0 / H;
  const double t_y = -r * Hy / (H * H);
  const double t_ry = -Hy / (H * H);
  const double t_yy = r * (2.0 * Hy * Hy / cube(H) - Hyy / (H * H));
  const double Z = cutoff::zeta(t);
  const double Zp = cutoff::zeta_d(t);
  const double Zpp = cutoff::zeta_dd(t);
  const double Z_r = Zp * t_r;
  const double Z_y = Zp * t_y;
  const double Z_rr = Zpp * t_r * t_r;
  const double Z_ry = Zpp * t_r * t_y + Zp * t_ry;
  const double Z_yy = Zpp * t_y * t_y + Zp * t_yy;

  Value out;
  out.u = Z * w.u;
  out.u_r = Z_r * w.u + Z * w.u_r;
  out.u_y = Z_y * w.u + Z * w.u_y;
  out.u_rr = Z_rr * w.u + 2.0 * Z_r * w.u_r + Z * w.u_rr;
  out.u_ry = Z_ry * w.u + Z_r * w.u_y + Z_y * w.u_r + Z * w.u_ry;
  out.u_yy = Z_yy * w.u + 2.0 * Z_y * w.u_y + Z * w.u_yy;
  return out;
}

GlobalU::Value GlobalU::eval(double r, double y) const {
  Value v = eval_excess(r, y);
  v.u += params_.alpha0 * r;
  v.u_r += params_.alpha0;
  return v;
}

std::uint64_t GlobalU::value_hash() const {
  // FNV-1a over the solution bytes.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* p, std::size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  mix(grid_.values.data(), grid_.values.size() * sizeof(double));
  mix(grid_.R.data(), grid_.R.size() * sizeof(double));
  return h;
}

GlobalU glue_global(const Grid2D& u_tau, const EnvelopeFn& env, const ConeParams& params,
                    double eps) {
  return GlobalU(u_tau, env, params, eps);
}

SliceReport slice_compare(const Grid2D& u, const EnvelopeFn& env, double eps, double y0,
                          const RadialProfile& std_profile, const SolverConstants& constants) {
  SliceReport rep;
  // Snap to the nearest grid column.
  std::size_t j0 = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < u.n_y; ++j)
    if (std::fabs(u.y[j] - y0) < best) {
      best = std::fabs(u.y[j] - y0);
      j0 = j;
    }
  rep.y0 = u.y[j0];

  const double u0 = u.at(0, j0);
  const double heps = env.h_eps(rep.y0, eps).v;
  rep.gate_value = u0 / heps;
  rep.tau_hat = u0;
  rep.hypothesis_met = rep.gate_value < constants.eta_small;
  if (!rep.hypothesis_met) return rep;

  rep.x_hi = constants.theta * heps / u0;
  double sup = 0.0, sup_dy = 0.0;
  for (std::size_t i = 1; i < u.n_rho; ++i) {
    const double r = u.r_of(i, j0);
    if (r > constants.theta * heps) break;
    const NodeDerivs nd = mapped_derivs(u, i, j0);
    const double x = r / u0;
    const ScaledEval ph = eval_scaled_profile(std_profile, 1.0, x);
    // u-hat(x) = u(u0 x)/u0; derivatives: d1 = u_r, d2 = u0 u_rr.
    const double a = std::fabs(u.at(i, j0) / u0 - ph.value) / x;
    const double b = std::fabs(nd.u_r - ph.d1);
    const double c = x * std::fabs(u0 * nd.u_rr - ph.d2);
    sup = std::max(sup, a + b + c);
    sup_dy = std::max(sup_dy, std::fabs(nd.u_y));
  }
  rep.kappa_measured = sup;
  rep.max_dy_u = sup_dy;
  rep.pass = sup < constants.kappa0 && sup_dy < constants.kappa0;
  return rep;
}

void write_bvp_solution(const BvpSolution& sol, const std::string& csv_path,
                        const std::string& json_path) {
  write_grid_csv(sol.u, csv_path, json_path + ".grid.json");
  nlohmann::json j;
  j["sigma_final"] = sol.sigma_final;
  j["residual_final"] = sol.residual_final;
  j["squeeze_ok"] = sol.squeeze_ok;
  j["grad_ok"] = sol.grad_ok;
  j["squeeze_lower_margin"] = sol.squeeze_lower_margin;
  j["squeeze_upper_margin"] = sol.squeeze_upper_margin;
  j["max_grad"] = sol.max_grad;
  j["max_grad_y"] = sol.max_grad_y;
  j["sliding_margin"] = sol.sliding_margin;
  j["eps"] = sol.eps;
  j["tau"] = sol.tau;
  nlohmann::json path = nlohmann::json::array();
  for (const auto& s : sol.sigma_path)
    path.push_back({{"sigma", s.sigma},
                    {"newton_iters", s.newton_iters},
                    {"residual", s.residual},
                    {"accepted", s.accepted}});
  j["sigma_path"] = path;
  std::ofstream js(json_path);
  require(js.good(), errc::io_error, "cannot open " + json_path);
  js << j.dump(2) << '\n';
}

}  // namespace sme
