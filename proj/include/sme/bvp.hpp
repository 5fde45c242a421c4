#ifndef SME_BVP_HPP
#define SME_BVP_HPP

#include <cstdint>
#include <optional>

#include "sme/sme_operator.hpp"

namespace sme {

// Existence-only constants of the construction, housed as configuration.
struct SolverConstants {
  double delta0 = 0.05;      // |D_y u| bound target
  double kappa0 = 0.1;       // slice-comparison tolerance
  double theta = 0.5;        // slice-comparison window fraction, in [1/2, 1)
  double p_factor = 5.0;     // exclusion radius multiplier
  double eta_small = 0.05;   // smallness gate for slice rescaling
  double lambda_target = 0.01;  // stability floor
};

struct BvpProblem {
  ConeParams params;
  EnvelopeFn env;
  RadialProfile std_profile;  // standard variant, for the lower barrier
  RadialProfile mod_profile;  // modified variant, for the supersolution
  double eps = 1e-3;
  double tau = 1e-3;
  double q_period = 0.0;  // 0: Dirichlet strip in y, else periodic cell
  std::size_t n_rho = 96;
  std::size_t n_y = 64;
  double newton_tol = 8e-10;
  int max_newton = 12;
  double sigma_step0 = 0.1;
  double min_dsigma = 1e-6;
  SolverConstants constants;
};

struct SigmaStep {
  double sigma = 0.0;
  int newton_iters = 0;
  double residual = 0.0;
  bool accepted = false;
};

struct BvpSolution {
  Grid2D u;
  std::vector<SigmaStep> sigma_path;
  double sigma_final = 0.0;
  double residual_final = 0.0;
  bool squeeze_ok = false;
  bool grad_ok = false;
  double squeeze_lower_margin = 0.0;  // min of u - phi_lower over nodes
  double squeeze_upper_margin = 0.0;  // min of S - u over interior nodes
  double max_grad = 0.0;              // max |Du|
  double max_grad_y = 0.0;            // max |D_y u|
  double sliding_margin = 0.0;        // min over the sliding family of min(S_t - u)
  double discretization_allowance = 0.0;  // measured barrier bias of the grid
  double eps = 0.0, tau = 0.0;
};

BvpSolution solve_bvp(const BvpProblem& problem);

struct EpsFamilyResult {
  std::vector<double> eps_list;
  std::vector<BvpSolution> solutions;
  std::vector<double> cauchy_sup;   // sup |u_k - u_{k+1}| on the finest domain
  Grid2D u_tau;                     // extrapolated field on the last grid
  double positivity_margin = 0.0;   // min of u_tau - alpha0 r
  double upper_margin = 0.0;        // max of (u_tau - alpha0 r) - S_tau excess
  bool upper_ok = false;
  std::vector<double> near_k_ratio;  // (u_tau - alpha0 r)(0, y) / (tau h^j(y)), j = 1..4
};

EpsFamilyResult eps_family(const BvpProblem& tmpl, const std::vector<double>& eps_list);

// Glued global field: zeta(r/h^2) u_tau + (1 - zeta) alpha0 r off K, cone on K.
class GlobalU {
 public:
  GlobalU() = default;
  GlobalU(const Grid2D& u_tau, const EnvelopeFn& env, const ConeParams& params, double eps);

  struct Value {
    double u = 0.0, u_r = 0.0, u_y = 0.0, u_rr = 0.0, u_yy = 0.0, u_ry = 0.0;
    bool cone = false;  // exactly alpha0 r at this point
  };
  Value eval(double r, double y) const;
  // Excess w = u - alpha0 r with derivatives (zero in the cone region).
  Value eval_excess(double r, double y) const;

  const EnvelopeFn& envelope() const { return env_; }
  const ConeParams& params() const { return params_; }
  const Grid2D& grid() const { return grid_; }
  double h_squared(double y) const { return sqr(env_.h_derivs(y).v); }
  std::uint64_t value_hash() const;  // cross-stage consistency check

 private:
  struct Patch {
    double w, w_rho, w_y, w_rhoy;
  };
  Patch node(std::size_t i, std::size_t j) const;
  void excess_interp(double rho, double y, double out[6]) const;

  EnvelopeFn env_;
  ConeParams params_;
  Grid2D grid_;
  double eps_ = 0.0;
  std::vector<double> w_, w_rho_, w_y_, w_rhoy_;
};

GlobalU glue_global(const Grid2D& u_tau, const EnvelopeFn& env, const ConeParams& params,
                    double eps);

struct SliceReport {
  double y0 = 0.0;
  double gate_value = 0.0;   // u(0,y0) / h_eps(y0)
  bool hypothesis_met = false;
  double tau_hat = 0.0;      // rescaling value u(0, y0)
  double kappa_measured = 0.0;  // sup of |x|^-1|du| + |D du| + |x||D^2 du|
  double max_dy_u = 0.0;
  double x_hi = 0.0;         // window: x in (0, theta h_eps / u0]
  bool pass = false;
};

SliceReport slice_compare(const Grid2D& u, const EnvelopeFn& env, double eps, double y0,
                          const RadialProfile& std_profile, const SolverConstants& constants);

// Solution export: grid CSV plus JSON metadata with the sigma path and margins.
void write_bvp_solution(const BvpSolution& sol, const std::string& csv_path,
                        const std::string& json_path);

}  // namespace sme

#endif  // SME_BVP_HPP
