#ifndef SME_RADIAL_PROFILE_HPP
#define SME_RADIAL_PROFILE_HPP

#include <array>
#include <cstddef>
#include <vector>

#include "sme/cone_params.hpp"

namespace sme {

enum class ProfileVariant { standard, modified };

// Sampled solution of the radial SME ODE
//   phi'' / (1 + phi'^2) + (N-1)/r phi' = (M-1)/phi,
// with (N, M) = (n, m) for the standard variant and the fractional
// (n_tilde, m_tilde) for the modified one.  Grid is linear on
// [r_min, 1] and log-spaced beyond; phi'' is stored from the ODE itself.
struct RadialProfile {
  ConeParams params;
  ProfileVariant variant = ProfileVariant::standard;
  std::vector<double> r_grid;
  std::vector<double> phi;
  std::vector<double> dphi;
  std::vector<double> d2phi;
  double kappa_fit = 0.0;   // amplitude of the tail phi - alpha0 r ~ kappa r^gamma
  double gamma_fit = 0.0;   // fitted tail exponent (< 0)
  double fit_residual = 0.0;
  double r_min = 1e-4;
  double solve_tol = 1e-10;

  double dim_n_eff() const {
    return variant == ProfileVariant::standard ? double(params.n) : params.n_tilde;
  }
  double dim_m_eff() const {
    return variant == ProfileVariant::standard ? double(params.m) : params.m_tilde;
  }
  // Series about r=0: phi = 1 + a r^2 + b r^4 + O(r^6).
  double series_a() const { return (dim_m_eff() - 1.0) / (2.0 * dim_n_eff()); }
  double series_b() const {
    const double a = series_a(), N = dim_n_eff();
    return a * a * (4.0 * a - N) / (2.0 * (N + 2.0));
  }
  // Exact decay exponent for this variant (fit target).
  double gamma_exact() const {
    return variant == ProfileVariant::standard ? params.gamma : params.gamma_tilde;
  }
};

struct SolveOptions {
  std::size_t nodes_linear = 600;      // nodes on [r_min, 1]
  std::size_t nodes_per_decade = 240;  // log-spaced density beyond r = 1
  double r_min = 1e-4;
};

RadialProfile solve_radial(const ConeParams& params, ProfileVariant variant, double r_max,
                           double tol, const SolveOptions& opts = {});

// t * phi(r/t) with d/dr and d^2/dr^2.  Series below the grid, cubic Hermite
// interpolation of phi - alpha0 r on the grid, fitted power-law tail beyond.
struct ScaledEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};
ScaledEval eval_scaled_profile(const RadialProfile& profile, double t, double r);

// Convenience: value of t*phi(r/t) - alpha0*r, computed without cancellation.
double scaled_excess(const RadialProfile& profile, double t, double r);
// Phi(s) = phi(s) - s phi'(s), evaluated at s = r/t scaling (positive, decreasing).
double scaled_transversal(const RadialProfile& profile, double t, double r);

struct FitResult {
  double kappa = 0.0;
  double gamma = 0.0;
  double residual = 0.0;  // max |log w - fit| over the window
};
FitResult fit_asymptotics(const RadialProfile& profile, double r_lo, double r_hi);

struct PropertyReport {
  struct Entry {
    bool ok = false;
    double worst_margin = 0.0;  // min over nodes of the strict-inequality slack
    double location = 0.0;      // radius attaining the worst margin
  };
  Entry convexity;      // phi'' > 0
  Entry slope;          // 0 < phi' < alpha0
  Entry squeeze;        // alpha0 r < phi < alpha0 r + 1
  Entry transversal;    // phi - r phi' > 0
  bool all_ok() const {
    return convexity.ok && slope.ok && squeeze.ok && transversal.ok;
  }
};
PropertyReport check_profile_properties(const RadialProfile& profile);
// Same checks on caller-provided samples (used for perturbed/cone inputs).
PropertyReport check_profile_properties(const ConeParams& params,
                                        const std::vector<double>& r,
                                        const std::vector<double>& phi,
                                        const std::vector<double>& dphi,
                                        const std::vector<double>& d2phi);

// phi_{eps^{1+e}}(r) <= phi_tilde_eps(r) on a dense sample of (0, 1].
bool check_comparison(const RadialProfile& std_profile, const RadialProfile& mod_profile,
                      double eps, double e_exponent, double* worst_margin = nullptr);

// CSV (r, phi, dphi, d2phi) with a JSON sidecar carrying ConeParams and fit data.
void write_profile_csv(const RadialProfile& profile, const std::string& csv_path,
                       const std::string& json_path);
RadialProfile read_profile_csv(const std::string& csv_path, const std::string& json_path);

}  // namespace sme

#endif  // SME_RADIAL_PROFILE_HPP
