#ifndef SME_COMMON_HPP
#define SME_COMMON_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sme {

// Error taxonomy shared by the whole library.  Each code maps 1:1 onto the
// C API status values, so keep the numbering stable.
enum class errc : int {
  ok = 0,
  invalid_argument,
  bad_dimensions,
  eta_too_large,
  exponent_gap_violated,
  property_violation,
  step_failure,
  window_too_narrow,
  nonpositive_u,
  grid_too_coarse,
  domain_mismatch,
  empty_k,
  bound_violation,
  continuation_stall,
  newton_diverged,
  squeeze_violated,
  hypothesis_unmet,
  jacobian_degenerate,
  outside_window,
  inversion_diverged,
  patch_mismatch,
  tail_root_failure,
  support_touches_boundary,
  zero_test_function,
  eigen_solver_failure,
  missing_artifact,
  io_error,
};

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

inline double sqr(double x) { return x * x; }
inline double cube(double x) { return x * x * x; }

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  const double h = (b - a) / double(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = a + h * double(i);
  v.back() = b;
  return v;
}

inline std::vector<double> logspace(double a, double b, std::size_t n) {
  std::vector<double> v = linspace(std::log(a), std::log(b), n);
  for (double& x : v) x = std::exp(x);
  v.back() = b;
  return v;
}

// Smooth cutoff: 1 on (-inf, 1/2], 0 on [1, inf), C-infinity in between with
// all derivatives vanishing at both ends of the transition.
namespace cutoff {

inline double bump(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
inline double bump_d(double s) { return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0; }
inline double bump_dd(double s) {
  return s > 0.0 ? std::exp(-1.0 / s) * (1.0 - 2.0 * s) / (s * s * s * s) : 0.0;
}

// zeta(t): plateau value 1 for t<=1/2, 0 for t>=1.
inline double zeta(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  const double s = 2.0 * t - 1.0;  // transition variable in (0,1)
  const double f = bump(1.0 - s), g = bump(s);
  return f / (f + g);
}

inline double zeta_d(double t) {
  if (t <= 0.5 || t >= 1.0) return 0.0;
  const double s = 2.0 * t - 1.0;
  const double f = bump(1.0 - s), g = bump(s);
  const double fp = -bump_d(1.0 - s), gp = bump_d(s);
  // d/ds [f/(f+g)] = (f' g - f g')/(f+g)^2, then ds/dt = 2.
  return 2.0 * (fp * g - f * gp) / sqr(f + g);
}

inline double zeta_dd(double t) {
  if (t <= 0.5 || t >= 1.0) return 0.0;
  const double s = 2.0 * t - 1.0;
  const double f = bump(1.0 - s), g = bump(s);
  const double fp = -bump_d(1.0 - s), gp = bump_d(s);
  const double fpp = bump_dd(1.0 - s), gpp = bump_dd(s);
  const double den = f + g;
  const double num = fp * g - f * gp;
  const double nump = fpp * g - f * gpp;  // (f'g - fg')' = f''g - fg''
  return 4.0 * (nump * den - 2.0 * num * (fp + gp)) / cube(den);
}

}  // namespace cutoff

}  // namespace sme

#endif  // SME_COMMON_HPP
