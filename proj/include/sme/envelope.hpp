#ifndef SME_ENVELOPE_HPP
#define SME_ENVELOPE_HPP

#include <string>
#include <utility>
#include <vector>

#include "sme/radial_profile.hpp"

namespace sme {

// Closed subset of the line, normalized to a disjoint union of closed
// intervals (points are degenerate intervals).
struct ClosedSetSpec {
  enum class Kind { finite_points, interval_union, cantor_like };
  Kind kind = Kind::finite_points;
  std::vector<double> points;                          // finite_points
  std::vector<std::pair<double, double>> intervals;    // interval_union
  double cantor_lo = 0.0, cantor_hi = 1.0;             // cantor_like base interval
  double cantor_ratio = 1.0 / 3.0;                     // kept fraction per side
  int cantor_depth = 6;

  static ClosedSetSpec single_point(double y) {
    ClosedSetSpec s;
    s.points = {y};
    return s;
  }
  // Disjoint sorted closed intervals realizing the set at finite depth.
  std::vector<std::pair<double, double>> normalized() const;
};

struct EnvelopeOptions {
  double tau0 = 0.1;              // global scale bound of (h, Dh, D2h)
  double smoothing_scale = 0.0;   // 0: min_gap/10 (only used with interior kinks)
  double amplitude_factor = 0.1;  // h peak = tau0 * amplitude_factor
  double width = 1.0;             // h = amp * exp(-(width/dist)^power)
  double power = 1.0;
  double y_lo = 0.0, y_hi = 0.0;  // working range; 0,0 derives from K
  double q_period = 0.0;          // >0: periodize with the plateau cutoff on a cell
  double flatness_const = 64.0;   // C in the flatness checks (configuration)
  std::size_t conv_nodes = 257;   // quadrature nodes for the mollifier
};

struct Derivs2 {
  double v = 0.0, d1 = 0.0, d2 = 0.0;
};

struct EnvelopeProbeReport {
  bool bound_ok = false;      // h + |Dh| + |D2h| < tau0 at all probes
  double bound_max = 0.0;     // max of the sum
  double bound_location = 0.0;
  bool flat_ok = false;       // dist^-j |D^k h| <= C tau0, j,k <= 4
  double flat_max_ratio = 0.0;  // worst (dist^-j |D^k h|) / (C tau0)
  bool positive_ok = false;   // h > 0 off K, h = 0 on K
  std::size_t probes = 0;
};

// Smooth cutoff vanishing to high order exactly on K.
class EnvelopeFn {
 public:
  EnvelopeFn() = default;

  Derivs2 h_derivs(double y) const;
  double h(double y) const { return h_derivs(y).v; }
  double dist(double y) const;       // raw distance to K (unwrapped spec set)
  bool on_set(double y) const { return dist_wrapped(y) <= 0.0; }

  // h_eps = (eps^{1/4} + h)^2, the column radius of Omega_eps.
  Derivs2 h_eps(double y, double eps) const;
  // psi_{t,tau,eps} = t + tau exp(-1/(eps^{1/4} + h)).
  Derivs2 psi(double y, double t, double tau, double eps) const;

  const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }
  const EnvelopeOptions& options() const { return opts_; }
  double amplitude() const { return opts_.tau0 * opts_.amplitude_factor; }
  double min_gap() const { return min_gap_; }
  double y_lo() const { return opts_.y_lo; }
  double y_hi() const { return opts_.y_hi; }
  double q_period() const { return opts_.q_period; }

  std::vector<double> probe_points() const;
  const EnvelopeProbeReport& probe_report() const { return report_; }

  void write_probe_csv(const std::string& path) const;

  friend EnvelopeFn build_envelope(const ClosedSetSpec& spec, const EnvelopeOptions& opts);

 private:
  double dist_wrapped(double y) const;
  Derivs2 dist_mollified(double y) const;  // pre-wrap coordinates
  Derivs2 h_unwrapped(double y) const;

  EnvelopeOptions opts_;
  std::vector<std::pair<double, double>> intervals_;
  std::vector<double> kinks_;  // midpoints of bounded gaps
  double min_gap_ = 0.0;
  double smoothing_ = 0.0;
  EnvelopeProbeReport report_;
};

EnvelopeFn build_envelope(const ClosedSetSpec& spec, const EnvelopeOptions& opts);

struct SupersolutionParams {
  double t = 0.0;
  double tau = 0.0;
  double eps = 0.0;
};

// S_{t,tau,eps}(r, y) = psi(y) * phi_tilde(r / psi(y)).
double supersolution_eval(const EnvelopeFn& env, const SupersolutionParams& p,
                          const RadialProfile& mod_profile, double r, double y);

struct SignReport {
  bool pass = false;
  double max_value = 0.0;       // max of M(S) over the sample set
  double max_normalized = 0.0;  // max of M(S) * psi / phi_tilde'' (same sign, O(eta) scale)
  double location_r = 0.0;
  double location_y = 0.0;
  std::size_t samples = 0;
};

struct SuperGridSpec {
  std::size_t ny = 65;
  std::size_t nr = 48;  // >= 32 radial nodes per column
  double y_lo = 0.0, y_hi = 0.0;  // 0,0: envelope working range
};

SignReport verify_supersolution(const EnvelopeFn& env, const SupersolutionParams& p,
                                const RadialProfile& mod_profile, const SuperGridSpec& grid);

// sup over probe y of h_eps(y)^{-1} S_{eps,tau,eps}(0, y); smallness input for
// the rescaled-slice comparison.
double check_r0_bound(const EnvelopeFn& env, double tau, double eps,
                      const RadialProfile& mod_profile);

}  // namespace sme

#endif  // SME_ENVELOPE_HPP
