#include "sme/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace sme {

namespace {

// Normalized bump kernel on [-1, 1]: chi(t) = c exp(-1/(1-t^2)) with unit mass.
double bump_norm_constant() {
  static const double c = [] {
    const std::size_t n = 20001;
    const double h = 2.0 / double(n - 1);
    double simpson = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = -1.0 + h * double(i);
      const double v = (std::fabs(t) < 1.0) ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
      const double w = (i == 0 || i == n - 1) ? 1.0 : ((i % 2) ? 4.0 : 2.0);
      simpson += w * v;
    }
    return 1.0 / (simpson * h / 3.0);
  }();
  return c;
}

double kernel(double t) {
  if (std::fabs(t) >= 1.0) return 0.0;
  return bump_norm_constant() * std::exp(-1.0 / (1.0 - t * t));
}
double kernel_d(double t) {
  if (std::fabs(t) >= 1.0) return 0.0;
  return -kernel(t) * 2.0 * t / sqr(1.0 - t * t);
}
double kernel_dd(double t) {
  if (std::fabs(t) >= 1.0) return 0.0;
  const double one = 1.0 - t * t;
  const double a = 2.0 * t / sqr(one);
  const double ap = 2.0 * (1.0 + 3.0 * t * t) / cube(one);
  return kernel(t) * (a * a - ap);
}

}  // namespace

std::vector<std::pair<double, double>> ClosedSetSpec::normalized() const {
  std::vector<std::pair<double, double>> iv;
  switch (kind) {
    case Kind::finite_points:
      for (double p : points) iv.emplace_back(p, p);
      break;
    case Kind::interval_union:
      iv = intervals;
      break;
    case Kind::cantor_like: {
      require(cantor_hi > cantor_lo, errc::invalid_argument, "cantor base interval empty");
      require(cantor_ratio > 0.0 && cantor_ratio < 0.5, errc::invalid_argument,
              "cantor ratio must lie in (0, 1/2)");
      require(cantor_depth >= 0 && cantor_depth <= 12, errc::invalid_argument,
              "cantor depth out of range");
      iv = {{cantor_lo, cantor_hi}};
      for (int d = 0; d < cantor_depth; ++d) {
        std::vector<std::pair<double, double>> next;
        next.reserve(2 * iv.size());
        for (const auto& [a, b] : iv) {
          const double len = b - a;
          next.emplace_back(a, a + cantor_ratio * len);
          next.emplace_back(b - cantor_ratio * len, b);
        }
        iv = std::move(next);
      }
      break;
    }
  }
  require(!iv.empty(), errc::empty_k, "closed set spec is empty");
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& seg : iv) {
    require(seg.second >= seg.first, errc::invalid_argument, "interval with negative length");
    if (!merged.empty() && seg.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, seg.second);
    else
      merged.push_back(seg);
  }
  return merged;
}

double EnvelopeFn::dist(double y) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : intervals_) {
    if (y >= a && y <= b) return 0.0;
    best = std::min(best, y < a ? a - y : y - b);
  }
  return best;
}

double EnvelopeFn::dist_wrapped(double y) const {
  if (opts_.q_period > 0.0) {
    const double q = opts_.q_period;
    y -= q * std::round(y / q);
  }
  return dist(y);
}

Derivs2 EnvelopeFn::dist_mollified(double y) const {
  // Raw distance is piecewise linear; its only interior kinks sit at gap
  // midpoints.  There we blend toward a mollified distance, keeping d = raw
  // exactly near K so that the flatness of h at K is untouched.
  Derivs2 raw;
  raw.v = dist(y);
  if (raw.v > 0.0) {
    double best = std::numeric_limits<double>::infinity();
    double slope = 0.0;
    for (const auto& [a, b] : intervals_) {
      if (y < a && a - y < best) {
        best = a - y;
        slope = -1.0;
      } else if (y > b && y - b < best) {
        best = y - b;
        slope = 1.0;
      }
    }
    raw.d1 = slope;
    raw.d2 = 0.0;
  }

  if (kinks_.empty() || smoothing_ <= 0.0) return raw;

  double beta = 0.0, dbeta = 0.0, ddbeta = 0.0;
  for (double mu : kinks_) {
    // beta = 1 within delta of the kink, 0 beyond 2*delta.
    const double u = std::fabs(y - mu) / (2.0 * smoothing_);
    if (u >= 1.0) continue;
    const double sgn = (y >= mu) ? 1.0 : -1.0;
    const double z = cutoff::zeta(u);
    if (z >= beta) {
      beta = z;
      dbeta = cutoff::zeta_d(u) * sgn / (2.0 * smoothing_);
      ddbeta = cutoff::zeta_dd(u) / sqr(2.0 * smoothing_);
    }
  }
  if (beta <= 0.0) return raw;

  // Quadrature panels aligned to the breakpoints of the piecewise-linear
  // distance, so the convolution is smooth in y (nodes that slide across a
  // kink would leave quadrature kinks in the result).
  const double delta = smoothing_;
  std::vector<double> cuts = {y - delta, y + delta};
  for (double mu : kinks_)
    if (mu > y - delta && mu < y + delta) cuts.push_back(mu);
  for (const auto& [a, b] : intervals_) {
    if (a > y - delta && a < y + delta) cuts.push_back(a);
    if (b > y - delta && b < y + delta) cuts.push_back(b);
  }
  std::sort(cuts.begin(), cuts.end());
  Derivs2 conv;
  const std::size_t per_panel = std::max<std::size_t>(33, (opts_.conv_nodes | 1) / cuts.size());
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = cuts[c], hi = cuts[c + 1];
    if (hi - lo < 1e-300) continue;
    const std::size_t n = per_panel | 1;
    const double hstep = (hi - lo) / double(n - 1);
    Derivs2 acc;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = lo + hstep * double(i);
      const double t = (y - u) / delta;
      const double w = (i == 0 || i == n - 1) ? 1.0 : ((i % 2) ? 4.0 : 2.0);
      const double d = dist(u);
      acc.v += w * d * kernel(t) / delta;
      acc.d1 += w * d * kernel_d(t) / sqr(delta);
      acc.d2 += w * d * kernel_dd(t) / cube(delta);
    }
    conv.v += acc.v * hstep / 3.0;
    conv.d1 += acc.d1 * hstep / 3.0;
    conv.d2 += acc.d2 * hstep / 3.0;
  }

  Derivs2 out;
  out.v = (1.0 - beta) * raw.v + beta * conv.v;
  out.d1 = (1.0 - beta) * raw.d1 + beta * conv.d1 + dbeta * (conv.v - raw.v);
  out.d2 = (1.0 - beta) * raw.d2 + beta * conv.d2 + 2.0 * dbeta * (conv.d1 - raw.d1) +
           ddbeta * (conv.v - raw.v);
  return out;
}

Derivs2 EnvelopeFn::h_unwrapped(double y) const {
  Derivs2 out;
  const Derivs2 d = dist_mollified(y);
  if (d.v <= 0.0) return out;  // exactly zero on K
  const double amp = amplitude();
  const double p = opts_.power;
  const double g = std::pow(opts_.width / d.v, p);
  const double E = std::exp(-g);
  if (E == 0.0) return out;
  const double gp = -p * g * d.d1 / d.v;
  const double gpp = -(p * g / d.v) * d.d2 + p * (p + 1.0) * g * sqr(d.d1) / sqr(d.v);
  out.v = amp * E;
  out.d1 = -amp * E * gp;
  out.d2 = amp * E * (gp * gp - gpp);
  return out;
}

Derivs2 EnvelopeFn::h_derivs(double y) const {
  if (opts_.q_period <= 0.0) return h_unwrapped(y);
  const double q = opts_.q_period;
  const double yw = y - q * std::round(y / q);
  const Derivs2 base = h_unwrapped(yw);
  // Plateau cutoff zeta(2|y|/q): 1 for |y| <= q/4, 0 for |y| >= q/2, so the
  // periodic extension is smooth across cell boundaries.
  const double u = 2.0 * std::fabs(yw) / q;
  const double sgn = (yw >= 0.0) ? 1.0 : -1.0;
  const double z = cutoff::zeta(u);
  const double zd = cutoff::zeta_d(u) * sgn * 2.0 / q;
  const double zdd = cutoff::zeta_dd(u) * sqr(2.0 / q);
  Derivs2 out;
  out.v = z * base.v;
  out.d1 = z * base.d1 + zd * base.v;
  out.d2 = z * base.d2 + 2.0 * zd * base.d1 + zdd * base.v;
  return out;
}

Derivs2 EnvelopeFn::h_eps(double y, double eps) const {
  const Derivs2 h = h_derivs(y);
  const double base = std::pow(eps, 0.25) + h.v;
  Derivs2 out;
  out.v = base * base;
  out.d1 = 2.0 * base * h.d1;
  out.d2 = 2.0 * h.d1 * h.d1 + 2.0 * base * h.d2;
  return out;
}

Derivs2 EnvelopeFn::psi(double y, double t, double tau, double eps) const {
  const Derivs2 h = h_derivs(y);
  const double base = std::pow(eps, 0.25) + h.v;
  const double E = std::exp(-1.0 / base);
  Derivs2 out;
  out.v = t + tau * E;
  const double q1 = h.d1 / (base * base);
  out.d1 = tau * E * q1;
  out.d2 = tau * E * (q1 * q1 + h.d2 / (base * base) - 2.0 * sqr(h.d1) / cube(base));
  return out;
}

std::vector<double> EnvelopeFn::probe_points() const {
  std::vector<double> pts;
  for (const auto& [a, b] : intervals_) {
    for (int k = 0; k <= 40; ++k) {
      const double d = std::pow(0.7, k);
      if (a - d >= opts_.y_lo) pts.push_back(a - d);
      if (b + d <= opts_.y_hi) pts.push_back(b + d);
    }
    if (a >= opts_.y_lo && a <= opts_.y_hi) pts.push_back(a);
    if (b >= opts_.y_lo && b <= opts_.y_hi) pts.push_back(b);
    const double mid = 0.5 * (a + b);
    if (mid >= opts_.y_lo && mid <= opts_.y_hi) pts.push_back(mid);
  }
  const std::vector<double> uni = linspace(opts_.y_lo, opts_.y_hi, 301);
  pts.insert(pts.end(), uni.begin(), uni.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

EnvelopeFn build_envelope(const ClosedSetSpec& spec, const EnvelopeOptions& opts) {
  require(opts.tau0 > 0.0 && opts.tau0 <= 0.25, errc::invalid_argument,
          "tau0 must lie in (0, 1/4]");
  require(opts.amplitude_factor > 0.0 && opts.amplitude_factor <= 1.0, errc::invalid_argument,
          "amplitude_factor must lie in (0, 1]");
  require(opts.width > 0.0 && opts.power > 0.0, errc::invalid_argument,
          "width and power must be positive");

  EnvelopeFn env;
  env.opts_ = opts;
  env.intervals_ = spec.normalized();

  env.min_gap_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < env.intervals_.size(); ++i) {
    const double gap = env.intervals_[i + 1].first - env.intervals_[i].second;
    env.min_gap_ = std::min(env.min_gap_, gap);
    env.kinks_.push_back(0.5 * (env.intervals_[i].second + env.intervals_[i + 1].first));
  }
  env.smoothing_ = opts.smoothing_scale > 0.0
                       ? opts.smoothing_scale
                       : (env.kinks_.empty() ? 0.0 : env.min_gap_ / 10.0);
  require(env.kinks_.empty() || env.smoothing_ < env.min_gap_ / 4.0, errc::invalid_argument,
          "smoothing_scale too large for the smallest gap of K");

  if (opts.y_lo == 0.0 && opts.y_hi == 0.0) {
    const double span = std::max(4.0 * opts.width, 2.0);
    env.opts_.y_lo = env.intervals_.front().first - span;
    env.opts_.y_hi = env.intervals_.back().second + span;
  }
  if (opts.q_period > 0.0) {
    env.opts_.y_lo = -0.5 * opts.q_period;
    env.opts_.y_hi = 0.5 * opts.q_period;
  }

  EnvelopeProbeReport rep;
  rep.positive_ok = true;
  const double tau0 = opts.tau0;
  const double flatC = opts.flatness_const * tau0;
  for (double y : env.probe_points()) {
    ++rep.probes;
    const Derivs2 h = env.h_derivs(y);
    const double d = env.dist_wrapped(y);
    if (d <= 0.0) {
      if (h.v != 0.0 || h.d1 != 0.0) rep.positive_ok = false;
    } else if (env.opts_.q_period <= 0.0 || std::fabs(y) < 0.49 * env.opts_.q_period) {
      // Deep flatness underflows to an exact zero very close to K; only flag
      // non-positivity where exp(-(w/d)^p) is representable.
      const double g = std::pow(opts.width / d, opts.power);
      if (g < 700.0 && !(h.v > 0.0)) rep.positive_ok = false;
    }
    const double sum = h.v + std::fabs(h.d1) + std::fabs(h.d2);
    if (sum > rep.bound_max) {
      rep.bound_max = sum;
      rep.bound_location = y;
    }
    // Flatness is a statement about the approach to K: scan only probes well
    // inside the decay region of dist^-j |D^k h| (the quantity peaks at
    // moderate distance by design, with paper constants C(j,k) absorbing it).
    if (d > 0.0 && d <= opts.width / 48.0) {
      const double step = std::max(1e-9, d / 64.0);
      const double d3 = (env.h_derivs(y + step).d2 - env.h_derivs(y - step).d2) / (2.0 * step);
      const double d4 =
          (env.h_derivs(y + step).d2 - 2.0 * h.d2 + env.h_derivs(y - step).d2) / (step * step);
      for (int j = 0; j <= 4; ++j) {
        const double dj = std::pow(d, -j);
        for (double dk : {h.v, std::fabs(h.d1), std::fabs(h.d2), std::fabs(d3), std::fabs(d4)})
          rep.flat_max_ratio = std::max(rep.flat_max_ratio, dj * dk / flatC);
      }
    }
  }
  rep.bound_ok = rep.bound_max < tau0;
  rep.flat_ok = rep.flat_max_ratio <= 1.0;
  env.report_ = rep;
  require(rep.bound_ok, errc::bound_violation,
          "envelope bound h+|Dh|+|D2h| reaches " + std::to_string(rep.bound_max) +
              " >= tau0 = " + std::to_string(tau0) +
              " (shrink amplitude_factor or increase smoothing/width)");
  return env;
}

void EnvelopeFn::write_probe_csv(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), errc::io_error, "cannot open " + path);
  out << "y,dist,h,dh,d2h\n";
  out.precision(17);
  for (double y : probe_points()) {
    const Derivs2 h = h_derivs(y);
    out << y << ',' << dist(y) << ',' << h.v << ',' << h.d1 << ',' << h.d2 << '\n';
  }
}

double supersolution_eval(const EnvelopeFn& env, const SupersolutionParams& p,
                          const RadialProfile& mod_profile, double r, double y) {
  require(mod_profile.variant == ProfileVariant::modified, errc::invalid_argument,
          "supersolution requires the modified profile");
  const double psi = env.psi(y, p.t, p.tau, p.eps).v;
  return eval_scaled_profile(mod_profile, psi, r).value;
}

namespace {

// Normalized M(S) for S = psi(y) phi~(r/psi(y)).  Writing s_* for the
// partials of S and D = 1+s_r^2+s_y^2, the radial ODE of phi~ gives
//   (n-1)s_r/r - (m-1)/S = -(1+eta) s_rr/(1+s_r^2)
// exactly for the stored profile values, so
//   M(S) = s_rr (s_r^2 s_y^2 - eta D)/(D(1+s_r^2)) + s_yy (1+s_r^2)/D
//          - 2 s_r s_y s_ry / D.
// Dividing by phi~''(s)/psi keeps the O(eta) margin representable at every
// scale; the sign is unchanged.
double supersolution_margin(const RadialProfile& mod, const Derivs2& psi, double r,
                            double* raw) {
  const double s = r / psi.v;
  const ScaledEval pe = eval_scaled_profile(mod, 1.0, s);
  double dd, trans;
  if (s > mod.r_grid.back()) {
    // Tail model alpha0 s + kappa s^gamma: evaluate phi'' and Phi~ from the
    // model itself; the ODE-combo form below would be cancellation noise here.
    const double w = mod.kappa_fit * std::pow(s, mod.gamma_fit);
    dd = mod.gamma_fit * (mod.gamma_fit - 1.0) * w / (s * s);
    trans = (1.0 - mod.gamma_fit) * w;
  } else if (s > 0.0) {
    const double Ne = mod.dim_n_eff(), Me = mod.dim_m_eff();
    dd = (1.0 + sqr(pe.d1)) * ((Me - 1.0) / pe.value - (Ne - 1.0) * pe.d1 / s);
    trans = pe.value - s * pe.d1;  // Phi~(s) > 0
  } else {
    dd = 2.0 * mod.series_a();
    trans = 1.0;
  }
  const double eta = mod.params.eta;

  const double s_r = pe.d1;
  const double s_y = psi.d1 * trans;
  const double D = 1.0 + sqr(s_r) + sqr(s_y);
  const double t1 = (sqr(s_r) * sqr(s_y) - eta * D) / (D * (1.0 + sqr(s_r)));
  const double G = trans / dd;  // Phi~/phi~'' > 0
  const double t2 = (psi.v * psi.d2 * G + sqr(s * psi.d1)) * (1.0 + sqr(s_r)) / D;
  const double t3 = 2.0 * s * s_r * sqr(psi.d1) * trans / D;
  const double norm = t1 + t2 + t3;
  if (raw) *raw = norm * dd / psi.v;
  return norm;
}

}  // namespace

SignReport verify_supersolution(const EnvelopeFn& env, const SupersolutionParams& p,
                                const RadialProfile& mod_profile, const SuperGridSpec& grid) {
  require(mod_profile.variant == ProfileVariant::modified, errc::invalid_argument,
          "verify_supersolution requires the modified profile");
  require(grid.nr >= 32, errc::grid_too_coarse, "need >= 32 radial nodes per column");
  const double y_lo = (grid.y_lo == 0.0 && grid.y_hi == 0.0) ? env.y_lo() : grid.y_lo;
  const double y_hi = (grid.y_lo == 0.0 && grid.y_hi == 0.0) ? env.y_hi() : grid.y_hi;

  SignReport rep;
  rep.max_normalized = -std::numeric_limits<double>::infinity();
  rep.max_value = -std::numeric_limits<double>::infinity();
  for (double y : linspace(y_lo, y_hi, grid.ny)) {
    const Derivs2 psi = env.psi(y, p.t, p.tau, p.eps);
    const double R = env.h_eps(y, p.eps).v;
    for (std::size_t j = 0; j < grid.nr; ++j) {
      const double r = R * double(j) / double(grid.nr - 1);
      double raw = 0.0;
      const double norm = supersolution_margin(mod_profile, psi, r, &raw);
      ++rep.samples;
      if (norm > rep.max_normalized) {
        rep.max_normalized = norm;
        rep.location_r = r;
        rep.location_y = y;
      }
      rep.max_value = std::max(rep.max_value, raw);
    }
  }
  rep.pass = rep.max_normalized < 0.0;
  return rep;
}

double check_r0_bound(const EnvelopeFn& env, double tau, double eps,
                      const RadialProfile& mod_profile) {
  double sup = 0.0;
  for (double y : env.probe_points()) {
    const double psi = env.psi(y, eps, tau, eps).v;
    const double S0 = eval_scaled_profile(mod_profile, psi, 0.0).value;  // psi * phi~(0)
    sup = std::max(sup, S0 / env.h_eps(y, eps).v);
  }
  return sup;
}

}  // namespace sme
