#include "sme/radial_profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace sme {

namespace {

struct OdeRhs {
  double n_eff;
  double m_eff;
  // State y = (phi, phi'); returns (phi', phi'').
  std::array<double, 2> operator()(double r, const std::array<double, 2>& y) const {
    const double d2 = (1.0 + sqr(y[1])) * ((m_eff - 1.0) / y[0] - (n_eff - 1.0) * y[1] / r);
    return {y[1], d2};
  }
};

// Dormand-Prince 5(4) embedded pair.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// Integrates from r0 to r1 (r1 > r0) with adaptive steps; y updated in place.
void integrate_to(const OdeRhs& f, double& r0, double r1, std::array<double, 2>& y, double tol) {
  double h = std::min(0.1 * (1.0 + r0), r1 - r0);
  std::array<double, 2> k1 = f(r0, y);
  int guard = 0;
  while (r0 < r1) {
    if (++guard > 2000000) fail(errc::step_failure, "radial ODE: step count exceeded");
    h = std::min(h, r1 - r0);
    const auto stage = [&](double frac, std::initializer_list<std::pair<double, const std::array<double, 2>*>> terms) {
      std::array<double, 2> yy = y;
      for (const auto& [w, k] : terms) {
        yy[0] += h * w * (*k)[0];
        yy[1] += h * w * (*k)[1];
      }
      return f(r0 + frac * h, yy);
    };
    const std::array<double, 2> k2 = stage(c2, {{a21, &k1}});
    const std::array<double, 2> k3 = stage(c3, {{a31, &k1}, {a32, &k2}});
    const std::array<double, 2> k4 = stage(c4, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
    const std::array<double, 2> k5 = stage(c5, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
    const std::array<double, 2> k6 =
        stage(1.0, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
    std::array<double, 2> y5;
    for (int i = 0; i < 2; ++i)
      y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    const std::array<double, 2> k7 = f(r0 + h, y5);
    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
      const double sc = 1e-30 + tol * std::max(std::fabs(y[i]), std::fabs(y5[i]));
      err = std::max(err, std::fabs(ei) / sc);
    }
    if (err <= 1.0) {
      r0 += h;
      y = y5;
      k1 = k7;  // FSAL
    }
    double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
    fac = std::clamp(fac, 0.2, 5.0);
    h *= fac;
    if (h < 1e-14 * (1.0 + r0)) fail(errc::step_failure, "radial ODE: step size underflow");
  }
}

std::size_t locate(const std::vector<double>& grid, double x) {
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t i = std::size_t(std::distance(grid.begin(), it));
  if (i == 0) return 0;
  if (i >= grid.size()) return grid.size() - 2;
  return i - 1;
}

// Cubic Hermite on one cell of a scalar function with nodal derivatives.
struct HermiteCell {
  double value, d1, d2;
};
HermiteCell hermite_eval(double x0, double x1, double f0, double f1, double g0, double g1,
                         double x) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
  const double d00 = (6 * t2 - 6 * t) / h, d10 = (3 * t2 - 4 * t + 1) / h;
  const double d01 = (-6 * t2 + 6 * t) / h, d11 = (3 * t2 - 2 * t) / h;
  const double s00 = (12 * t - 6) / (h * h), s10 = (6 * t - 4) / (h * h);
  const double s01 = (-12 * t + 6) / (h * h), s11 = (6 * t - 2) / (h * h);
  HermiteCell out;
  out.value = h00 * f0 + h * h10 * g0 + h01 * f1 + h * h11 * g1;
  out.d1 = d00 * f0 + h * d10 * g0 + d01 * f1 + h * d11 * g1;
  out.d2 = s00 * f0 + h * s10 * g0 + s01 * f1 + h * s11 * g1;
  return out;
}

}  // namespace

RadialProfile solve_radial(const ConeParams& params, ProfileVariant variant, double r_max,
                           double tol, const SolveOptions& opts) {
  require(r_max >= 10.0, errc::invalid_argument, "solve_radial: r_max must be >= 10");
  require(tol > 1e-14 && tol < 1e-4, errc::invalid_argument,
          "solve_radial: tol must lie in (1e-14, 1e-4)");

  RadialProfile p;
  p.params = params;
  p.variant = variant;
  p.r_min = opts.r_min;
  p.solve_tol = tol;

  const double N = p.dim_n_eff(), M = p.dim_m_eff();
  const OdeRhs rhs{N, M};

  // Output grid: linear on [r_min, 1], log beyond.
  p.r_grid = linspace(opts.r_min, 1.0, opts.nodes_linear);
  const std::size_t decades_nodes =
      std::size_t(std::ceil(std::log10(r_max) * double(opts.nodes_per_decade)));
  std::vector<double> tail = logspace(1.0, r_max, std::max<std::size_t>(decades_nodes, 32));
  p.r_grid.insert(p.r_grid.end(), tail.begin() + 1, tail.end());

  const std::size_t nn = p.r_grid.size();
  p.phi.resize(nn);
  p.dphi.resize(nn);
  p.d2phi.resize(nn);

  // Series start at r_min, O(r^6) accurate.
  const double a = p.series_a(), b = p.series_b();
  double r = opts.r_min;
  std::array<double, 2> y = {1.0 + a * r * r + b * r * r * r * r,
                             2.0 * a * r + 4.0 * b * r * r * r};
  for (std::size_t i = 0; i < nn; ++i) {
    if (p.r_grid[i] > r) integrate_to(rhs, r, p.r_grid[i], y, tol);
    p.phi[i] = y[0];
    p.dphi[i] = y[1];
    p.d2phi[i] = rhs(p.r_grid[i], y)[1];
  }

  // Qualitative properties; failure here signals integration blow-up.
  const PropertyReport rep = check_profile_properties(p);
  if (!rep.all_ok()) {
    fail(errc::property_violation, "solve_radial: profile inequality failed (worst margins: "
                                       "convexity=" + std::to_string(rep.convexity.worst_margin) +
                                       ", transversal=" + std::to_string(rep.transversal.worst_margin) + ")");
  }

  const double lo = std::max(r_max / 100.0, 100.0 * p.r_grid.front());
  const FitResult fit = fit_asymptotics(p, lo, r_max);
  p.kappa_fit = fit.kappa;
  p.gamma_fit = fit.gamma;
  p.fit_residual = fit.residual;
  return p;
}

namespace {

// phi(s) and derivatives at s >= 0 in unscaled profile coordinates.
ScaledEval eval_unscaled(const RadialProfile& p, double s) {
  ScaledEval out;
  const double alpha0 = p.params.alpha0;
  if (s < p.r_grid.front()) {
    const double a = p.series_a(), b = p.series_b();
    out.value = 1.0 + a * s * s + b * s * s * s * s;
    out.d1 = 2.0 * a * s + 4.0 * b * s * s * s;
    out.d2 = 2.0 * a + 12.0 * b * s * s;
    return out;
  }
  if (s > p.r_grid.back()) {
    const double w = p.kappa_fit * std::pow(s, p.gamma_fit);
    out.value = alpha0 * s + w;
    out.d1 = alpha0 + p.gamma_fit * w / s;
    out.d2 = p.gamma_fit * (p.gamma_fit - 1.0) * w / (s * s);
    return out;
  }
  // Interpolate the excess w = phi - alpha0 r (small in the tail, so this
  // avoids cancellation) and add the cone part back analytically.
  const std::size_t i = locate(p.r_grid, s);
  const HermiteCell w = hermite_eval(p.r_grid[i], p.r_grid[i + 1],
                                     p.phi[i] - alpha0 * p.r_grid[i],
                                     p.phi[i + 1] - alpha0 * p.r_grid[i + 1],
                                     p.dphi[i] - alpha0, p.dphi[i + 1] - alpha0, s);
  out.value = alpha0 * s + w.value;
  out.d1 = alpha0 + w.d1;
  out.d2 = w.d2;
  return out;
}

double excess_unscaled(const RadialProfile& p, double s) {
  if (s < p.r_grid.front()) {
    const double a = p.series_a(), b = p.series_b();
    return 1.0 + a * s * s + b * s * s * s * s - p.params.alpha0 * s;
  }
  if (s > p.r_grid.back()) return p.kappa_fit * std::pow(s, p.gamma_fit);
  const std::size_t i = locate(p.r_grid, s);
  const double alpha0 = p.params.alpha0;
  return hermite_eval(p.r_grid[i], p.r_grid[i + 1], p.phi[i] - alpha0 * p.r_grid[i],
                      p.phi[i + 1] - alpha0 * p.r_grid[i + 1], p.dphi[i] - alpha0,
                      p.dphi[i + 1] - alpha0, s)
      .value;
}

}  // namespace

ScaledEval eval_scaled_profile(const RadialProfile& profile, double t, double r) {
  require(t > 0.0 && r >= 0.0, errc::invalid_argument, "eval_scaled_profile: need t>0, r>=0");
  const double s = r / t;
  ScaledEval e = eval_unscaled(profile, s);
  e.value *= t;
  e.d2 /= t;
  return e;
}

double scaled_excess(const RadialProfile& profile, double t, double r) {
  return t * excess_unscaled(profile, r / t);
}

double scaled_transversal(const RadialProfile& profile, double t, double r) {
  const double s = r / t;
  const ScaledEval e = eval_unscaled(profile, s);
  return e.value - s * e.d1;
}

FitResult fit_asymptotics(const RadialProfile& profile, double r_lo, double r_hi) {
  require(r_lo >= 100.0 * profile.r_grid.front(), errc::invalid_argument,
          "fit window must start at >= 100 * first grid radius");
  require(r_hi <= profile.r_grid.back() * (1.0 + 1e-12), errc::invalid_argument,
          "fit window exceeds grid");
  std::vector<double> lx, ly;
  const double alpha0 = profile.params.alpha0;
  for (std::size_t i = 0; i < profile.r_grid.size(); ++i) {
    const double r = profile.r_grid[i];
    if (r < r_lo || r > r_hi) continue;
    const double w = profile.phi[i] - alpha0 * r;
    if (w <= 0.0) continue;
    lx.push_back(std::log(r));
    ly.push_back(std::log(w));
  }
  require(lx.size() >= 20, errc::window_too_narrow,
          "fit window contains fewer than 20 usable nodes");
  // Ordinary least squares line.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double nn = double(lx.size());
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / nn;
  FitResult out;
  out.gamma = slope;
  out.kappa = std::exp(intercept);
  out.residual = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i)
    out.residual = std::max(out.residual, std::fabs(ly[i] - (slope * lx[i] + intercept)));
  return out;
}

PropertyReport check_profile_properties(const ConeParams& params, const std::vector<double>& r,
                                        const std::vector<double>& phi,
                                        const std::vector<double>& dphi,
                                        const std::vector<double>& d2phi) {
  PropertyReport rep;
  const double alpha0 = params.alpha0;
  auto scan = [&](auto&& margin_fn, PropertyReport::Entry& e) {
    e.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double mrg = margin_fn(i);
      if (mrg < e.worst_margin) {
        e.worst_margin = mrg;
        e.location = r[i];
      }
    }
    e.ok = e.worst_margin > 0.0;
  };
  scan([&](std::size_t i) { return d2phi[i]; }, rep.convexity);
  scan([&](std::size_t i) { return std::min(dphi[i], alpha0 - dphi[i]); }, rep.slope);
  scan([&](std::size_t i) {
    return std::min(phi[i] - alpha0 * r[i], alpha0 * r[i] + 1.0 - phi[i]);
  }, rep.squeeze);
  scan([&](std::size_t i) { return phi[i] - r[i] * dphi[i]; }, rep.transversal);
  return rep;
}

PropertyReport check_profile_properties(const RadialProfile& profile) {
  return check_profile_properties(profile.params, profile.r_grid, profile.phi, profile.dphi,
                                  profile.d2phi);
}

bool check_comparison(const RadialProfile& std_profile, const RadialProfile& mod_profile,
                      double eps, double e_exponent, double* worst_margin) {
  require(eps > 0.0 && eps <= 0.5, errc::invalid_argument, "check_comparison: eps in (0, 1/2]");
  const double t_std = std::pow(eps, 1.0 + e_exponent);
  double worst = std::numeric_limits<double>::infinity();
  bool ok = true;
  const std::vector<double> sample = logspace(1e-6, 1.0, 2000);
  for (double r : sample) {
    const double lhs = scaled_excess(std_profile, t_std, r);
    const double rhs = scaled_excess(mod_profile, eps, r);
    const double mrg = rhs - lhs;  // phi_{eps^{1+e}} <= phi~_eps  <=>  mrg >= 0
    if (mrg < worst) worst = mrg;
    if (mrg < 0.0) ok = false;
  }
  if (worst_margin) *worst_margin = worst;
  return ok;
}

void write_profile_csv(const RadialProfile& p, const std::string& csv_path,
                       const std::string& json_path) {
  std::ofstream csv(csv_path);
  require(csv.good(), errc::io_error, "cannot open " + csv_path);
  csv << "r,phi,dphi,d2phi\n";
  csv.precision(17);
  for (std::size_t i = 0; i < p.r_grid.size(); ++i)
    csv << p.r_grid[i] << ',' << p.phi[i] << ',' << p.dphi[i] << ',' << p.d2phi[i] << '\n';
  require(csv.good(), errc::io_error, "write failed: " + csv_path);

  nlohmann::json j;
  j["params"] = {{"n", p.params.n},       {"m", p.params.m},
                 {"ell", p.params.ell},   {"alpha0", p.params.alpha0},
                 {"gamma", p.params.gamma}, {"eta", p.params.eta},
                 {"n_tilde", p.params.n_tilde}, {"m_tilde", p.params.m_tilde},
                 {"gamma_tilde", p.params.gamma_tilde}, {"e_exponent", p.params.e_exponent}};
  j["variant"] = p.variant == ProfileVariant::standard ? "standard" : "modified";
  j["kappa_fit"] = p.kappa_fit;
  j["gamma_fit"] = p.gamma_fit;
  j["fit_residual"] = p.fit_residual;
  j["r_min"] = p.r_min;
  j["solve_tol"] = p.solve_tol;
  std::ofstream js(json_path);
  require(js.good(), errc::io_error, "cannot open " + json_path);
  js << j.dump(2) << '\n';
}

RadialProfile read_profile_csv(const std::string& csv_path, const std::string& json_path) {
  std::ifstream js(json_path);
  require(js.good(), errc::io_error, "cannot open " + json_path);
  nlohmann::json j;
  js >> j;
  RadialProfile p;
  const auto& pr = j.at("params");
  p.params = make_cone_params(pr.at("n").get<int>(), pr.at("m").get<int>(),
                              pr.at("ell").get<int>(), pr.at("eta").get<double>(),
                              pr.at("e_exponent").get<double>());
  p.variant = j.at("variant").get<std::string>() == "modified" ? ProfileVariant::modified
                                                               : ProfileVariant::standard;
  p.kappa_fit = j.at("kappa_fit").get<double>();
  p.gamma_fit = j.at("gamma_fit").get<double>();
  p.fit_residual = j.at("fit_residual").get<double>();
  p.r_min = j.at("r_min").get<double>();
  p.solve_tol = j.at("solve_tol").get<double>();

  std::ifstream csv(csv_path);
  require(csv.good(), errc::io_error, "cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    double r, f, d, dd;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &r, &f, &d, &dd) != 4)
      fail(errc::io_error, "malformed profile CSV line: " + line);
    p.r_grid.push_back(r);
    p.phi.push_back(f);
    p.dphi.push_back(d);
    p.d2phi.push_back(dd);
  }
  require(!p.r_grid.empty(), errc::io_error, "empty profile CSV");
  return p;
}

}  // namespace sme
