#include "sme/grid2d.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace sme {

namespace {

// One-dimensional second-order stencils as (offset, weight) pairs.
struct Stencil1D {
  int off[4];
  double w[4];
  int n;
};

Stencil1D d1_stencil(std::size_t i, std::size_t n, double h, bool periodic) {
  if (n == 1) return {{0, 0, 0, 0}, {0.0, 0.0, 0.0, 0.0}, 1};
  if (n == 2)  // two-point slope, exact for linear data
    return i == 0 ? Stencil1D{{0, 1, 0, 0}, {-1.0 / h, 1.0 / h, 0.0}, 2}
                  : Stencil1D{{-1, 0, 0, 0}, {-1.0 / h, 1.0 / h, 0.0}, 2};
  if (periodic || (i > 0 && i + 1 < n)) return {{-1, 1, 0, 0}, {-0.5 / h, 0.5 / h, 0}, 2};
  if (i == 0) return {{0, 1, 2, 0}, {-1.5 / h, 2.0 / h, -0.5 / h}, 3};
  return {{0, -1, -2, 0}, {1.5 / h, -2.0 / h, 0.5 / h}, 3};
}

Stencil1D d2_stencil(std::size_t i, std::size_t n, double h, bool periodic) {
  const double h2 = h * h;
  if (n <= 2) return {{0, 0, 0, 0}, {0.0, 0.0, 0.0, 0.0}, 1};
  if (periodic || (i > 0 && i + 1 < n))
    return {{-1, 0, 1, 0}, {1.0 / h2, -2.0 / h2, 1.0 / h2}, 3};
  if (n == 3) {  // first-order one-sided fallback on tiny grids
    return i == 0 ? Stencil1D{{0, 1, 2, 0}, {1.0 / h2, -2.0 / h2, 1.0 / h2}, 3}
                  : Stencil1D{{0, -1, -2, 0}, {1.0 / h2, -2.0 / h2, 1.0 / h2}, 3};
  }
  if (i == 0) return {{0, 1, 2, 3}, {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2}, 4};
  return {{0, -1, -2, -3}, {2.0 / h2, -5.0 / h2, 4.0 / h2, -1.0 / h2}, 4};
}

std::size_t wrap_y(long j, std::size_t n_y, bool periodic) {
  if (periodic) {
    long m = j % long(n_y);
    if (m < 0) m += long(n_y);
    return std::size_t(m);
  }
  return std::size_t(j);
}

}  // namespace

std::vector<double> Grid2D::boundary_trace() const {
  std::vector<double> out(n_y);
  for (std::size_t j = 0; j < n_y; ++j) out[j] = at(n_rho - 1, j);
  return out;
}

void Grid2D::check_invariants() const {
  for (double v : values)
    require(v > 0.0, errc::nonpositive_u, "grid field must be positive");
  const double dr = drho();
  for (std::size_t j = 0; j < n_y; ++j) {
    // One-sided derivative at the axis vanishes to stencil order for fields
    // even in r; compare against the local third-difference scale.
    const double d = (-1.5 * at(0, j) + 2.0 * at(1, j) - 0.5 * at(2, j)) / dr;
    const double third = std::fabs(at(3, j) - 3.0 * at(2, j) + 3.0 * at(1, j) - at(0, j));
    const double tol = 10.0 * third / dr + 1e-11 * (std::fabs(at(0, j)) + 1.0) / dr;
    require(std::fabs(d) <= tol, errc::property_violation,
            "axis symmetry violated on grid column");
  }
}

Grid2D make_grid_const_radius(std::size_t n_rho, std::size_t n_y, double radius, double y0,
                              double y1, bool periodic,
                              const std::function<double(double, double)>& u) {
  require(n_rho >= 4 && n_y >= 1, errc::grid_too_coarse, "grid too small");
  Grid2D g;
  g.n_rho = n_rho;
  g.n_y = n_y;
  g.y0 = y0;
  g.y1 = y1;
  g.periodic = periodic;
  g.rho = linspace(0.0, 1.0, n_rho);
  if (periodic) {
    g.y.resize(n_y);
    const double dy = (y1 - y0) / double(n_y);
    for (std::size_t j = 0; j < n_y; ++j) g.y[j] = y0 + dy * double(j);
  } else {
    g.y = linspace(y0, y1, n_y);
  }
  g.R.assign(n_y, radius);
  g.dR.assign(n_y, 0.0);
  g.d2R.assign(n_y, 0.0);
  g.values.resize(n_rho * n_y);
  for (std::size_t j = 0; j < n_y; ++j)
    for (std::size_t i = 0; i < n_rho; ++i) g.at(i, j) = u(g.rho[i] * radius, g.y[j]);
  return g;
}

Grid2D make_grid_envelope(std::size_t n_rho, std::size_t n_y, const EnvelopeFn& env, double eps,
                          double y0, double y1, bool periodic,
                          const std::function<double(double, double)>& u) {
  Grid2D g = make_grid_const_radius(n_rho, n_y, 1.0, y0, y1, periodic,
                                    [](double, double) { return 1.0; });
  for (std::size_t j = 0; j < n_y; ++j) {
    const Derivs2 he = env.h_eps(g.y[j], eps);
    g.R[j] = he.v;
    g.dR[j] = he.d1;
    g.d2R[j] = he.d2;
  }
  for (std::size_t j = 0; j < n_y; ++j)
    for (std::size_t i = 0; i < n_rho; ++i) g.at(i, j) = u(g.rho[i] * g.R[j], g.y[j]);
  return g;
}

DerivStencil mapped_deriv_stencil(const Grid2D& g, std::size_t i, std::size_t j) {
  DerivStencil out;
  out.r = g.r_of(i, j);
  out.at_axis = (i == 0);
  const double dr = g.drho();
  const double dyv = g.dy();
  const double R = g.R[j], Rd = g.dR[j], Rdd = g.d2R[j];
  const double rho = g.rho[i];
  const double rho_y = -rho * Rd / R;
  const double rho_yy = rho * (2.0 * Rd * Rd / (R * R) - Rdd / R);

  // rho-direction stencils; i = 0 uses the even extension (mirror fold).
  Stencil1D s1r, s2r;
  if (i == 0) {
    // U_rho = 0 by symmetry; U_rhorho = 2(U1 - U0)/dr^2.
    s1r = {{0, 0, 0, 0}, {0.0, 0.0, 0.0, 0.0}, 1};
    s2r = {{0, 1, 0, 0}, {-2.0 / (dr * dr), 2.0 / (dr * dr), 0.0}, 2};
  } else {
    s1r = d1_stencil(i, g.n_rho, dr, false);
    s2r = d2_stencil(i, g.n_rho, dr, false);
  }
  const Stencil1D s1y = d1_stencil(j, g.n_y, dyv, g.periodic);
  const Stencil1D s2y = d2_stencil(j, g.n_y, dyv, g.periodic);

  // Accumulate contributions keyed by (di, dj).
  auto add = [&](long di, long dj, double wr, double wy, double wrr, double wyy, double wry) {
    std::size_t ii = std::size_t(long(i) + di);
    std::size_t jj = wrap_y(long(j) + dj, g.n_y, g.periodic);
    for (auto& e : out.entries) {
      if (e.i == ii && e.j == jj) {
        e.w_r += wr;
        e.w_y += wy;
        e.w_rr += wrr;
        e.w_yy += wyy;
        e.w_ry += wry;
        return;
      }
    }
    out.entries.push_back({ii, jj, wr, wy, wrr, wyy, wry});
  };

  // U_rho and U_rhorho (plain mapped-coordinate derivatives).
  // u_r = U_rho / R, u_rr = U_rhorho / R^2.
  for (int a = 0; a < s1r.n; ++a) add(s1r.off[a], 0, s1r.w[a] / R, 0, 0, 0, 0);
  for (int a = 0; a < s2r.n; ++a) add(s2r.off[a], 0, 0, 0, s2r.w[a] / (R * R), 0, 0);

  // u_y = U_y + rho_y U_rho.
  for (int b = 0; b < s1y.n; ++b) add(0, s1y.off[b], 0, s1y.w[b], 0, 0, 0);
  for (int a = 0; a < s1r.n; ++a) add(s1r.off[a], 0, 0, rho_y * s1r.w[a], 0, 0, 0);

  // u_yy = U_yy + 2 rho_y U_rhoy + rho_y^2 U_rhorho + rho_yy U_rho.
  for (int b = 0; b < s2y.n; ++b) add(0, s2y.off[b], 0, 0, 0, s2y.w[b], 0);
  for (int a = 0; a < s1r.n; ++a)
    for (int b = 0; b < s1y.n; ++b)
      add(s1r.off[a], s1y.off[b], 0, 0, 0, 2.0 * rho_y * s1r.w[a] * s1y.w[b], 0);
  for (int a = 0; a < s2r.n; ++a) add(s2r.off[a], 0, 0, 0, 0, rho_y * rho_y * s2r.w[a], 0);
  for (int a = 0; a < s1r.n; ++a) add(s1r.off[a], 0, 0, 0, 0, rho_yy * s1r.w[a], 0);

  // u_ry = (U_rhoy + rho_y U_rhorho)/R - U_rho * R'/R^2.
  for (int a = 0; a < s1r.n; ++a)
    for (int b = 0; b < s1y.n; ++b)
      add(s1r.off[a], s1y.off[b], 0, 0, 0, 0, s1r.w[a] * s1y.w[b] / R);
  for (int a = 0; a < s2r.n; ++a) add(s2r.off[a], 0, 0, 0, 0, 0, rho_y * s2r.w[a] / R);
  for (int a = 0; a < s1r.n; ++a) add(s1r.off[a], 0, 0, 0, 0, 0, -Rd / (R * R) * s1r.w[a]);

  return out;
}

NodeDerivs mapped_derivs(const Grid2D& g, std::size_t i, std::size_t j) {
  const DerivStencil st = mapped_deriv_stencil(g, i, j);
  NodeDerivs nd;
  nd.r = st.r;
  nd.yv = g.y[j];
  nd.at_axis = st.at_axis;
  nd.u = g.at(i, j);
  for (const auto& e : st.entries) {
    const double v = g.at(e.i, e.j);
    nd.u_r += e.w_r * v;
    nd.u_y += e.w_y * v;
    nd.u_rr += e.w_rr * v;
    nd.u_yy += e.w_yy * v;
    nd.u_ry += e.w_ry * v;
  }
  return nd;
}

void write_grid_csv(const Grid2D& g, const std::string& csv_path, const std::string& json_path) {
  std::ofstream csv(csv_path);
  require(csv.good(), errc::io_error, "cannot open " + csv_path);
  csv << "rho,y,value\n";
  csv.precision(17);
  for (std::size_t j = 0; j < g.n_y; ++j)
    for (std::size_t i = 0; i < g.n_rho; ++i)
      csv << g.rho[i] << ',' << g.y[j] << ',' << g.at(i, j) << '\n';
  require(csv.good(), errc::io_error, "write failed: " + csv_path);

  nlohmann::json meta;
  meta["n_rho"] = g.n_rho;
  meta["n_y"] = g.n_y;
  meta["y0"] = g.y0;
  meta["y1"] = g.y1;
  meta["periodic"] = g.periodic;
  meta["column_radius"] = g.R;
  meta["column_radius_d1"] = g.dR;
  meta["column_radius_d2"] = g.d2R;
  std::ofstream js(json_path);
  require(js.good(), errc::io_error, "cannot open " + json_path);
  js << meta.dump(2) << '\n';
}

Grid2D read_grid_csv(const std::string& csv_path, const std::string& json_path) {
  std::ifstream js(json_path);
  require(js.good(), errc::io_error, "cannot open " + json_path);
  nlohmann::json meta;
  js >> meta;
  Grid2D g;
  g.n_rho = meta.at("n_rho").get<std::size_t>();
  g.n_y = meta.at("n_y").get<std::size_t>();
  g.y0 = meta.at("y0").get<double>();
  g.y1 = meta.at("y1").get<double>();
  g.periodic = meta.at("periodic").get<bool>();
  g.R = meta.at("column_radius").get<std::vector<double>>();
  g.dR = meta.at("column_radius_d1").get<std::vector<double>>();
  g.d2R = meta.at("column_radius_d2").get<std::vector<double>>();
  g.rho = linspace(0.0, 1.0, g.n_rho);
  if (g.periodic) {
    g.y.resize(g.n_y);
    const double dy = (g.y1 - g.y0) / double(g.n_y);
    for (std::size_t j = 0; j < g.n_y; ++j) g.y[j] = g.y0 + dy * double(j);
  } else {
    g.y = linspace(g.y0, g.y1, g.n_y);
  }
  g.values.assign(g.n_rho * g.n_y, 0.0);
  std::ifstream csv(csv_path);
  require(csv.good(), errc::io_error, "cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);
  std::size_t count = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    double rho, y, v;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &rho, &y, &v) != 3)
      fail(errc::io_error, "malformed grid CSV line: " + line);
    require(count < g.values.size(), errc::io_error, "grid CSV longer than metadata");
    g.values[count++] = v;
  }
  require(count == g.values.size(), errc::io_error, "grid CSV shorter than metadata");
  return g;
}

}  // namespace sme
