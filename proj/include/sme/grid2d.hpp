#ifndef SME_GRID2D_HPP
#define SME_GRID2D_HPP

#include <functional>
#include <string>
#include <vector>

#include "sme/envelope.hpp"

namespace sme {

// Scalar field u(r, y) stored in mapped coordinates rho = r / R(y) in [0,1]
// (uniform) by columns of uniform y nodes.  R is the column radius, normally
// h_eps(y) of an envelope; constant-radius grids are supported for operator
// studies.  Values are row-major with rho fastest: index = j * n_rho + i.
struct Grid2D {
  std::size_t n_rho = 0, n_y = 0;
  double y0 = 0.0, y1 = 0.0;
  bool periodic = false;  // periodic in y with period y1 - y0
  std::vector<double> rho;
  std::vector<double> y;
  std::vector<double> R, dR, d2R;
  std::vector<double> values;

  std::size_t index(std::size_t i, std::size_t j) const { return j * n_rho + i; }
  double& at(std::size_t i, std::size_t j) { return values[index(i, j)]; }
  double at(std::size_t i, std::size_t j) const { return values[index(i, j)]; }
  double r_of(std::size_t i, std::size_t j) const { return rho[i] * R[j]; }
  double drho() const { return rho[1] - rho[0]; }
  double dy() const { return y.size() > 1 ? y[1] - y[0] : 1.0; }

  std::vector<double> boundary_trace() const;

  // Positivity plus the discrete axis symmetry (one-sided D_rho at rho=0).
  void check_invariants() const;
};

// Uniform-radius grid (R const), sampling u(r, y).
Grid2D make_grid_const_radius(std::size_t n_rho, std::size_t n_y, double radius, double y0,
                              double y1, bool periodic,
                              const std::function<double(double, double)>& u);

// Columns follow R(y) = h_eps(y) of the envelope.
Grid2D make_grid_envelope(std::size_t n_rho, std::size_t n_y, const EnvelopeFn& env, double eps,
                          double y0, double y1, bool periodic,
                          const std::function<double(double, double)>& u);

// All partials of u at a node in physical (r, y) coordinates, including the
// chain-rule terms of the rho-mapping.  Second-order stencils; even extension
// across the axis; one-sided at rho = 1 and at non-periodic y edges.
struct NodeDerivs {
  double u = 0.0, u_r = 0.0, u_y = 0.0, u_rr = 0.0, u_yy = 0.0, u_ry = 0.0;
  double r = 0.0, yv = 0.0;
  bool at_axis = false;
};
NodeDerivs mapped_derivs(const Grid2D& g, std::size_t i, std::size_t j);

// Stencil row of the same derivatives as linear maps of nodal values, for
// analytic Jacobians.  Entries cover the folded 3x3 neighborhood.
struct DerivStencil {
  // Each list: (i, j, weight) triples applied to grid values.
  struct Entry {
    std::size_t i, j;
    double w_r, w_y, w_rr, w_yy, w_ry;
  };
  std::vector<Entry> entries;
  double r = 0.0;
  bool at_axis = false;
};
DerivStencil mapped_deriv_stencil(const Grid2D& g, std::size_t i, std::size_t j);

// CSV (rho, y, value) plus JSON sidecar with the column radii and geometry.
void write_grid_csv(const Grid2D& g, const std::string& csv_path, const std::string& json_path);
Grid2D read_grid_csv(const std::string& csv_path, const std::string& json_path);

}  // namespace sme

#endif  // SME_GRID2D_HPP
