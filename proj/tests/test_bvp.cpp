#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sme/bvp.hpp"

using namespace sme;

namespace {

const ConeParams& cp35() {
  static ConeParams p = make_cone_params(3, 5, 1, 0.01, 0.05);
  return p;
}
const RadialProfile& phi35() {
  static RadialProfile p = solve_radial(cp35(), ProfileVariant::standard, 1e4, 1e-10);
  return p;
}
const RadialProfile& phimod35() {
  static RadialProfile p = solve_radial(cp35(), ProfileVariant::modified, 1e4, 1e-10);
  return p;
}

EnvelopeFn default_env(double q = 4.0) {
  EnvelopeOptions o;
  o.tau0 = 0.1;
  o.q_period = q;
  return build_envelope(ClosedSetSpec::single_point(0.0), o);
}

BvpProblem flagship_problem() {
  BvpProblem pb;
  pb.params = cp35();
  pb.env = default_env();
  pb.std_profile = phi35();
  pb.mod_profile = phimod35();
  pb.eps = 1e-3;
  pb.tau = 1e-3;
  pb.q_period = 4.0;
  pb.n_rho = 192;
  pb.n_y = 192;
  return pb;
}

const BvpSolution& flagship_solution() {
  static BvpSolution sol = solve_bvp(flagship_problem());
  return sol;
}

}  // namespace

TEST_CASE("continuation reaches sigma = 1 with certified bounds") {
  const BvpSolution& sol = flagship_solution();
  CHECK(sol.sigma_final == 1.0);
  CHECK(sol.residual_final < 1e-9);
  CHECK(sol.squeeze_lower_margin > -1e-8);
  CHECK(sol.squeeze_upper_margin > -1e-8);
  CHECK(sol.max_grad <= 2.0 * cp35().alpha0);
  CHECK(sol.max_grad_y <= 0.05);
  CHECK(sol.grad_ok);
  sol.u.check_invariants();
}

TEST_CASE("boundary trace equals the supersolution data exactly") {
  const BvpProblem pb = flagship_problem();
  const BvpSolution& sol = flagship_solution();
  const std::vector<double> trace = sol.u.boundary_trace();
  for (std::size_t j = 0; j < sol.u.n_y; ++j) {
    const double psi = pb.env.psi(sol.u.y[j], pb.eps, pb.tau, pb.eps).v;
    const double S = eval_scaled_profile(pb.mod_profile, psi, sol.u.R[j]).value;
    CHECK(trace[j] == S);  // set as Dirichlet data, must match bitwise
  }
}

TEST_CASE("interior squeeze is strictly positive away from the boundary") {
  const BvpProblem pb = flagship_problem();
  const BvpSolution& sol = flagship_solution();
  const double t_low = std::pow(pb.eps, 1.0 + pb.params.e_exponent);
  double min_lower = 1e300, min_upper = 1e300;
  for (std::size_t j = 0; j < sol.u.n_y; ++j) {
    const double psi = pb.env.psi(sol.u.y[j], pb.eps, pb.tau, pb.eps).v;
    for (std::size_t i = 0; i + i / 10 < sol.u.n_rho * 9 / 10; ++i) {
      const double r = sol.u.r_of(i, j);
      min_lower = std::min(min_lower,
                           sol.u.at(i, j) - eval_scaled_profile(pb.std_profile, t_low, r).value);
      min_upper = std::min(min_upper,
                           eval_scaled_profile(pb.mod_profile, psi, r).value - sol.u.at(i, j));
    }
  }
  CHECK(min_lower > 0.0);
  CHECK(min_upper > 0.0);
}

TEST_CASE("sliding family keeps no interior negative minimum") {
  CHECK(flagship_solution().sliding_margin > -1e-8);
}

TEST_CASE("y-independent data reproduce a radial solution") {
  // An envelope with vanishing amplitude makes every column identical, so the
  // discrete solution must be y-independent and match a narrow-grid solve.
  EnvelopeOptions o;
  o.tau0 = 0.1;
  o.amplitude_factor = 1e-9;
  o.q_period = 4.0;
  BvpProblem pb = flagship_problem();
  pb.env = build_envelope(ClosedSetSpec::single_point(0.0), o);
  pb.n_y = 24;
  const BvpSolution sol = solve_bvp(pb);
  for (std::size_t i = 0; i < sol.u.n_rho; ++i)
    for (std::size_t j = 1; j < sol.u.n_y; ++j)
      CHECK(std::fabs(sol.u.at(i, j) - sol.u.at(i, 0)) < 1e-8);

  BvpProblem narrow = pb;
  narrow.n_y = 6;
  const BvpSolution rad = solve_bvp(narrow);
  for (std::size_t i = 0; i < sol.u.n_rho; ++i)
    CHECK(std::fabs(sol.u.at(i, 0) - rad.u.at(i, 0)) < 1e-8);
}

TEST_CASE("eps family: Cauchy differences decrease, extrapolation stays positive") {
  BvpProblem pb = flagship_problem();
  pb.n_rho = 160;
  pb.n_y = 32;
  const EpsFamilyResult fam = eps_family(pb, {1e-2, 3e-3, 1e-3});
  REQUIRE(fam.solutions.size() == 3);
  REQUIRE(fam.cauchy_sup.size() == 2);
  CHECK(fam.cauchy_sup[1] < fam.cauchy_sup[0]);
  // At this reduced resolution the excess sits inside the discretization
  // allowance near the outer boundary; the margin is a report.
  CHECK(fam.positivity_margin >
        -2.0 * fam.solutions.back().discretization_allowance - 1e-9);
  CHECK(fam.near_k_ratio.size() == 4);
  for (const BvpSolution& s : fam.solutions) CHECK(s.sigma_final == 1.0);
}

TEST_CASE("glued field: cone outside, solution inside, smooth blend") {
  const BvpProblem pb = flagship_problem();
  const BvpSolution& sol = flagship_solution();
  const GlobalU glob = glue_global(sol.u, pb.env, pb.params, pb.eps);
  const double alpha0 = pb.params.alpha0;

  const double y_probe = 1.0;
  const double H = glob.h_squared(y_probe);
  REQUIRE(H > 0.0);

  // r >= h^2: exactly the cone.
  GlobalU::Value v = glob.eval(1.05 * H, y_probe);
  CHECK(v.cone);
  CHECK(v.u == alpha0 * 1.05 * H);
  CHECK(v.u_r == alpha0);
  CHECK(v.u_yy == 0.0);

  // y in K: cone for every radius.
  v = glob.eval(0.5, 0.0);
  CHECK(v.cone);

  // r <= h^2/2: matches the solution grid (cutoff plateau).
  const std::size_t j = sol.u.n_y / 4;
  const double yy = sol.u.y[j];
  const double H2 = glob.h_squared(yy);
  std::size_t i = 1;
  while (i + 1 < sol.u.n_rho && sol.u.r_of(i + 1, j) < 0.45 * H2) ++i;
  const double r = sol.u.r_of(i, j);
  CHECK(r < 0.5 * H2);
  v = glob.eval(r, yy);
  CHECK(v.u == doctest::Approx(sol.u.at(i, j)).epsilon(1e-12));

  // Continuity across the blend: sample u along r near h^2.
  double prev = 0.0;
  bool first = true;
  for (double rr = 0.4 * H; rr < 1.2 * H; rr += H / 400.0) {
    const double val = glob.eval(rr, y_probe).u - alpha0 * rr;
    if (!first) CHECK(std::fabs(val - prev) < 2e-4 * (std::fabs(prev) + 1e-12) + 1e-9);
    prev = val;
    first = false;
  }

  // Derivative consistency of the evaluator by finite differences.
  const double r0 = 0.8 * H, dy = 1e-5, drr = 1e-6;
  const GlobalU::Value c = glob.eval(r0, y_probe);
  const double fd_r = (glob.eval(r0 + drr, y_probe).u - glob.eval(r0 - drr, y_probe).u) / (2 * drr);
  const double fd_y = (glob.eval(r0, y_probe + dy).u - glob.eval(r0, y_probe - dy).u) / (2 * dy);
  CHECK(c.u_r == doctest::Approx(fd_r).epsilon(1e-5));
  CHECK(c.u_y == doctest::Approx(fd_y).epsilon(1e-4));

  CHECK(glob.value_hash() == glue_global(sol.u, pb.env, pb.params, pb.eps).value_hash());
}

TEST_CASE("slice comparison: synthetic radial solution matches its profile") {
  const BvpProblem pb = flagship_problem();
  const double lam = 1.4e-3;
  Grid2D g = make_grid_envelope(192, 16, pb.env, pb.eps, -2.0, 2.0, true,
                                [&](double r, double) {
                                  return eval_scaled_profile(phi35(), lam, r).value;
                                });
  SolverConstants sc;
  const SliceReport rep = slice_compare(g, pb.env, pb.eps, 1.0, phi35(), sc);
  CHECK(rep.hypothesis_met);
  CHECK(rep.tau_hat == doctest::Approx(lam).epsilon(1e-6));
  INFO("kappa=", rep.kappa_measured);
  CHECK(rep.kappa_measured < 0.02);
  CHECK(rep.pass);
}

TEST_CASE("slice comparison gate rejects large central values") {
  const BvpProblem pb = flagship_problem();
  Grid2D g = make_grid_envelope(64, 16, pb.env, pb.eps, -2.0, 2.0, true,
                                [&](double r, double) {
                                  return eval_scaled_profile(phi35(), 2e-2, r).value;
                                });
  SolverConstants sc;
  const SliceReport rep = slice_compare(g, pb.env, pb.eps, 1.0, phi35(), sc);
  CHECK_FALSE(rep.hypothesis_met);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("pipeline slices of the flagship solution pass the C2 comparison") {
  const BvpProblem pb = flagship_problem();
  const BvpSolution& sol = flagship_solution();
  SolverConstants sc;
  int passes = 0, gated = 0;
  for (double y0 : {0.6, 0.9, 1.2, 1.5, 1.8}) {
    const SliceReport rep = slice_compare(sol.u, pb.env, pb.eps, y0, phi35(), sc);
    if (rep.hypothesis_met) {
      ++gated;
      INFO("y0=", y0, " kappa=", rep.kappa_measured);
      if (rep.pass) ++passes;
    }
  }
  CHECK(gated >= 5);
  CHECK(passes == gated);
}

TEST_CASE("solution export round trip") {
  const BvpSolution& sol = flagship_solution();
  write_bvp_solution(sol, "/tmp/sme_bvp.csv", "/tmp/sme_bvp.json");
  const Grid2D g = read_grid_csv("/tmp/sme_bvp.csv", "/tmp/sme_bvp.json.grid.json");
  CHECK(g.at(10, 10) == doctest::Approx(sol.u.at(10, 10)).epsilon(1e-15));
}
