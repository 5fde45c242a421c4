#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sme/envelope.hpp"

using namespace sme;

namespace {

RadialProfile& mod35() {
  static RadialProfile p =
      solve_radial(make_cone_params(3, 5, 1, 0.01, 0.05), ProfileVariant::modified, 1e4, 1e-10);
  return p;
}

EnvelopeOptions default_opts() {
  EnvelopeOptions o;
  o.tau0 = 0.1;
  return o;
}

}  // namespace

TEST_CASE("closed set normalization") {
  ClosedSetSpec pts;
  pts.kind = ClosedSetSpec::Kind::finite_points;
  pts.points = {1.0, -2.0, 1.0};
  auto iv = pts.normalized();
  REQUIRE(iv.size() == 2);
  CHECK(iv[0].first == -2.0);

  ClosedSetSpec cantor;
  cantor.kind = ClosedSetSpec::Kind::cantor_like;
  cantor.cantor_depth = 4;
  CHECK(cantor.normalized().size() == 16);

  ClosedSetSpec empty;
  empty.kind = ClosedSetSpec::Kind::finite_points;
  CHECK_THROWS_AS(empty.normalized(), error);
}

TEST_CASE("h closed form for a single point, unit amplitude") {
  // With amplitude_factor = 1 the profile is exactly tau0 * exp(-1/dist).
  EnvelopeOptions o = default_opts();
  o.amplitude_factor = 1.0;
  // The unnormalized profile violates the C2 bound (sup |(e^{-1/d})''| ~ 2.5),
  // so build for evaluation checks only with the bound relaxed via tau0 and
  // catch the violation separately below.
  CHECK_THROWS_AS(build_envelope(ClosedSetSpec::single_point(0.0), o), error);
  try {
    build_envelope(ClosedSetSpec::single_point(0.0), o);
  } catch (const error& e) {
    CHECK(e.code() == errc::bound_violation);
  }

  // Default amplitude_factor keeps the bound and scales h by the same factor.
  EnvelopeOptions od = default_opts();
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), od);
  CHECK(env.h(0.0) == 0.0);
  CHECK(env.h_derivs(0.0).d1 == 0.0);
  const double expected = 0.1 * od.amplitude_factor * std::exp(-1.0);
  CHECK(env.h(1.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(env.probe_report().bound_ok);
  CHECK(env.probe_report().positive_ok);
}

TEST_CASE("C2 bound holds on probe set for the default profile") {
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  const auto& rep = env.probe_report();
  CHECK(rep.bound_ok);
  CHECK(rep.bound_max < 0.1);
  CHECK(rep.flat_ok);
}

TEST_CASE("mollified midpoint of an interval union is C2") {
  ClosedSetSpec s;
  s.kind = ClosedSetSpec::Kind::interval_union;
  s.intervals = {{-1.0, 0.0}, {1.0, 2.0}};
  const EnvelopeFn env = build_envelope(s, default_opts());
  // Raw distance kinks at y = 0.5; the mollified h must have a finite,
  // bounded second derivative there.
  const Derivs2 at = env.h_derivs(0.5);
  CHECK(std::isfinite(at.d2));
  CHECK(std::fabs(at.d2) < 0.1);
  // Numeric second difference agrees with the analytic one.
  const double st = 1e-4;
  const double num =
      (env.h(0.5 + st) - 2.0 * env.h(0.5) + env.h(0.5 - st)) / (st * st);
  CHECK(num == doctest::Approx(at.d2).epsilon(1e-3));
  // h vanishes on both components.
  CHECK(env.h(-0.5) == 0.0);
  CHECK(env.h(1.7) == 0.0);
}

TEST_CASE("derivative evaluators match finite differences off K") {
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  for (double y : {0.31, 0.9, 1.7, -2.3}) {
    const Derivs2 d = env.h_derivs(y);
    const double st = 1e-5;
    const double fd1 = (env.h(y + st) - env.h(y - st)) / (2.0 * st);
    const double fd2 = (env.h(y + st) - 2.0 * env.h(y) + env.h(y - st)) / (st * st);
    CHECK(d.d1 == doctest::Approx(fd1).epsilon(1e-6));
    CHECK(d.d2 == doctest::Approx(fd2).epsilon(1e-4));
  }
}

TEST_CASE("flatness: h vanishes faster than any tested power of dist") {
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  double prev = 1.0;
  for (int k = 3; k <= 12; ++k) {
    const double d = std::pow(0.5, k);
    const double ratio = env.h(d) / std::pow(d, 4);
    CHECK(ratio < prev + 1e-30);
    prev = ratio;
  }
  CHECK(env.h(std::pow(0.5, 12)) / std::pow(std::pow(0.5, 12), 4) < 1e-6);
}

TEST_CASE("periodized envelope wraps smoothly") {
  EnvelopeOptions o = default_opts();
  o.q_period = 4.0;
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), o);
  CHECK(env.h(1.0) == doctest::Approx(env.h(1.0 + 4.0)).epsilon(1e-15));
  CHECK(env.h(1.0) == doctest::Approx(env.h(1.0 - 8.0)).epsilon(1e-15));
  // Plateau region matches the unperiodized profile.
  const EnvelopeFn plain = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  CHECK(env.h(0.9) == doctest::Approx(plain.h(0.9)).epsilon(1e-14));
  // Dies before the cell boundary.
  CHECK(env.h(2.0) == 0.0);
}

TEST_CASE("psi closed form") {
  // psi = t + tau exp(-1/(eps^{1/4} + h)); with h = 0.1, eps = 1e-4, t = 0,
  // tau = 1 this is e^{-5}.
  EnvelopeOptions o = default_opts();
  o.tau0 = 0.25;
  o.amplitude_factor = 0.1;
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), o);
  // Find y with h(y) = 0.1: h = 0.025 e^{-1/|y|} cannot reach 0.1, so check
  // the formula through the envelope at its own h value instead.
  const double y = 1.3;
  const double h = env.h(y);
  const double psi = env.psi(y, 0.0, 1.0, 1e-4).v;
  CHECK(psi == doctest::Approx(std::exp(-1.0 / (0.1 + h))).epsilon(1e-13));
  // And the quoted spot value with h forced to 0.1 via the closed form.
  CHECK(std::exp(-1.0 / (0.1 + 0.1)) == doctest::Approx(6.7379469990e-3).epsilon(1e-9));
  // Monotone in t.
  CHECK(env.psi(y, 0.5, 1.0, 1e-4).v > psi);
}

TEST_CASE("supersolution evaluation and bounds") {
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  const RadialProfile& mod = mod35();
  const SupersolutionParams p{0.0, 1e-3, 1e-3};
  for (double y : {0.4, 1.1, 2.5}) {
    for (double rfrac : {0.0, 0.3, 0.9}) {
      const double r = rfrac * env.h_eps(y, p.eps).v;
      const double S = supersolution_eval(env, p, mod, r, y);
      const double psi = env.psi(y, p.t, p.tau, p.eps).v;
      // 0 < S - alpha0 r <= C psi (Phi~ <= Phi~(0) = 1 and profile squeeze).
      CHECK(S - mod.params.alpha0 * r > 0.0);
      CHECK(S - mod.params.alpha0 * r <= psi * 1.0 + 1e-18);
    }
  }
  // Monotone in t pointwise.
  const SupersolutionParams p2{0.5, 1e-3, 1e-3};
  CHECK(supersolution_eval(env, p2, mod, 0.01, 1.0) >
        supersolution_eval(env, p, mod, 0.01, 1.0));
}

TEST_CASE("supersolution sign certificate") {
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  const RadialProfile& mod = mod35();
  SuperGridSpec grid;
  grid.ny = 41;
  grid.nr = 40;
  for (double t : {0.0, 1e-3, 1.0}) {
    for (double eps : {1e-4, 1e-3, 1e-2}) {
      const SignReport rep = verify_supersolution(env, {t, 1e-3, eps}, mod, grid);
      INFO("t=", t, " eps=", eps, " max_norm=", rep.max_normalized);
      CHECK(rep.pass);
      CHECK(rep.max_normalized < 0.0);
    }
  }
}

TEST_CASE("supersolution stress case outside the lemma hypotheses") {
  // Steep, unsmoothed profile with a large amplitude: the certificate may
  // fail, and must report rather than throw.
  EnvelopeOptions o;
  o.tau0 = 0.25;
  o.amplitude_factor = 0.9;
  o.width = 0.6;
  ClosedSetSpec s = ClosedSetSpec::single_point(0.0);
  bool threw_bound = false;
  try {
    const EnvelopeFn env = build_envelope(s, o);
    const SignReport rep = verify_supersolution(env, {0.0, 0.45, 1e-3}, mod35(), {});
    (void)rep;  // report-only; no exception either way
  } catch (const error& e) {
    threw_bound = e.code() == errc::bound_violation;
  }
  CHECK(threw_bound);  // this particular profile already violates the C2 bound
}

TEST_CASE("grid coarseness is rejected") {
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  SuperGridSpec grid;
  grid.nr = 16;
  CHECK_THROWS_AS(verify_supersolution(env, {0.0, 1e-3, 1e-3}, mod35(), grid), error);
}

TEST_CASE("r0 bound value") {
  const EnvelopeFn env = build_envelope(ClosedSetSpec::single_point(0.0), default_opts());
  const RadialProfile& mod = mod35();
  const double tau0 = env.options().tau0;
  const double v1 = check_r0_bound(env, 1e-4, 1e-4, mod);
  // Paper-form bound: <= C (eps^{1/4} + tau0)^2 with C near phi~(0) = 1.
  CHECK(v1 <= 2.0 * sqr(std::pow(1e-4, 0.25) + tau0));
  // eps -> 0 with h fixed: the value decreases.
  const double v2 = check_r0_bound(env, 1e-4, 1e-6, mod);
  CHECK(v2 < v1);
  // Monotone increase in eps at the largest allowed value.
  const double v3 = check_r0_bound(env, 1e-4, tau0, mod);
  CHECK(v3 > v1);
  CHECK(std::isfinite(v3));
}
