#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "maser/errors.hpp"
#include "maser/fisher.hpp"
#include "maser/inference.hpp"

using namespace maser;

namespace {

PathSummary one_level(double t, std::uint64_t ground, std::uint64_t excited, std::uint64_t absorb) {
  PathSummary s;
  s.horizon = t;
  s.occupation = {t};
  s.counts = {{ground, excited, 0, absorb}};
  s.totals = {ground, excited, 0, absorb};
  return s;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("single-level likelihood in closed form") {
  const double n_ex = 100.0, nu = 0.15, t = 2.0;
  const PathSummary s = one_level(t, 30, 170, 1);
  const double phi = 0.4;
  const double sn = std::sin(phi), cs = std::cos(phi);
  const double expect = 30.0 * std::log(n_ex * sn * sn) + 170.0 * std::log(n_ex * cs * cs) +
                        std::log(nu) - t * (n_ex + nu);
  CHECK(loglik(s, phi, n_ex, nu) == doctest::Approx(expect).epsilon(1e-13));
  // phi and pi - phi tie on a single level.
  CHECK(mle_phi(s, n_ex, nu, ObservedChannels::full(), 0.01, 1.5) ==
        doctest::Approx(std::asin(std::sqrt(30.0 / 200.0))).epsilon(1e-9));
  CHECK(std::pow(std::sin(mle_phi(s, n_ex, nu, ObservedChannels::full())), 2) ==
        doctest::Approx(0.15).epsilon(1e-9));
  const PathSummary none = one_level(t, 0, 200, 0);
  CHECK(mle_phi(none, n_ex, nu, ObservedChannels::full(), 0.0, 1.5) < 1e-8);
}

TEST_CASE("likelihood ignores the time origin") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  Trajectory t = simulate(p, 95, 3.0, 8);
  const double base = loglik(t, 0.2);
  t.start_time = 1e3;
  for (JumpEvent& e : t.events) e.time += 1e3;
  CHECK(loglik(t, 0.2) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("impossible paths") {
  const PathSummary s = one_level(1.0, 3, 50, 1);
  CHECK(loglik(s, 0.5, 100.0, 0.0) == -std::numeric_limits<double>::infinity());
  CHECK(code_of([&] { mle_phi(s, 100.0, 0.0, ObservedChannels::full()); }) ==
        ErrorCode::no_finite_likelihood);
  CHECK(code_of([&] { loglik(s, 4.0, 100.0, 0.15); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { mle_phi(s, 100.0, 0.15, ObservedChannels::full(), 1.0, 0.5); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("state-changing channels must be observed") {
  const PathSummary s = one_level(1.0, 3, 50, 1);
  ObservedChannels no_emit;
  no_emit.emit = false;
  ObservedChannels no_absorb;
  no_absorb.absorb = false;
  CHECK(code_of([&] { loglik(s, 0.5, 100.0, 0.15, no_emit); }) == ErrorCode::unsupported_observation);
  CHECK(code_of([&] { loglik(s, 0.5, 100.0, 0.15, no_absorb); }) == ErrorCode::unsupported_observation);
  CHECK(std::isfinite(loglik(s, 0.5, 100.0, 0.15, ObservedChannels::cavity_only())));
  CHECK(ObservedChannels::cavity_only().label() == "up+emit");
  CHECK(ObservedChannels::full().label() == "ground+absorb+excited+emit");
}

TEST_CASE("score has mean zero and variance equal to the information") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const FisherReport r = fisher_report(p);
  EnsembleSpec spec;
  spec.params = p;
  spec.horizon = 10.0;
  spec.n_traj = 400;
  spec.seed = 31;
  struct Row {
    double s_full, c_full, s_cav, c_cav;
  };
  const auto rows = run_ensemble(spec, [&](const PathSummary& s, std::size_t) {
    const auto [sf, cf] = score_and_curvature(s, p.phi(), p.n_ex(), p.nu(), ObservedChannels::full());
    const auto [sc, cc] =
        score_and_curvature(s, p.phi(), p.n_ex(), p.nu(), ObservedChannels::cavity_only());
    return Row{sf, cf, sc, cc};
  });
  auto check = [&](auto score, auto curv, double info) {
    std::vector<double> sv, s2, cv;
    for (const Row& row : rows) {
      sv.push_back(score(row));
      s2.push_back(score(row) * score(row));
      cv.push_back(-curv(row));
    }
    const EnsembleStats a = ensemble_stats(sv), b = ensemble_stats(s2), c = ensemble_stats(cv);
    const double n = static_cast<double>(rows.size());
    const double expected = spec.horizon * info;
    CHECK(std::abs(a.mean) < 4.0 * std::sqrt(a.variance / n));
    CHECK(std::abs(b.mean - expected) < 4.0 * std::sqrt(b.variance / n));
    CHECK(std::abs(c.mean - expected) < 4.0 * std::sqrt(c.variance / n));
  };
  check([](const Row& x) { return x.s_full; }, [](const Row& x) { return x.c_full; }, r.i_tot);
  check([](const Row& x) { return x.s_cav; }, [](const Row& x) { return x.c_cav; }, r.i_cav);
}

TEST_CASE("moment estimator design") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const MomentDesign d = moment_design(p, Channel::ground);
  const StationaryDistribution pi = stationary_distribution(p);
  CHECK(d.m == doctest::Approx(pi.mean_photon - 0.15).epsilon(1e-9));
  CHECK(d.i_counts == doctest::Approx(fisher_report(p).i_gr).epsilon(1e-9));
  CHECK(d.i_tot == doctest::Approx(fisher_report(p).i_tot).epsilon(1e-12));
  CHECK(moment_estimator(d, 1e4 * d.m, 1e4).phi_hat == doctest::Approx(p.phi()).epsilon(1e-15));
  const double a = moment_estimator(d, 1e4 * d.m + 10.0, 1e4).phi_hat;
  const double b = moment_estimator(d, 1e4 * d.m + 20.0, 1e4).phi_hat;
  CHECK(b - p.phi() == doctest::Approx(2.0 * (a - p.phi())).epsilon(1e-9));
  CHECK(moment_estimator(d, 0.0, 1.0).method == "moment-ground");
  CHECK(code_of([&] { moment_estimator(d, 1.0, 0.0); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { moment_design(p, Channel::emit); }) == ErrorCode::invalid_argument);
  CHECK(code_of([&] { moment_design(MaserParams(0.16, 100.0, 0.15), Channel::ground); }) ==
        ErrorCode::insensitive_design_point);
}

TEST_CASE("ensemble statistics") {
  const EnsembleStats c = ensemble_stats({2.0, 2.0, 2.0, 2.0});
  CHECK(c.variance == 0.0);
  CHECK(c.normality_distance == doctest::Approx(0.5));
  const EnsembleStats s = ensemble_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.variance == doctest::Approx(5.0 / 3.0));
  CHECK(s.skewness == doctest::Approx(0.0));
  CHECK(s.excess_kurtosis == doctest::Approx(-1.2));
  CHECK(ensemble_stats({0.0, 0.0, 0.0, 10.0}).skewness == doctest::Approx(2.0));
  CHECK_THROWS_AS(ensemble_stats({1.0}), Error);

  PhiloxStream rng(99, 0, StreamPurpose::synthetic);
  std::vector<double> z;
  while (z.size() < 20000) {
    const PhiloxCounter b = rng.next();
    const double u1 = 1.0 - unit_double(b[0], b[1]);
    const double u2 = unit_double(b[2], b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    z.push_back(r * std::cos(2.0 * std::numbers::pi * u2));
    z.push_back(r * std::sin(2.0 * std::numbers::pi * u2));
  }
  const EnsembleStats n = ensemble_stats(z);
  CHECK(std::abs(n.mean) < 0.03);
  CHECK(n.variance == doctest::Approx(1.0).epsilon(0.03));
  CHECK(std::abs(n.skewness) < 0.1);
  CHECK(std::abs(n.excess_kurtosis) < 0.2);
  CHECK(n.normality_distance < 0.015);
}

TEST_CASE("ensembles do not depend on the worker count") {
  EnsembleSpec spec;
  spec.params = MaserParams::from_alpha(1.5, 100.0, 0.15);
  spec.horizon = 1.0;
  spec.n_traj = 16;
  spec.seed = 4;
  auto f = [](const PathSummary& s, std::size_t) { return s.total(Channel::ground); };
  spec.workers = 1;
  const auto a = run_ensemble(spec, f);
  spec.workers = 4;
  CHECK(run_ensemble(spec, f) == a);
}

TEST_CASE("maximum likelihood lands within a few standard errors") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const double se = 1.0 / std::sqrt(100.0 * fisher_report(p).i_tot);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Trajectory t = simulate(p, 98, 100.0, 123, {.stream = s});
    const EstimateRecord r = mle(t);
    CHECK(r.method == "mle-full");
    CHECK(r.seed == 123);
    CHECK(std::abs(r.phi_hat - p.phi()) < 5.0 * se);
    const EstimateRecord q = mle(t, ObservedChannels::without_excited());
    CHECK(q.method == "mle-partial");
    CHECK(std::abs(q.phi_hat - p.phi()) < 0.02);
  }
}

TEST_CASE("maximum likelihood finds the global maximum on short paths") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const StationaryDistribution pi = stationary_distribution(p);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const PathSummary sum = simulate_summary(p, draw_initial_state(pi.probs, 1, s), 2.0, 1, {.stream = s});
    const double hat = mle_phi(sum, 100.0, 0.15, ObservedChannels::full());
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 40000; ++i) {
      best = std::max(best, loglik(sum, kDefaultBracketLo + (kDefaultBracketHi - kDefaultBracketLo) * i / 40000.0,
                                   100.0, 0.15));
    }
    CHECK(loglik(sum, hat, 100.0, 0.15) >= best - 1e-9 * std::abs(best));
  }
}
