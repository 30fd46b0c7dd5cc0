#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "maser/errors.hpp"
#include "maser/rng.hpp"
#include "maser/spectral.hpp"
#include "maser/trajectory.hpp"

using namespace maser;

namespace {

double mean_and_se(const std::vector<double>& xs, double& se) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return m;
}

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
        PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("sub-streams are disjoint and unit_double stays in [0, 1)") {
  PhiloxStream a(5, 0, StreamPurpose::dynamics), b(5, 0, StreamPurpose::initial_state),
      c(5, 1, StreamPurpose::dynamics);
  CHECK(a.block(0) != b.block(0));
  CHECK(a.block(0) != c.block(0));
  CHECK(a.next() == a.block(0));
  CHECK(a.index() == 1);
  CHECK(unit_double(0u, 0u) == 0.0);
  CHECK(unit_double(~0u, ~0u) < 1.0);
}

TEST_CASE("zero horizon gives an empty path") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const Trajectory t = simulate(p, 7, 0.0, 1);
  CHECK(t.events.empty());
  CHECK(t.final_state() == 7);
  CHECK_THROWS_AS(simulate(p, -1, 1.0, 1), Error);
  CHECK_THROWS_AS(simulate(p, 0, -1.0, 1), Error);
}

TEST_CASE("phi = 0 and nu = 0: a Poisson stream of excited atoms") {
  const MaserParams p(0.0, 100.0, 0.0);
  std::vector<double> counts;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Trajectory t = simulate(p, 0, 10.0, 42, {.stream = s});
    for (const JumpEvent& e : t.events) {
      CHECK(e.channel == Channel::excited);
      CHECK(e.state_after == 0);
    }
    counts.push_back(static_cast<double>(t.events.size()));
  }
  double se = 0.0;
  const double m = mean_and_se(counts, se);
  CHECK(std::abs(m - 1000.0) < 4.0 * std::sqrt(1000.0 / 200.0));
}

TEST_CASE("simulation is a pure function of seed and stream") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const Trajectory a = simulate(p, 90, 5.0, 11, {.stream = 3});
  const Trajectory b = simulate(p, 90, 5.0, 11, {.stream = 3});
  const Trajectory c = simulate(p, 90, 5.0, 11, {.stream = 4});
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].time == b.events[i].time);
    CHECK(a.events[i].channel == b.events[i].channel);
  }
  CHECK((a.events.size() != c.events.size() || a.events.front().time != c.events.front().time));
}

TEST_CASE("summary path equals the summarised event path") {
  const MaserParams p = MaserParams::from_alpha(2.5, 100.0, 0.15);
  const Trajectory t = simulate(p, 20, 50.0, 9, {.stream = 2});
  const PathSummary a = summarize(t);
  const PathSummary b = simulate_summary(p, 20, 50.0, 9, {.stream = 2});
  CHECK(a.totals == b.totals);
  CHECK(a.final_state == b.final_state);
  REQUIRE(a.counts.size() == b.counts.size());
  for (std::size_t k = 0; k < a.counts.size(); ++k) {
    CHECK(a.counts[k] == b.counts[k]);
    CHECK(a.occupation[k] == doctest::Approx(b.occupation[k]).epsilon(1e-12));
  }
  double total_time = 0.0;
  for (double o : a.occupation) total_time += o;
  CHECK(total_time == doctest::Approx(50.0).epsilon(1e-12));
}

TEST_CASE("CSV round trip is exact") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  Trajectory t = simulate(p, 80, 2.0, 77, {.stream = 5});
  t.start_time = 1.25;
  for (JumpEvent& e : t.events) e.time += 1.25;
  std::stringstream ss;
  write_trajectory_csv(ss, t);
  const Trajectory r = read_trajectory_csv(ss);
  CHECK(r.params.phi() == p.phi());
  CHECK(r.params.n_ex() == p.n_ex());
  CHECK(r.params.nu() == p.nu());
  CHECK(r.initial_state == 80);
  CHECK(r.start_time == 1.25);
  CHECK(r.horizon == 2.0);
  CHECK(r.seed == 77);
  CHECK(r.stream == 5);
  REQUIRE(r.events.size() == t.events.size());
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    CHECK(r.events[i].time == t.events[i].time);
    CHECK(r.events[i].channel == t.events[i].channel);
    CHECK(r.events[i].state_after == t.events[i].state_after);
  }
}

TEST_CASE("malformed CSV is rejected") {
  auto code_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_trajectory_csv(in);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::invalid_argument;
  };
  const std::string head =
      "# phi=0.15\n# n_ex=100\n# nu=0.15\n# initial_state=5\n# start_time=0\n# horizon=1\n"
      "# seed=1\n# stream=0\ntime,channel,state_after\n";
  CHECK(code_of(head + "0.5,emit,5\n") == ErrorCode::parse_error);
  CHECK(code_of(head + "0.5,ground,6\n0.4,excited,6\n") == ErrorCode::parse_error);
  CHECK(code_of(head + "1.5,excited,5\n") == ErrorCode::parse_error);
  CHECK(code_of(head + "0.5,sideways,5\n") == ErrorCode::parse_error);
  CHECK(code_of("time,channel,state_after\n") == ErrorCode::parse_error);
  std::istringstream ok(head + "0.5,ground,6\n0.7,absorb,7\n0.8,excited,7\n");
  const Trajectory t = read_trajectory_csv(ok);
  CHECK(t.final_state() == 7);
}

TEST_CASE("count over windows") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const Trajectory t = simulate(p, 90, 4.0, 3);
  const std::vector<Channel> g{Channel::ground};
  const std::vector<Channel> all(kAllChannels.begin(), kAllChannels.end());
  CHECK(count(t, all, 0.0, 4.0) == t.events.size());
  CHECK(count(t, g, 0.0, 2.0) + count(t, g, std::nextafter(2.0, 3.0), 4.0) == count(t, g, 0.0, 4.0));
  CHECK_THROWS_AS(count(t, g, 3.0, 1.0), Error);
  CHECK(count(t, g, 0.0, 4.0) == summarize(t).total(Channel::ground));
}

TEST_CASE("state ceiling is enforced") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  try {
    simulate(p, 0, 100.0, 1, {.stream = 0, .state_ceiling = 10});
    FAIL("expected state_explosion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::state_explosion);
  }
}

TEST_CASE("time averages agree with the stationary law") {
  const MaserParams p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const StationaryDistribution pi = stationary_distribution(p);
  const double m = cumulant_derivatives(p, TiltVector::along(Channel::ground), pi.n_max).m;
  const double horizon = 100.0;
  std::vector<double> mean_n, ground_rate, low_mass;
  double pi_low = 0.0;
  for (std::size_t k = 0; k < 90 && k < pi.probs.size(); ++k) pi_low += pi.probs[k];
  for (std::uint64_t s = 0; s < 60; ++s) {
    const std::int64_t n0 = draw_initial_state(pi.probs, 2024, s);
    const PathSummary sum = simulate_summary(p, n0, horizon, 2024, {.stream = s});
    double n = 0.0, low = 0.0;
    for (std::size_t k = 0; k < sum.occupation.size(); ++k) {
      n += static_cast<double>(k) * sum.occupation[k];
      if (k < 90) low += sum.occupation[k];
    }
    mean_n.push_back(n / horizon);
    low_mass.push_back(low / horizon);
    ground_rate.push_back(static_cast<double>(sum.total(Channel::ground)) / horizon);
  }
  double se = 0.0;
  double est = mean_and_se(mean_n, se);
  CHECK(std::abs(est - pi.mean_photon) < 3.0 * se);
  est = mean_and_se(low_mass, se);
  CHECK(std::abs(est - pi_low) < 3.0 * se);
  est = mean_and_se(ground_rate, se);
  CHECK(std::abs(est - m) < 3.0 * se);
}
