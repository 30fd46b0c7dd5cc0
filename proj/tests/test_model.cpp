#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maser/errors.hpp"
#include "maser/model.hpp"

using namespace maser;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("parameter validation") {
  CHECK(code_of([] { MaserParams(0.1, 0.0, 0.1); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { MaserParams(0.1, 10.0, -0.1); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { MaserParams(-0.1, 10.0, 0.1); }) == ErrorCode::invalid_argument);
  const auto p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  CHECK(p.phi() == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(p.alpha() == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("channel names round trip") {
  for (Channel c : kAllChannels) CHECK(parse_channel(channel_name(c)) == c);
  CHECK(code_of([] { parse_channel("photon"); }) == ErrorCode::parse_error);
  CHECK(channel_step(Channel::ground) == 1);
  CHECK(channel_step(Channel::absorb) == 1);
  CHECK(channel_step(Channel::emit) == -1);
  CHECK(channel_step(Channel::excited) == 0);
}

TEST_CASE("rates add up to the total jump rate") {
  const MaserParams p(0.23, 100.0, 0.15);
  for (std::int64_t k : {0, 1, 7, 50, 300}) {
    const ChannelRates r = channel_rates(k, p);
    const double kd = static_cast<double>(k);
    CHECK(r.total() == doctest::Approx(100.0 + 1.15 * kd + 0.15 * (kd + 1.0)).epsilon(1e-14));
    const double theta = 0.23 * std::sqrt(kd + 1.0);
    CHECK(r.ground == doctest::Approx(100.0 * std::sin(theta) * std::sin(theta)));
    CHECK(r.excited == doctest::Approx(100.0 * std::cos(theta) * std::cos(theta)));
    CHECK(r.emit == doctest::Approx(1.15 * kd));
    CHECK(r.absorb == doctest::Approx(0.15 * (kd + 1.0)));
  }
}

TEST_CASE("phi derivatives of the rates match central differences") {
  const MaserParams p(0.31, 80.0, 0.2);
  const double h = 1e-5;
  for (std::int64_t k : {0, 3, 40}) {
    const ChannelRates up = channel_rates(k, p.with_phi(p.phi() + h));
    const ChannelRates dn = channel_rates(k, p.with_phi(p.phi() - h));
    const ChannelRates mid = channel_rates(k, p);
    const ChannelRates d1 = rate_phi_derivatives(k, p);
    const ChannelRates d2 = rate_phi_second_derivatives(k, p);
    for (Channel c : kAllChannels) {
      CHECK(d1[c] == doctest::Approx((up[c] - dn[c]) / (2 * h)).epsilon(1e-7));
      CHECK(d2[c] == doctest::Approx((up[c] - 2 * mid[c] + dn[c]) / (h * h)).epsilon(1e-4));
    }
  }
}

TEST_CASE("thermal limit is geometric") {
  const MaserParams p(0.0, 100.0, 0.15);
  const StationaryDistribution pi = stationary_distribution(p);
  const double b = 0.15 / 1.15;
  for (std::size_t n = 0; n < 20; ++n) {
    CHECK(pi.probs[n] == doctest::Approx((1 - b) * std::pow(b, n)).epsilon(1e-12));
  }
  CHECK(pi.mean_photon == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(pi.tail_bound < 1e-12);
}

TEST_CASE("stationary law satisfies detailed balance") {
  for (double alpha : {0.5, 1.5, 3.0, 6.5}) {
    const auto p = MaserParams::from_alpha(alpha, 100.0, 0.15);
    const StationaryDistribution pi = stationary_distribution(p);
    double total = 0.0;
    for (double q : pi.probs) total += q;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t k = 0; k + 1 < pi.probs.size(); ++k) {
      const double flow_up = pi.probs[k] * channel_rates(static_cast<std::int64_t>(k), p).up();
      const double flow_dn = pi.probs[k + 1] * channel_rates(static_cast<std::int64_t>(k + 1), p).down();
      CHECK(flow_up == doctest::Approx(flow_dn).epsilon(1e-10).scale(1e-300));
    }
  }
}

TEST_CASE("adaptive and fixed truncations agree") {
  const auto p = MaserParams::from_alpha(1.5, 100.0, 0.15);
  const StationaryDistribution a = stationary_distribution(p);
  const StationaryDistribution b = stationary_distribution_fixed(p, a.n_max);
  for (std::size_t k = 0; k < a.probs.size(); ++k) CHECK(a.probs[k] == doctest::Approx(b.probs[k]).epsilon(1e-14));
  CHECK(b.tail_bound < 1e-12);
  CHECK(a.mean_photon == doctest::Approx(98.8813).epsilon(1e-5));
}

TEST_CASE("truncation errors") {
  CHECK(code_of([] { stationary_distribution(MaserParams(0.0, 1.0, 1000.0)); }) == ErrorCode::truncation_failure);
  CHECK(code_of([] { stationary_distribution(MaserParams(0.1, 10.0, 0.1), 1e-3); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { stationary_distribution(MaserParams(0.1, 10.0, 0.1), 0.0); }) == ErrorCode::invalid_argument);
}
