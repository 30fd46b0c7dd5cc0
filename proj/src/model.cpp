#include "maser/model.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "maser/errors.hpp"

namespace maser {

MaserParams::MaserParams(double phi, double n_ex, double nu) : phi_(phi), n_ex_(n_ex), nu_(nu) {
  if (!(std::isfinite(phi) && std::isfinite(n_ex) && std::isfinite(nu))) {
    throw Error(ErrorCode::invalid_argument, "maser parameters must be finite");
  }
  if (!(n_ex > 0.0)) throw Error(ErrorCode::invalid_argument, "n_ex must be positive");
  if (nu < 0.0) throw Error(ErrorCode::invalid_argument, "nu must be non-negative");
  if (phi < 0.0) throw Error(ErrorCode::invalid_argument, "phi must be non-negative");
}

MaserParams MaserParams::from_alpha(double alpha, double n_ex, double nu) {
  if (!(n_ex > 0.0)) throw Error(ErrorCode::invalid_argument, "n_ex must be positive");
  return MaserParams(alpha / std::sqrt(n_ex), n_ex, nu);
}

std::string_view channel_name(Channel c) noexcept {
  switch (c) {
    case Channel::ground: return "ground";
    case Channel::excited: return "excited";
    case Channel::emit: return "emit";
    case Channel::absorb: return "absorb";
  }
  return "?";
}

Channel parse_channel(std::string_view name) {
  for (Channel c : kAllChannels) {
    if (channel_name(c) == name) return c;
  }
  throw Error(ErrorCode::parse_error, "unknown channel '" + std::string(name) + "'");
}

double ChannelRates::operator[](Channel c) const noexcept {
  switch (c) {
    case Channel::ground: return ground;
    case Channel::excited: return excited;
    case Channel::emit: return emit;
    case Channel::absorb: return absorb;
  }
  return 0.0;
}

ChannelRates channel_rates(std::int64_t k, const MaserParams& p) {
  const double kk = static_cast<double>(k);
  const double theta = p.phi() * std::sqrt(kk + 1.0);
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  ChannelRates r;
  r.ground = p.n_ex() * (s * s);
  r.excited = p.n_ex() * (c * c);
  r.emit = (p.nu() + 1.0) * kk;
  r.absorb = p.nu() * (kk + 1.0);
  return r;
}

ChannelRates rate_phi_derivatives(std::int64_t k, const MaserParams& p) {
  const double root = std::sqrt(static_cast<double>(k) + 1.0);
  const double d = p.n_ex() * root * std::sin(2.0 * p.phi() * root);
  return ChannelRates{d, -d, 0.0, 0.0};
}

ChannelRates rate_phi_second_derivatives(std::int64_t k, const MaserParams& p) {
  const double kk1 = static_cast<double>(k) + 1.0;
  const double d2 = 2.0 * p.n_ex() * kk1 * std::cos(2.0 * p.phi() * std::sqrt(kk1));
  return ChannelRates{d2, -d2, 0.0, 0.0};
}

double stationary_factor(std::int64_t n, const MaserParams& p) {
  const double nn = static_cast<double>(n);
  const double s = std::sin(p.phi() * std::sqrt(nn));
  return p.nu() / (p.nu() + 1.0) + (p.n_ex() / (p.nu() + 1.0)) * (s * s) / nn;
}

double StationaryDistribution::expectation(std::span<const double> f) const {
  const std::size_t n = std::min(f.size(), probs.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += probs[k] * f[k];
  return acc;
}

namespace {

// Upper bound on stationary_factor(k) valid for every k' >= k.
double factor_bound(std::size_t k, const MaserParams& p) {
  return p.nu() / (p.nu() + 1.0) + p.n_ex() / ((p.nu() + 1.0) * static_cast<double>(k));
}

StationaryDistribution normalize(std::vector<double> log_w, double tail_bound) {
  const double log_max = *std::max_element(log_w.begin(), log_w.end());
  StationaryDistribution out;
  out.probs.resize(log_w.size());
  for (std::size_t k = 0; k < log_w.size(); ++k) out.probs[k] = std::exp(log_w[k] - log_max);
  const double total = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
  double mean = 0.0;
  for (std::size_t k = 0; k < out.probs.size(); ++k) {
    out.probs[k] /= total;
    mean += static_cast<double>(k) * out.probs[k];
  }
  out.n_max = out.probs.size() - 1;
  out.tail_bound = tail_bound;
  out.mean_photon = mean;
  return out;
}

}  // namespace

StationaryDistribution stationary_distribution(const MaserParams& p, double tail_tol,
                                               std::size_t hard_cap) {
  if (!(tail_tol > 0.0 && tail_tol <= 1e-6)) {
    throw Error(ErrorCode::invalid_argument, "tail_tol must lie in (0, 1e-6]");
  }
  if (hard_cap < 1) throw Error(ErrorCode::invalid_argument, "hard_cap must be >= 1");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_w{0.0};
  double log_max = 0.0;
  for (std::size_t n = 1; n <= hard_cap; ++n) {
    const double f = stationary_factor(static_cast<std::int64_t>(n), p);
    if (f == 0.0) {
      // Birth rate into n vanishes: nothing above n-1 is reachable.
      log_w.push_back(kNegInf);
      return normalize(std::move(log_w), 0.0);
    }
    log_w.push_back(log_w.back() + std::log(f));
    log_max = std::max(log_max, log_w.back());

    const double b = factor_bound(n + 1, p);
    if (b < 1.0) {
      const double bound = std::exp(log_w.back() - log_max) * b / (1.0 - b);
      if (bound < tail_tol) return normalize(std::move(log_w), bound);
    }
  }
  std::ostringstream msg;
  msg << "tail bound not met below n_max=" << hard_cap << " (phi=" << p.phi()
      << ", n_ex=" << p.n_ex() << ", nu=" << p.nu() << ")";
  throw Error(ErrorCode::truncation_failure, msg.str());
}

StationaryDistribution stationary_distribution_fixed(const MaserParams& p, std::size_t n_max) {
  if (n_max < 1) throw Error(ErrorCode::invalid_argument, "n_max must be >= 1");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_w{0.0};
  log_w.reserve(n_max + 1);
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double f = stationary_factor(static_cast<std::int64_t>(n), p);
    log_w.push_back(f == 0.0 ? kNegInf : log_w.back() + std::log(f));
  }
  const double log_max = *std::max_element(log_w.begin(), log_w.end());
  const double b = factor_bound(n_max + 1, p);
  const double tail = b < 1.0 ? std::exp(log_w.back() - log_max) * b / (1.0 - b)
                              : std::numeric_limits<double>::infinity();
  return normalize(std::move(log_w), tail);
}

}  // namespace maser
