#include "maser/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "maser/errors.hpp"
#include "maser/fisher.hpp"
#include "maser/spectral.hpp"

namespace maser {

std::string ObservedChannels::label() const {
  std::string s;
  auto add = [&](const char* name) {
    if (!s.empty()) s += '+';
    s += name;
  };
  if (merge_up) {
    add("up");
  } else {
    if (ground) add("ground");
    if (absorb) add("absorb");
  }
  if (excited) add("excited");
  if (emit) add("emit");
  return s;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_observable(const ObservedChannels& obs) {
  const bool up_known = obs.merge_up || (obs.ground && obs.absorb);
  if (!up_known || !obs.emit) {
    throw Error(ErrorCode::unsupported_observation,
                "every state-changing channel must be observed (or merged into the up label)");
  }
}

// One observed label: its rate and phi-derivatives at one level.
struct Label {
  std::uint64_t n;
  double r, d1, d2;
};

template <class F>
void for_each_label(const PathSummary& path, std::size_t k, double phi, double n_ex, double nu,
                    const ObservedChannels& obs, F&& f) {
  const MaserParams p(phi, n_ex, nu);
  const auto kk = static_cast<std::int64_t>(k);
  const ChannelRates r = channel_rates(kk, p);
  const ChannelRates d1 = rate_phi_derivatives(kk, p);
  const ChannelRates d2 = rate_phi_second_derivatives(kk, p);
  const auto& n = path.counts[k];
  auto cnt = [&](Channel c) { return n[static_cast<int>(c)]; };
  if (obs.merge_up) {
    f(Label{cnt(Channel::ground) + cnt(Channel::absorb), r.up(), d1.up(), d2.up()});
  } else {
    f(Label{cnt(Channel::ground), r.ground, d1.ground, d2.ground});
    f(Label{cnt(Channel::absorb), r.absorb, d1.absorb, d2.absorb});
  }
  if (obs.excited) f(Label{cnt(Channel::excited), r.excited, d1.excited, d2.excited});
  f(Label{cnt(Channel::emit), r.emit, d1.emit, d2.emit});
}

}  // namespace

double loglik(const PathSummary& path, double phi, double n_ex, double nu,
              const ObservedChannels& obs) {
  check_observable(obs);
  if (!(phi >= 0.0 && phi <= 3.14159265358979323846)) {
    throw Error(ErrorCode::invalid_argument, "candidate phi must lie in [0, pi]");
  }
  double acc = 0.0;
  bool impossible = false;
  for (std::size_t k = 0; k < path.occupation.size(); ++k) {
    const double tau = path.occupation[k];
    for_each_label(path, k, phi, n_ex, nu, obs, [&](const Label& l) {
      if (l.n > 0) {
        if (l.r <= 0.0) {
          impossible = true;
          return;
        }
        acc += static_cast<double>(l.n) * std::log(l.r);
      }
      acc -= tau * l.r;
    });
  }
  return impossible ? kNegInf : acc;
}

double loglik(const Trajectory& traj, double phi, const ObservedChannels& obs) {
  return loglik(summarize(traj), phi, traj.params.n_ex(), traj.params.nu(), obs);
}

std::pair<double, double> score_and_curvature(const PathSummary& path, double phi, double n_ex,
                                              double nu, const ObservedChannels& obs) {
  check_observable(obs);
  double s = 0.0, c = 0.0;
  for (std::size_t k = 0; k < path.occupation.size(); ++k) {
    const double tau = path.occupation[k];
    for_each_label(path, k, phi, n_ex, nu, obs, [&](const Label& l) {
      if (l.n > 0 && l.r > 0.0) {
        const double ratio = l.d1 / l.r;
        s += static_cast<double>(l.n) * ratio;
        c += static_cast<double>(l.n) * (l.d2 / l.r - ratio * ratio);
      }
      s -= tau * l.d1;
      c -= tau * l.d2;
    });
  }
  return {s, c};
}

double mle_phi(const PathSummary& path, double n_ex, double nu, const ObservedChannels& obs,
               double lo, double hi) {
  if (!(0.0 <= lo && lo < hi && hi <= 3.14159265358979323846)) {
    throw Error(ErrorCode::invalid_argument, "bracket must satisfy 0 <= lo < hi <= pi");
  }
  auto f = [&](double phi) { return loglik(path, phi, n_ex, nu, obs); };

  // The likelihood has several local maxima a few hundredths apart, so a
  // grid scan picks the candidates and golden section refines each one
  // between its grid neighbours.
  constexpr std::size_t kGrid = 2048;
  constexpr std::size_t kCandidates = 8;
  std::vector<double> xs(kGrid + 1), fs(kGrid + 1);
  for (std::size_t i = 0; i <= kGrid; ++i) {
    xs[i] = i == kGrid ? hi : lo + (hi - lo) * static_cast<double>(i) / kGrid;
    fs[i] = f(xs[i]);
  }
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i <= kGrid; ++i) {
    if (!std::isfinite(fs[i])) continue;
    const bool left_ok = i == 0 || fs[i] >= fs[i - 1];
    const bool right_ok = i == kGrid || fs[i] >= fs[i + 1];
    if (left_ok && right_ok) peaks.push_back(i);
  }
  if (peaks.empty()) {
    throw Error(ErrorCode::no_finite_likelihood, "log-likelihood is -inf on the whole bracket");
  }
  const std::size_t keep = std::min(kCandidates, peaks.size());
  std::partial_sort(peaks.begin(), peaks.begin() + static_cast<long>(keep), peaks.end(),
                    [&](std::size_t i, std::size_t j) { return fs[i] > fs[j]; });
  peaks.resize(keep);

  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double best_x = xs[peaks.front()], best_f = fs[peaks.front()];
  auto consider = [&](double x, double fx) {
    if (fx > best_f) {
      best_f = fx;
      best_x = x;
    }
  };
  for (std::size_t i : peaks) {
    double a = xs[i == 0 ? 0 : i - 1];
    double b = xs[i == kGrid ? kGrid : i + 1];
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-10) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + invphi * (b - a);
        fd = f(d);
      }
    }
    consider(c, fc);
    consider(d, fd);
  }
  // Newton polish on the score; only accepted while it stays in the bracket
  // and does not lower the likelihood.
  double x = best_x;
  for (int it = 0; it < 20; ++it) {
    const auto [s, c] = score_and_curvature(path, x, n_ex, nu, obs);
    if (!(c < 0.0)) break;
    const double next = x - s / c;
    if (!(next >= lo && next <= hi)) break;
    const double fn = f(next);
    if (!(fn >= best_f - 1e-9 * std::abs(best_f))) break;
    const double step = std::abs(next - x);
    x = next;
    best_f = std::max(best_f, fn);
    if (step < 1e-12) break;
  }
  return x;
}

EstimateRecord mle(const Trajectory& traj, const ObservedChannels& obs, double lo, double hi) {
  EstimateRecord rec;
  const bool full = obs.ground && obs.excited && obs.emit && obs.absorb && !obs.merge_up;
  rec.method = full ? "mle-full" : "mle-partial";
  rec.phi_hat = mle_phi(summarize(traj), traj.params.n_ex(), traj.params.nu(), obs, lo, hi);
  rec.phi_true = traj.params.phi();
  rec.t = traj.horizon;
  rec.channels_used = obs.label();
  rec.seed = traj.seed;
  return rec;
}

MomentDesign moment_design(const MaserParams& p0, Channel channel, double insensitivity_ratio) {
  if (channel != Channel::ground && channel != Channel::excited) {
    throw Error(ErrorCode::invalid_argument, "moment estimator uses ground or excited counts");
  }
  MomentDesign d;
  d.p0 = p0;
  d.channel = channel;
  d.n_max = stationary_distribution(p0).n_max;
  const TiltVector dir = TiltVector::along(channel);
  const CumulantRates c = cumulant_derivatives(p0, dir, d.n_max);
  d.m = c.m;
  d.v = c.v;
  d.mu = sensitivity(p0, dir, d.n_max);
  d.i_counts = d.v > 0.0 ? d.mu * d.mu / d.v : 0.0;
  double tot = 0.0;
  const StationaryDistribution pi = stationary_distribution_fixed(p0, d.n_max);
  for (std::size_t k = 0; k < pi.probs.size(); ++k) {
    tot += pi.probs[k] * 4.0 * p0.n_ex() * static_cast<double>(k + 1);
  }
  d.i_tot = tot;
  if (!(d.i_counts >= insensitivity_ratio * d.i_tot)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "count information " << d.i_counts << " is below " << insensitivity_ratio
        << " of the total " << d.i_tot << " at phi=" << p0.phi();
    throw Error(ErrorCode::insensitive_design_point, msg.str());
  }
  return d;
}

EstimateRecord moment_estimator(const MomentDesign& d, double count, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::invalid_argument, "horizon must be positive");
  EstimateRecord rec;
  rec.method = d.channel == Channel::ground ? "moment-ground" : "moment-excited";
  rec.phi_hat = d.p0.phi() + (count - t * d.m) / (t * d.mu);
  rec.phi_true = d.p0.phi();
  rec.t = t;
  rec.channels_used = std::string(channel_name(d.channel));
  return rec;
}

EnsembleStats ensemble_stats(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(ErrorCode::invalid_argument, "ensemble_stats needs at least two values");
  EnsembleStats st;
  st.n = n;
  const double nd = static_cast<double>(n);
  long double sum = 0.0L;
  for (double v : values) sum += v;
  st.mean = static_cast<double>(sum / nd);
  long double m2 = 0.0L, m3 = 0.0L, m4 = 0.0L;
  for (double v : values) {
    const long double d = v - st.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;
  st.variance = static_cast<double>(m2 * nd / (nd - 1.0));
  if (m2 > 0.0L) {
    const double g1 = static_cast<double>(m3 / std::pow(m2, 1.5L));
    const double g2 = static_cast<double>(m4 / (m2 * m2)) - 3.0;
    if (n > 2) st.skewness = std::sqrt(nd * (nd - 1.0)) / (nd - 2.0) * g1;
    if (n > 3) st.excess_kurtosis = (nd - 1.0) / ((nd - 2.0) * (nd - 3.0)) * ((nd + 1.0) * g2 + 6.0);
  }
  std::sort(values.begin(), values.end());
  const double sd = std::sqrt(st.variance);
  double dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double cdf;
    if (sd > 0.0) {
      cdf = 0.5 * std::erfc(-(values[i] - st.mean) / (sd * std::sqrt(2.0)));
    } else {
      cdf = values[i] < st.mean ? 0.0 : (values[i] > st.mean ? 1.0 : 0.5);
    }
    dist = std::max({dist, cdf - static_cast<double>(i) / nd,
                     static_cast<double>(i + 1) / nd - cdf});
  }
  st.normality_distance = dist;
  return st;
}

}  // namespace maser
