#include "maser/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "maser/errors.hpp"
#include "maser/spectral.hpp"

namespace maser {

FisherSummands fisher_summands(std::int64_t k, const MaserParams& p) {
  const double theta = p.phi() * std::sqrt(static_cast<double>(k + 1));
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double level = 4.0 * p.n_ex() * static_cast<double>(k + 1);
  const double r_a = p.n_ex() * s * s;
  const double r_b = p.nu() * static_cast<double>(k + 1);
  const double q = r_a + r_b;
  FisherSummands out;
  if (q > 0.0) {
    out.cav = level * c * c * (r_a / q);
    out.up = level * c * c * (r_b / q);
  } else {
    out.cav = level * c * c;
  }
  out.exc = level * s * s;
  return out;
}

FisherReport fisher_report(const MaserParams& p, double tail_tol) {
  const StationaryDistribution pi = stationary_distribution(p, tail_tol);
  FisherReport r;
  r.phi = p.phi();
  r.alpha = p.alpha();
  r.n_max = pi.n_max;
  double mean_level = 0.0;
  for (std::size_t k = 0; k < pi.probs.size(); ++k) {
    const auto kk = static_cast<std::int64_t>(k);
    const FisherSummands f = fisher_summands(kk, p);
    const double level = 4.0 * p.n_ex() * static_cast<double>(k + 1);
    r.summand_residual =
        std::max(r.summand_residual, std::abs(f.cav + f.up + f.exc - level) / level);
    r.i_cav += pi.probs[k] * f.cav;
    r.i_up += pi.probs[k] * f.up;
    r.i_exc += pi.probs[k] * f.exc;
    mean_level += pi.probs[k] * static_cast<double>(k + 1);
  }
  if (r.summand_residual > 1e-13) {
    std::ostringstream msg;
    msg << "per-level information identity violated by " << r.summand_residual;
    throw Error(ErrorCode::convergence_failure, msg.str());
  }
  r.i_tot = r.i_cav + r.i_up + r.i_exc;
  r.qfi = 4.0 * p.n_ex() * mean_level;
  r.identity_residual = std::abs(r.i_tot - r.qfi) / r.qfi;

  const std::vector<double> top = top_eigenvalues(markov_generator(p, pi.n_max), 2);
  r.gap = top.size() > 1 ? top[0] - top[1] : 0.0;
  r.i_gr = counting_fisher(p, {Channel::ground}, pi.n_max);
  r.i_ex_counts = counting_fisher(p, {Channel::excited}, pi.n_max);
  r.i_joint = counting_fisher(p, {Channel::ground, Channel::excited}, pi.n_max);
  return r;
}

namespace {

double checked_sensitivity(const MaserParams& p, const TiltVector& dir, std::size_t n_max) {
  const double mu = sensitivity(p, dir, n_max);
  const double mu_diff = sensitivity_by_differencing(p, dir, n_max);
  const double floor = 1e-8 * p.n_ex() * std::sqrt(p.n_ex());
  if (std::abs(mu - mu_diff) > 1e-5 * std::max(std::abs(mu), std::abs(mu_diff)) + floor) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "sensitivity " << mu << " vs differenced " << mu_diff << " at phi=" << p.phi();
    throw Error(ErrorCode::route_disagreement, msg.str());
  }
  return mu;
}

}  // namespace

double counting_fisher(const MaserParams& p, const std::vector<Channel>& channels,
                       std::size_t n_max) {
  if (channels.empty() || channels.size() > 2) {
    throw Error(ErrorCode::invalid_argument, "counting_fisher needs one or two channels");
  }
  for (Channel c : channels) {
    if (c != Channel::ground && c != Channel::excited) {
      throw Error(ErrorCode::invalid_argument, "counting_fisher supports ground and excited counts");
    }
  }
  // A channel whose count has zero variance never fires (e.g. ground atoms at
  // phi = 0) and carries no information; it is dropped from the quadratic form.
  std::vector<TiltVector> dirs;
  std::vector<double> mus, vars;
  for (Channel c : channels) {
    const TiltVector dir = TiltVector::along(c);
    if (!dirs.empty() && dir[c] == dirs.front()[c]) continue;
    const double mu = checked_sensitivity(p, dir, n_max);
    const double v = cumulant_derivatives(p, dir, n_max).v;
    if (v > 1e-14 * p.n_ex()) {
      dirs.push_back(dir);
      mus.push_back(mu);
      vars.push_back(v);
    } else if (std::abs(mu) > 1e-8 * p.n_ex() * std::sqrt(p.n_ex())) {
      throw Error(ErrorCode::singular_covariance, "count variance vanishes at non-zero sensitivity");
    }
  }
  if (dirs.empty()) return 0.0;
  if (dirs.size() == 1) return mus[0] * mus[0] / vars[0];
  const double v_sum = cumulant_derivatives(p, dirs[0] + dirs[1], n_max).v;
  const double cov = 0.5 * (v_sum - vars[0] - vars[1]);
  const double det = vars[0] * vars[1] - cov * cov;
  if (!(det > 1e-12 * vars[0] * vars[1])) {
    std::ostringstream msg;
    msg << "joint count covariance is singular (det " << det << ")";
    throw Error(ErrorCode::singular_covariance, msg.str());
  }
  return (vars[1] * mus[0] * mus[0] - 2.0 * cov * mus[0] * mus[1] + vars[0] * mus[1] * mus[1]) / det;
}

double counting_fisher(const MaserParams& p, const std::vector<Channel>& channels) {
  return counting_fisher(p, channels, stationary_distribution(p).n_max);
}

double lan_log_overlap(const MaserParams& p0, double u, double v, double t, std::size_t n_max,
                       std::optional<std::vector<double>> initial) {
  if (!(t > 0.0)) throw Error(ErrorCode::invalid_argument, "time must be positive");
  const TridiagonalOperator gen = two_point_generator(p0, u, v, t, n_max);
  std::vector<double> init;
  if (initial) {
    init = std::move(*initial);
    if (init.size() != n_max + 1) throw Error(ErrorCode::invalid_argument, "initial law has the wrong dimension");
  } else {
    init = stationary_distribution_fixed(p0, n_max).probs;
  }
  return log_expm_contract(gen, t, std::vector<double>(n_max + 1, 1.0), init);
}

double lan_overlap(const MaserParams& p0, double u, double v, double t, std::size_t n_max,
                   std::optional<std::vector<double>> initial) {
  return std::exp(lan_log_overlap(p0, u, v, t, n_max, std::move(initial)));
}

double lan_overlap(const MaserParams& p0, double u, double v, double t) {
  return lan_overlap(p0, u, v, t, stationary_distribution(p0).n_max);
}

LanFit fit_lan_constant(const MaserParams& p0, double t, const std::vector<double>& separations,
                        std::optional<std::vector<double>> initial) {
  if (separations.empty()) throw Error(ErrorCode::invalid_argument, "no separations to fit");
  const StationaryDistribution pi = stationary_distribution(p0);
  LanFit fit;
  double sxy = 0.0, sxx = 0.0;
  for (double d : separations) {
    LanPoint pt;
    pt.u = 0.5 * d;
    pt.v = -0.5 * d;
    pt.neglog = -lan_log_overlap(p0, pt.u, pt.v, t, pi.n_max, initial);
    pt.overlap = std::exp(-pt.neglog);
    const double x = d * d;
    sxy += x * pt.neglog;
    sxx += x * x;
    fit.points.push_back(pt);
  }
  fit.c = sxy / sxx;
  for (const LanPoint& pt : fit.points) {
    const double model = fit.c * (pt.u - pt.v) * (pt.u - pt.v);
    fit.residual = std::max(fit.residual, std::abs(pt.neglog - model) / model);
  }
  double mean_level = 0.0;
  for (std::size_t k = 0; k < pi.probs.size(); ++k) mean_level += pi.probs[k] * static_cast<double>(k + 1);
  fit.qfi = 4.0 * p0.n_ex() * mean_level;
  return fit;
}

}  // namespace maser
