#pragma once

#include <optional>
#include <vector>

#include "maser/generators.hpp"
#include "maser/model.hpp"

namespace maser {

struct FisherReport {
  double phi = 0.0;
  double alpha = 0.0;
  double i_cav = 0.0;  ///< cavity path alone
  double i_up = 0.0;   ///< added by telling atom jumps from bath jumps
  double i_exc = 0.0;  ///< added by the excited-atom counts
  double i_tot = 0.0;
  double qfi = 0.0;    ///< 4 n_ex <N + 1>
  double identity_residual = 0.0;
  double summand_residual = 0.0;  ///< worst per-level relative defect before summation
  double i_gr = 0.0;
  double i_ex_counts = 0.0;
  double i_joint = 0.0;
  double gap = 0.0;
  std::size_t n_max = 0;
};

/// The per-level terms of the three path informations at photon number k.
struct FisherSummands {
  double cav = 0.0;
  double up = 0.0;
  double exc = 0.0;
};
FisherSummands fisher_summands(std::int64_t k, const MaserParams& p);

FisherReport fisher_report(const MaserParams& p, double tail_tol = kDefaultTailTol);

/// Information of the total counts of one channel (mu^2 / V) or of the ground
/// and excited totals together (mu^T Sigma^-1 mu). Channels must be drawn from
/// {ground, excited}.
double counting_fisher(const MaserParams& p, const std::vector<Channel>& channels,
                       std::size_t n_max);
double counting_fisher(const MaserParams& p, const std::vector<Channel>& channels);

/// <init| exp(t L_{u,v}) 1 > for the diagonal restriction of the two-point
/// generator. init defaults to the stationary law at phi0.
/// log of the overlap; usable when the overlap itself underflows.
double lan_log_overlap(const MaserParams& p0, double u, double v, double t, std::size_t n_max,
                       std::optional<std::vector<double>> initial = std::nullopt);
double lan_overlap(const MaserParams& p0, double u, double v, double t, std::size_t n_max,
                   std::optional<std::vector<double>> initial = std::nullopt);
double lan_overlap(const MaserParams& p0, double u, double v, double t);

struct LanPoint {
  double u = 0.0;
  double v = 0.0;
  double overlap = 0.0;
  double neglog = 0.0;
};
struct LanFit {
  std::vector<LanPoint> points;
  double c = 0.0;         ///< least-squares slope of -log overlap against (u - v)^2
  double residual = 0.0;  ///< largest relative misfit over the points
  double qfi = 0.0;
};
/// Fits -log overlap = c (u - v)^2 using symmetric pairs u = d/2, v = -d/2.
LanFit fit_lan_constant(const MaserParams& p0, double t, const std::vector<double>& separations,
                        std::optional<std::vector<double>> initial = std::nullopt);

}  // namespace maser
