#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "maser/generators.hpp"
#include "maser/model.hpp"

namespace maser {

/// Perron root of an irreducible Metzler tridiagonal matrix with its positive
/// eigenvectors. left_vec sums to one and left_vec . right_vec = 1.
struct PerronTriple {
  double eigenvalue = 0.0;
  std::vector<double> right_vec;
  std::vector<double> left_vec;
  /// Distance to the next eigenvalue (all eigenvalues are real here).
  double gap = 0.0;
};

struct EigOptions {
  int max_iterations = 200;
};

PerronTriple dominant_eig(const TridiagonalOperator& t, const EigOptions& opts = {});
/// Same, for an operator given in row-sum form. When the form was built with
/// accurate row sums, the eigenvalue keeps relative accuracy even when it is
/// tiny compared with the matrix entries.
PerronTriple dominant_eig(const RowSumForm& form, const EigOptions& opts = {});

/// The `count` largest eigenvalues of t, in decreasing order (Sturm bisection;
/// requires sub[i]*sup[i] >= 0 for all i).
std::vector<double> top_eigenvalues(const TridiagonalOperator& t, std::size_t count);

/// Solves Q y = x with pi . y = 0 for a tridiagonal generator Q with stationary
/// law pi. Throws singular_system when pi . x is not zero.
std::vector<double> drazin_solve(const TridiagonalOperator& q, std::span<const double> x,
                                 const StationaryDistribution& pi);

struct ExpmOptions {
  double poisson_tail = 1e-14;
  /// Largest uniformization rate * substep handled in one Poisson sum.
  double max_step_mass = 400.0;
  double max_substeps = 1e9;
};

/// y = exp(tau T) x by uniformization with substepping.
std::vector<double> expm_apply(const TridiagonalOperator& t, double tau, std::span<const double> x,
                               const ExpmOptions& opts = {});

/// log(w . exp(tau T) x) for non-negative w and x. The propagated vector is
/// renormalised after every substep, so the value stays finite when the
/// contraction itself would underflow or overflow.
double log_expm_contract(const TridiagonalOperator& t, double tau, std::span<const double> x,
                         std::span<const double> w, const ExpmOptions& opts = {});

/// Mean and variance rates of the counts along one tilt direction.
struct CumulantRates {
  double m = 0.0;  ///< mean count rate, dr/ds at 0
  double v = 0.0;  ///< variance rate, d2r/ds2 at 0
  double m_eig = 0.0, v_eig = 0.0;        ///< extrapolated differences of r(s)
  double m_drazin = 0.0, v_drazin = 0.0;  ///< perturbation formula
  double step = 0.0;                      ///< largest finite-difference step used
  double extrapolation_spread = 0.0;
};

inline constexpr double kRouteTolerance = 1e-6;

/// Computes both routes and throws route_disagreement if they differ by more
/// than kRouteTolerance (relative). The reported m, v are the perturbation values.
CumulantRates cumulant_derivatives(const MaserParams& p, const TiltVector& direction,
                                   std::size_t n_max);

/// r(s) = Perron root of the tilted generator, from the accurate row-sum form.
double scgf(const MaserParams& p, std::size_t n_max, const TiltVector& tilt);

/// Sensitivity dm/dphi of the mean count rate along `direction`, from the
/// exact mixed derivative  pi C' 1 - pi Q' g,  Q g = C1 - m.
double sensitivity(const MaserParams& p, const TiltVector& direction, std::size_t n_max);

/// Same quantity by Richardson-extrapolated central differences in phi of
/// the stationary mean rate on a fixed truncation.
double sensitivity_by_differencing(const MaserParams& p, const TiltVector& direction,
                                   std::size_t n_max);

/// Limit of the centred log-MGF  log E exp(s (Lambda_t - t m(phi0)) / sqrt(t))
/// under phi0 + u/sqrt(t), from second-order perturbation of the generator:
/// s mu u + s^2 V / 2.
double davies_limit(const MaserParams& p0, double s, double u, const TiltVector& direction,
                    std::size_t n_max);

/// The same log-MGF at finite t through the exponential action. The initial
/// law defaults to the stationary distribution at phi0.
double finite_time_log_mgf(const MaserParams& p0, double s, double u, double t,
                           const TiltVector& direction, std::size_t n_max,
                           std::optional<std::vector<double>> initial = std::nullopt,
                           const ExpmOptions& opts = {});

}  // namespace maser
