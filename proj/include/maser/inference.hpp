#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "maser/model.hpp"
#include "maser/parallel.hpp"
#include "maser/rng.hpp"
#include "maser/trajectory.hpp"

namespace maser {

/// Which detectors were read out. With merge_up the ground and absorb jumps
/// are seen as one unlabelled "cavity gained a photon" event.
struct ObservedChannels {
  bool ground = true;
  bool excited = true;
  bool emit = true;
  bool absorb = true;
  bool merge_up = false;

  static ObservedChannels full() { return {}; }
  static ObservedChannels without_excited() { return {true, false, true, true, false}; }
  static ObservedChannels cavity_only() { return {true, false, true, true, true}; }
  std::string label() const;
};

/// Log-likelihood of the observed marks given phi, from sufficient statistics.
/// Returns -infinity when an observed event has zero rate. Throws
/// unsupported_observation if a state-changing channel is not observed.
double loglik(const PathSummary& path, double phi, double n_ex, double nu,
              const ObservedChannels& obs = ObservedChannels::full());
double loglik(const Trajectory& traj, double phi,
              const ObservedChannels& obs = ObservedChannels::full());

/// First and second phi-derivatives of loglik.
std::pair<double, double> score_and_curvature(const PathSummary& path, double phi, double n_ex,
                                              double nu, const ObservedChannels& obs);

struct EstimateRecord {
  std::string method;  ///< mle-full, mle-partial, moment-ground, moment-excited
  double phi_hat = 0.0;
  double phi_true = 0.0;
  double t = 0.0;
  std::string channels_used;
  std::uint64_t seed = 0;
};

inline constexpr double kDefaultBracketLo = 0.01;
inline constexpr double kDefaultBracketHi = 3.14159265358979323846 - 0.01;

/// Grid scan of 2049 points, golden section around the 8 highest grid
/// maxima, then a Newton polish. Throws no_finite_likelihood when loglik is
/// -infinity on the whole bracket.
double mle_phi(const PathSummary& path, double n_ex, double nu, const ObservedChannels& obs,
               double lo = kDefaultBracketLo, double hi = kDefaultBracketHi);
EstimateRecord mle(const Trajectory& traj, const ObservedChannels& obs = ObservedChannels::full(),
                   double lo = kDefaultBracketLo, double hi = kDefaultBracketHi);

/// Cached design quantities of the count-based estimator at phi0.
struct MomentDesign {
  MaserParams p0{0.0, 1.0, 0.0};
  Channel channel = Channel::ground;
  std::size_t n_max = 0;
  double m = 0.0;    ///< mean count rate
  double mu = 0.0;   ///< dm/dphi
  double v = 0.0;    ///< variance rate
  double i_counts = 0.0;
  double i_tot = 0.0;
};

/// Relative information below which a design point is rejected.
inline constexpr double kInsensitivityRatio = 1e-3;

/// Throws insensitive_design_point when mu^2/V < kInsensitivityRatio * I_tot.
MomentDesign moment_design(const MaserParams& p0, Channel channel,
                           double insensitivity_ratio = kInsensitivityRatio);
/// phi0 + (count - t m) / (t mu).
EstimateRecord moment_estimator(const MomentDesign& d, double count, double t);

struct EnsembleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;         ///< adjusted Fisher-Pearson G1
  double excess_kurtosis = 0.0;  ///< unbiased G2
  double normality_distance = 0.0;  ///< sup |ECDF - fitted normal CDF|
};
EnsembleStats ensemble_stats(std::vector<double> values);

/// Ensemble of independent trajectories. Member i uses Philox stream i of the
/// seed; with stationary_start its initial photon number is drawn from the
/// stationary law at the generating parameters.
struct EnsembleSpec {
  MaserParams params{0.0, 1.0, 0.0};
  double horizon = 0.0;
  std::size_t n_traj = 0;
  std::uint64_t seed = 0;
  bool stationary_start = true;
  std::int64_t initial_state = 0;
  unsigned workers = default_workers();
};

/// Runs f(summary, index) for every member and returns the results in index
/// order, independent of scheduling.
template <class F>
auto run_ensemble(const EnsembleSpec& spec, F&& f) {
  using Result = decltype(f(std::declval<const PathSummary&>(), std::size_t{}));
  std::vector<Result> out(spec.n_traj);
  std::vector<double> probs;
  if (spec.stationary_start) probs = stationary_distribution(spec.params).probs;
  parallel_for(spec.n_traj, spec.workers, [&](std::size_t i) {
    const std::int64_t k0 =
        spec.stationary_start ? draw_initial_state(probs, spec.seed, i) : spec.initial_state;
    SimulationOptions opts;
    opts.stream = i;
    const PathSummary path = simulate_summary(spec.params, k0, spec.horizon, spec.seed, opts);
    out[i] = f(path, i);
  });
  return out;
}

}  // namespace maser
