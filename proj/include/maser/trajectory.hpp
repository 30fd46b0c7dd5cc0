#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "maser/model.hpp"

namespace maser {

struct JumpEvent {
  double time = 0.0;
  Channel channel = Channel::ground;
  std::int64_t state_after = 0;
};

struct Trajectory {
  MaserParams params{0.0, 1.0, 0.0};
  std::int64_t initial_state = 0;
  double start_time = 0.0;  ///< events live in [start_time, start_time + horizon]
  double horizon = 0.0;
  std::vector<JumpEvent> events;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  double end_time() const noexcept { return start_time + horizon; }
  std::int64_t final_state() const noexcept {
    return events.empty() ? initial_state : events.back().state_after;
  }
};

/// Sufficient statistics of a path: per photon number, the time spent there
/// and the number of jumps of each channel leaving it.
struct PathSummary {
  std::vector<std::array<std::uint64_t, 4>> counts;
  std::vector<double> occupation;
  std::array<std::uint64_t, 4> totals{};
  std::int64_t initial_state = 0;
  std::int64_t final_state = 0;
  double horizon = 0.0;

  std::uint64_t total(Channel c) const noexcept { return totals[static_cast<int>(c)]; }
};

struct SimulationOptions {
  std::uint64_t stream = 0;
  std::int64_t state_ceiling = 1'000'000;
};

/// Exact Gillespie simulation. Each event consumes one Philox block of the
/// dynamics sub-stream: words 0-1 give the holding time, words 2-3 the channel.
Trajectory simulate(const MaserParams& p, std::int64_t initial_state, double horizon,
                    std::uint64_t seed, const SimulationOptions& opts = {});

/// Same random path as simulate() with the same arguments, recorded only as
/// sufficient statistics.
PathSummary simulate_summary(const MaserParams& p, std::int64_t initial_state, double horizon,
                             std::uint64_t seed, const SimulationOptions& opts = {});

PathSummary summarize(const Trajectory& traj);

/// Inverse-CDF draw from a probability vector using the initial-state
/// sub-stream of (seed, stream).
std::int64_t draw_initial_state(std::span<const double> probs, std::uint64_t seed,
                                std::uint64_t stream);

/// Number of events in [t0, t1] whose channel is listed.
std::uint64_t count(const Trajectory& traj, std::span<const Channel> channels, double t0,
                    double t1);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Throws Error(parse_error) on malformed input.
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace maser
