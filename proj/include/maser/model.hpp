#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace maser {

/// Physical parameters of the coarse-grained atom maser.
///
/// phi is the accumulated Rabi angle, n_ex the number of atoms per cavity
/// lifetime and nu the mean thermal photon number of the bath. The pump-scaled
/// coordinate alpha = phi * sqrt(n_ex) is always derived, never stored.
class MaserParams {
 public:
  /// Throws Error(invalid_argument) unless n_ex > 0, nu >= 0, phi >= 0.
  MaserParams(double phi, double n_ex, double nu);

  static MaserParams from_alpha(double alpha, double n_ex, double nu);

  double phi() const noexcept { return phi_; }
  double n_ex() const noexcept { return n_ex_; }
  double nu() const noexcept { return nu_; }
  double alpha() const noexcept { return phi_ * std::sqrt(n_ex_); }

  MaserParams with_phi(double phi) const { return MaserParams(phi, n_ex_, nu_); }

 private:
  double phi_;
  double n_ex_;
  double nu_;
};

enum class Channel : std::uint8_t { ground = 0, excited = 1, emit = 2, absorb = 3 };

inline constexpr std::array<Channel, 4> kAllChannels = {Channel::ground, Channel::excited,
                                                       Channel::emit, Channel::absorb};

std::string_view channel_name(Channel c) noexcept;
/// Throws Error(parse_error) on an unknown name.
Channel parse_channel(std::string_view name);

/// Photon-number change caused by an event of the channel.
constexpr int channel_step(Channel c) noexcept {
  switch (c) {
    case Channel::ground: return +1;
    case Channel::absorb: return +1;
    case Channel::emit: return -1;
    case Channel::excited: return 0;
  }
  return 0;
}

/// Per-channel jump rates at one photon number (or their phi-derivatives).
struct ChannelRates {
  double ground = 0.0;   ///< ground-state atom leaves, cavity gains a photon
  double excited = 0.0;  ///< excited atom leaves, cavity unchanged
  double emit = 0.0;     ///< photon lost to the bath
  double absorb = 0.0;   ///< photon absorbed from the bath

  double up() const noexcept { return ground + absorb; }
  double down() const noexcept { return emit; }
  double total() const noexcept { return ground + excited + emit + absorb; }
  double operator[](Channel c) const noexcept;
};

ChannelRates channel_rates(std::int64_t k, const MaserParams& p);
ChannelRates rate_phi_derivatives(std::int64_t k, const MaserParams& p);
ChannelRates rate_phi_second_derivatives(std::int64_t k, const MaserParams& p);

/// Ratio rho(n)/rho(n-1) of consecutive stationary probabilities, n >= 1.
double stationary_factor(std::int64_t n, const MaserParams& p);

struct StationaryDistribution {
  std::vector<double> probs;  ///< indexed by photon number 0..n_max
  std::size_t n_max = 0;
  double tail_bound = 0.0;  ///< upper bound on the probability mass above n_max
  double mean_photon = 0.0;

  double expectation(std::span<const double> f) const;
};

inline constexpr double kDefaultTailTol = 1e-12;
inline constexpr std::size_t kDefaultHardCap = 4096;

/// Closed-form stationary law, truncated at the first level where the
/// geometric tail bound drops below tail_tol. Throws truncation_failure when
/// hard_cap is reached first.
StationaryDistribution stationary_distribution(const MaserParams& p,
                                               double tail_tol = kDefaultTailTol,
                                               std::size_t hard_cap = kDefaultHardCap);

/// Same law on a prescribed truncation level (used when several parameter
/// points must share one state space, e.g. for differencing in phi).
StationaryDistribution stationary_distribution_fixed(const MaserParams& p, std::size_t n_max);

}  // namespace maser
