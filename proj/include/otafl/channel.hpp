#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "otafl/common.hpp"
#include "otafl/grid.hpp"

namespace otafl::channel {

enum class ChannelKind { ideal, flat_block, rayleigh_per_subcarrier, pathloss_fading };

std::string to_string(ChannelKind kind);
ChannelKind parse_channel_kind(const std::string& name);

struct ChannelModel {
  ChannelKind kind = ChannelKind::ideal;
  double pathloss_exponent = 3.0;
  double reference_distance = 1.0;  // m
  double carrier = 3.5e9;           // Hz

  void validate() const;
  bool operator==(const ChannelModel&) const = default;
};

struct LinkBudget {
  double tx_power_dbm = 20.0;
  double distance = 20.0;  // m
  double noise_psd_dbm_hz = -174.0;
  double bandwidth = 3.84e6;  // Hz

  void validate() const;
  bool operator==(const LinkBudget&) const = default;
};

struct ChannelRealization {
  CVector gains;  // one per subcarrier
  double noise_variance = 0.0;
  std::size_t ue_id = 0;
};

/// Thermal noise power in watts: 10^(psd_dBm/10) mW/Hz times bandwidth.
double thermal_noise_watts(const LinkBudget& budget);

/// Log-distance path loss in dB, free space up to the reference distance.
double pathloss_db(const ChannelModel& model, double distance);

/// Mean receive SNR in dB implied by the budget and path loss.
double mean_receive_snr_db(const ChannelModel& model, const LinkBudget& budget);

ChannelRealization realize_channel(const ChannelModel& model, const LinkBudget& budget,
                                   std::size_t subcarriers, std::uint64_t seed,
                                   std::size_t ue_id = 0);

/// Mixes in an independent draw: sqrt(1-rho) * ch + sqrt(rho) * fresh.
/// rho = 0 returns the input unchanged (coherent CSI), rho = 1 an independent
/// channel of the same model.
ChannelRealization decorrelate(const ChannelRealization& ch, const ChannelModel& model,
                               const LinkBudget& budget, double rho, std::uint64_t seed);

/// Y = X * H per subcarrier (same gain for every symbol row) plus
/// CN(0, noise_variance) per element.
grid::ResourceGrid apply_channel(const grid::ResourceGrid& grid, const ChannelRealization& ch,
                                 std::uint64_t seed);

/// Grid-free variant of apply_channel for a single row (e.g. a pilot symbol).
CVector apply_channel_row(std::span<const Complex> row, const ChannelRealization& ch,
                          std::uint64_t seed);

struct DelayedSignal {
  grid::TimeSignal signal;
  std::size_t delay = 0;
};

/// Sample-wise sum of delayed signals plus CN(0, noise_variance) per sample.
grid::TimeSignal superpose(const std::vector<DelayedSignal>& signals, double noise_variance,
                           std::uint64_t seed);

}  // namespace otafl::channel
