#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "otafl/grid.hpp"

namespace otafl::sync {

enum class SyncMode { ptp_on, ptp_off };
enum class OffsetShape { uniform, truncated_gaussian };

std::string to_string(SyncMode mode);
SyncMode parse_sync_mode(const std::string& name);
std::string to_string(OffsetShape shape);
OffsetShape parse_offset_shape(const std::string& name);

struct SyncConfig {
  SyncMode mode = SyncMode::ptp_on;
  double ptp_bound = 1e-6;      // s
  std::size_t off_spread = 0;   // samples
  OffsetShape shape = OffsetShape::uniform;
  double phase_offset_std = 0.0;  // rad, optional static per-UE phase error
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const SyncConfig&) const = default;
};

/// Largest delay the configuration can produce at this sample rate.
std::size_t max_offset(const SyncConfig& cfg, double sample_rate);

/// Nonnegative integer delays, one per UE. ptp_on draws from
/// [0, ceil(ptp_bound * fs)], ptp_off from [0, off_spread].
/// truncated_gaussian uses |N(0, (max/2)^2)| clipped to the same support.
std::vector<std::size_t> draw_offsets(const SyncConfig& cfg, std::size_t num_ues, double sample_rate);

/// Static per-UE phase rotations (all zero unless phase_offset_std > 0).
std::vector<double> draw_phase_offsets(const SyncConfig& cfg, std::size_t num_ues);

struct UePeak {
  std::size_t ue_id = 0;
  std::size_t offset = 0;
  double metric = 0.0;
};

/// Correlation argmax per UE preamble.
std::vector<UePeak> peak_spread(const grid::TimeSignal& signal, const std::vector<std::vector<int>>& preambles);

/// max - min of the per-UE offsets.
std::size_t spread_of(const std::vector<UePeak>& peaks);

}  // namespace otafl::sync
