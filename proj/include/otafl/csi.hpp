#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "otafl/common.hpp"
#include "otafl/grid.hpp"

namespace otafl::csi {

struct PilotPosition {
  std::size_t symbol = 0;
  std::size_t subcarrier = 0;
};

struct ChannelEstimate {
  CVector pilot_estimates;
  CMatrix full_grid;  // symbols_per_slot x subcarriers
  std::size_t ue_id = 0;
};

/// H_hat[i] = Y[i] / X[i].
CVector ls_estimate(std::span<const Complex> received, std::span<const Complex> known);

/// Fills a symbols_per_slot x subcarriers grid from pilot estimates: linear in
/// frequency within each pilot symbol (flat extension past the outermost
/// pilots), then linear in time between pilot symbols (replication outside
/// them, and everywhere when only one pilot symbol exists).
CMatrix interpolate(std::span<const Complex> pilot_estimates,
                    std::span<const PilotPosition> positions, const grid::GridConfig& cfg);

/// Pilots on every subcarrier of one symbol.
std::vector<PilotPosition> full_symbol_pilots(const grid::GridConfig& cfg, std::size_t symbol = 0);

/// LS estimate from one full pilot symbol, interpolated over the slot.
ChannelEstimate estimate_from_pilot_symbol(std::span<const Complex> received,
                                           std::span<const Complex> known,
                                           const grid::GridConfig& cfg, std::size_t ue_id = 0);

/// Uniform rounding of real and imaginary parts to multiples of `step`;
/// step = 0 leaves the estimate untouched (lossless feedback).
ChannelEstimate quantize_feedback(const ChannelEstimate& est, double step);

inline constexpr double kNmseFloorDb = -300.0;

/// 10 log10(sum |est - truth|^2 / sum |truth|^2), floored at -300 dB.
double nmse(const CMatrix& est, const CMatrix& truth);
double nmse(std::span<const Complex> est, std::span<const Complex> truth);

/// Mean of per-sample error ratios over N samples, in dB.
double nmse_per_sample(const std::vector<CMatrix>& est, const std::vector<CMatrix>& truth);

}  // namespace otafl::csi
