#pragma once

#include <vector>

#include "otafl/common.hpp"
#include "otafl/csi.hpp"
#include "otafl/grid.hpp"

namespace otafl::precode {

struct PrecodeParams {
  double alpha = 1.0;
  double peak_power = 1.0;       // P_M^U, linear watts
  double inversion_floor = 0.0;  // magnitude clamp on the divisor
  double margin = 0.9;

  void validate() const;
};

inline constexpr double kDefaultFloorFraction = 0.05;

/// kDefaultFloorFraction * median |H_hat| over the estimate grid.
double default_floor(const csi::ChannelEstimate& est, double fraction = kDefaultFloorFraction);

/// W / H_hat per resource element. Where |H_hat| < floor the divisor is
/// floor * H_hat / |H_hat| (magnitude clamped, phase kept).
std::vector<grid::ResourceGrid> channel_invert(const std::vector<grid::ResourceGrid>& grids,
                                               const csi::ChannelEstimate& est, double floor);

/// Largest |x|^2 over all elements of all grids.
double peak_element_power(const std::vector<grid::ResourceGrid>& grids);

/// margin * min over UEs of sqrt(peak_power / max |precoded|^2). The minimum
/// makes one alpha valid for every UE, so the receiver can descale by M * alpha.
double compute_alpha(const std::vector<std::vector<grid::ResourceGrid>>& precoded, double peak_power,
                     double margin);

std::vector<grid::ResourceGrid> apply_gain(const std::vector<grid::ResourceGrid>& grids, double alpha);

}  // namespace otafl::precode
