#include "otafl/precode.hpp"

#include <algorithm>
#include <limits>

namespace otafl::precode {

void PrecodeParams::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("precode.alpha must be positive");
  if (!(peak_power > 0.0)) throw ConfigError("precode.peak_power must be positive");
  if (inversion_floor < 0.0) throw ConfigError("precode.inversion_floor must be nonnegative");
  if (!(margin > 0.0 && margin <= 1.0)) throw ConfigError("precode.margin must lie in (0, 1]");
}

double default_floor(const csi::ChannelEstimate& est, double fraction) {
  if (est.full_grid.size() == 0) throw PreconditionError("default_floor: empty estimate");
  std::vector<double> mags(static_cast<std::size_t>(est.full_grid.size()));
  for (Eigen::Index i = 0; i < est.full_grid.size(); ++i) {
    mags[static_cast<std::size_t>(i)] = std::abs(est.full_grid.data()[i]);
  }
  const std::size_t mid = mags.size() / 2;
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid), mags.end());
  double median = mags[mid];
  if (mags.size() % 2 == 0) {
    const double lower = *std::max_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return fraction * median;
}

std::vector<grid::ResourceGrid> channel_invert(const std::vector<grid::ResourceGrid>& grids,
                                               const csi::ChannelEstimate& est, double floor) {
  if (floor < 0.0) throw ConfigError("inversion floor must be nonnegative");
  std::vector<grid::ResourceGrid> out;
  out.reserve(grids.size());
  for (const auto& g : grids) {
    if (g.data.rows() != est.full_grid.rows() || g.data.cols() != est.full_grid.cols()) {
      throw DimensionError("channel_invert: grid and estimate dimensions differ");
    }
    grid::ResourceGrid p = g;
    for (Eigen::Index r = 0; r < g.data.rows(); ++r) {
      for (Eigen::Index n = 0; n < g.data.cols(); ++n) {
        const Complex h = est.full_grid(r, n);
        const double mag = std::abs(h);
        Complex divisor = h;
        if (mag < floor) {
          divisor = mag > 0.0 ? floor * h / mag : Complex{floor, 0.0};
        } else if (mag == 0.0) {
          throw PreconditionError("channel_invert: zero channel estimate with zero floor");
        }
        p.data(r, n) = g.data(r, n) / divisor;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

double peak_element_power(const std::vector<grid::ResourceGrid>& grids) {
  double peak = 0.0;
  for (const auto& g : grids) {
    if (g.data.size() > 0) peak = std::max(peak, g.data.cwiseAbs2().maxCoeff());
  }
  return peak;
}

double compute_alpha(const std::vector<std::vector<grid::ResourceGrid>>& precoded, double peak_power,
                     double margin) {
  if (precoded.empty()) throw PreconditionError("compute_alpha: no UEs");
  if (!(peak_power > 0.0)) throw ConfigError("compute_alpha: peak power must be positive");
  if (!(margin > 0.0 && margin <= 1.0)) throw ConfigError("compute_alpha: margin must lie in (0, 1]");
  double alpha = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& ue : precoded) {
    const double peak = peak_element_power(ue);
    if (peak <= 0.0) continue;  // silent UE places no constraint
    any = true;
    alpha = std::min(alpha, std::sqrt(peak_power / peak));
  }
  if (!any) throw PreconditionError("compute_alpha: all-zero precoded input");
  return margin * alpha;
}

std::vector<grid::ResourceGrid> apply_gain(const std::vector<grid::ResourceGrid>& grids, double alpha) {
  std::vector<grid::ResourceGrid> out = grids;
  for (auto& g : out) g.data *= alpha;
  return out;
}

}  // namespace otafl::precode
