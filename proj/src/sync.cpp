#include "otafl/sync.hpp"

#include <algorithm>
#include <cmath>

#include "otafl/rng.hpp"

namespace otafl::sync {

std::string to_string(SyncMode mode) { return mode == SyncMode::ptp_on ? "ptp_on" : "ptp_off"; }

SyncMode parse_sync_mode(const std::string& name) {
  if (name == "ptp_on") return SyncMode::ptp_on;
  if (name == "ptp_off") return SyncMode::ptp_off;
  throw ConfigError("unknown sync mode '" + name + "'");
}

std::string to_string(OffsetShape shape) {
  return shape == OffsetShape::uniform ? "uniform" : "truncated_gaussian";
}

OffsetShape parse_offset_shape(const std::string& name) {
  if (name == "uniform") return OffsetShape::uniform;
  if (name == "truncated_gaussian") return OffsetShape::truncated_gaussian;
  throw ConfigError("unknown offset shape '" + name + "'");
}

void SyncConfig::validate() const {
  if (!(ptp_bound > 0.0)) throw ConfigError("sync.ptp_bound must be positive");
  if (phase_offset_std < 0.0) throw ConfigError("sync.phase_offset_std must be nonnegative");
}

std::size_t max_offset(const SyncConfig& cfg, double sample_rate) {
  if (cfg.mode == SyncMode::ptp_off) return cfg.off_spread;
  // Guard against 1e-6 * 3.84e6 landing a hair above an integer.
  const double samples = cfg.ptp_bound * sample_rate;
  return static_cast<std::size_t>(std::ceil(samples - 1e-9));
}

std::vector<std::size_t> draw_offsets(const SyncConfig& cfg, std::size_t num_ues, double sample_rate) {
  cfg.validate();
  if (num_ues == 0) throw PreconditionError("draw_offsets: M must be at least 1");
  const std::size_t hi = max_offset(cfg, sample_rate);
  Rng rng(derive_seed(cfg.seed, {0x5f0ff5e7}));
  std::vector<std::size_t> out(num_ues, 0);
  for (auto& d : out) {
    if (hi == 0) continue;
    if (cfg.shape == OffsetShape::uniform) {
      d = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(hi)));
    } else {
      const double sigma = static_cast<double>(hi) / 2.0;
      double x = std::abs(rng.normal()) * sigma;
      while (x > static_cast<double>(hi) + 0.5) x = std::abs(rng.normal()) * sigma;
      d = std::min(hi, static_cast<std::size_t>(std::llround(x)));
    }
  }
  return out;
}

std::vector<double> draw_phase_offsets(const SyncConfig& cfg, std::size_t num_ues) {
  std::vector<double> out(num_ues, 0.0);
  if (cfg.phase_offset_std == 0.0) return out;
  Rng rng(derive_seed(cfg.seed, {0x9a5e}));
  for (auto& p : out) p = cfg.phase_offset_std * rng.normal();
  return out;
}

std::vector<UePeak> peak_spread(const grid::TimeSignal& signal, const std::vector<std::vector<int>>& preambles) {
  std::vector<UePeak> out;
  out.reserve(preambles.size());
  for (std::size_t ue = 0; ue < preambles.size(); ++ue) {
    const grid::Detection det = grid::detect_frame(signal, preambles[ue]);
    out.push_back({ue, det.offset, det.peak_metric});
  }
  return out;
}

std::size_t spread_of(const std::vector<UePeak>& peaks) {
  if (peaks.empty()) return 0;
  auto [lo, hi] = std::minmax_element(peaks.begin(), peaks.end(),
                                      [](const UePeak& a, const UePeak& b) { return a.offset < b.offset; });
  return hi->offset - lo->offset;
}

}  // namespace otafl::sync
