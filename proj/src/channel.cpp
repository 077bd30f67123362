#include "otafl/channel.hpp"

#include <algorithm>
#include <numbers>

#include "otafl/rng.hpp"

namespace otafl::channel {

std::string to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::ideal: return "ideal";
    case ChannelKind::flat_block: return "flat_block";
    case ChannelKind::rayleigh_per_subcarrier: return "rayleigh_per_subcarrier";
    case ChannelKind::pathloss_fading: return "pathloss_fading";
  }
  return "ideal";
}

ChannelKind parse_channel_kind(const std::string& name) {
  if (name == "ideal") return ChannelKind::ideal;
  if (name == "flat_block") return ChannelKind::flat_block;
  if (name == "rayleigh_per_subcarrier" || name == "rayleigh") {
    return ChannelKind::rayleigh_per_subcarrier;
  }
  if (name == "pathloss_fading") return ChannelKind::pathloss_fading;
  throw ConfigError("unknown channel kind '" + name + "'");
}

void ChannelModel::validate() const {
  if (kind == ChannelKind::pathloss_fading) {
    if (!(pathloss_exponent > 0.0)) throw ConfigError("channel.pathloss_exponent must be positive");
    if (!(reference_distance > 0.0)) throw ConfigError("channel.reference_distance must be positive");
    if (!(carrier > 0.0)) throw ConfigError("channel.carrier must be positive");
  }
}

void LinkBudget::validate() const {
  if (!(bandwidth > 0.0)) throw ConfigError("link.bandwidth must be positive");
  if (!(distance > 0.0)) throw ConfigError("link.distance must be positive");
}

double thermal_noise_watts(const LinkBudget& budget) {
  return std::pow(10.0, budget.noise_psd_dbm_hz / 10.0) * budget.bandwidth * 1e-3;
}

double pathloss_db(const ChannelModel& model, double distance) {
  constexpr double c = 299792458.0;
  const double fspl_ref =
      20.0 * std::log10(4.0 * std::numbers::pi * model.reference_distance * model.carrier / c);
  if (distance <= model.reference_distance) {
    return 20.0 * std::log10(4.0 * std::numbers::pi * distance * model.carrier / c);
  }
  return fspl_ref + 10.0 * model.pathloss_exponent * std::log10(distance / model.reference_distance);
}

double mean_receive_snr_db(const ChannelModel& model, const LinkBudget& budget) {
  const double noise_dbm = 10.0 * std::log10(thermal_noise_watts(budget) * 1e3);
  const double loss = model.kind == ChannelKind::pathloss_fading ? pathloss_db(model, budget.distance) : 0.0;
  return budget.tx_power_dbm - loss - noise_dbm;
}

ChannelRealization realize_channel(const ChannelModel& model, const LinkBudget& budget,
                                   std::size_t subcarriers, std::uint64_t seed,
                                   std::size_t ue_id) {
  model.validate();
  budget.validate();
  ChannelRealization ch;
  ch.ue_id = ue_id;
  ch.gains.assign(subcarriers, Complex{1.0, 0.0});
  if (model.kind == ChannelKind::ideal) return ch;

  Rng rng(seed);
  ch.noise_variance = thermal_noise_watts(budget);
  switch (model.kind) {
    case ChannelKind::flat_block: {
      const Complex g = rng.complex_normal();
      std::fill(ch.gains.begin(), ch.gains.end(), g);
      break;
    }
    case ChannelKind::rayleigh_per_subcarrier:
      for (auto& g : ch.gains) g = rng.complex_normal();
      break;
    case ChannelKind::pathloss_fading: {
      const double amplitude = std::pow(10.0, -pathloss_db(model, budget.distance) / 20.0);
      for (auto& g : ch.gains) g = amplitude * rng.complex_normal();
      break;
    }
    case ChannelKind::ideal: break;
  }
  return ch;
}

ChannelRealization decorrelate(const ChannelRealization& ch, const ChannelModel& model,
                               const LinkBudget& budget, double rho, std::uint64_t seed) {
  if (rho < 0.0 || rho > 1.0) throw ConfigError("decorrelation must lie in [0, 1]");
  if (rho == 0.0) return ch;
  const ChannelRealization fresh = realize_channel(model, budget, ch.gains.size(), seed, ch.ue_id);
  ChannelRealization out = ch;
  const double keep = std::sqrt(1.0 - rho);
  const double mix = std::sqrt(rho);
  for (std::size_t n = 0; n < out.gains.size(); ++n) {
    out.gains[n] = keep * ch.gains[n] + mix * fresh.gains[n];
  }
  return out;
}

grid::ResourceGrid apply_channel(const grid::ResourceGrid& grid, const ChannelRealization& ch,
                                 std::uint64_t seed) {
  if (grid.subcarriers() != ch.gains.size()) {
    throw DimensionError("grid has " + std::to_string(grid.subcarriers()) +
                         " subcarriers, channel has " + std::to_string(ch.gains.size()));
  }
  Rng rng(seed);
  grid::ResourceGrid out = grid;
  for (Eigen::Index r = 0; r < out.data.rows(); ++r) {
    for (Eigen::Index n = 0; n < out.data.cols(); ++n) {
      Complex y = grid.data(r, n) * ch.gains[static_cast<std::size_t>(n)];
      if (ch.noise_variance > 0.0) y += rng.complex_normal(ch.noise_variance);
      out.data(r, n) = y;
    }
  }
  return out;
}

CVector apply_channel_row(std::span<const Complex> row, const ChannelRealization& ch,
                          std::uint64_t seed) {
  grid::ResourceGrid g{CMatrix(1, static_cast<Eigen::Index>(row.size()))};
  for (std::size_t n = 0; n < row.size(); ++n) g.data(0, static_cast<Eigen::Index>(n)) = row[n];
  const grid::ResourceGrid y = apply_channel(g, ch, seed);
  return CVector(y.data.data(), y.data.data() + y.data.size());
}

grid::TimeSignal superpose(const std::vector<DelayedSignal>& signals, double noise_variance,
                           std::uint64_t seed) {
  if (noise_variance < 0.0) throw ConfigError("noise variance must be nonnegative");
  grid::TimeSignal out;
  std::size_t length = 0;
  for (const auto& s : signals) {
    if (out.sample_rate == 0.0) out.sample_rate = s.signal.sample_rate;
    if (s.signal.sample_rate != out.sample_rate) {
      throw ConfigError("superpose: mixed sample rates");
    }
    length = std::max(length, s.signal.size() + s.delay);
  }
  out.samples.assign(length, Complex{0.0, 0.0});
  for (const auto& s : signals) {
    for (std::size_t t = 0; t < s.signal.size(); ++t) out.samples[t + s.delay] += s.signal.samples[t];
  }
  if (noise_variance > 0.0) {
    Rng rng(seed);
    for (auto& x : out.samples) x += rng.complex_normal(noise_variance);
  }
  return out;
}

}  // namespace otafl::channel
