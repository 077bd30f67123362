#include "otafl/ota.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

#include "otafl/csi.hpp"
#include "otafl/rng.hpp"
#include "parallel.hpp"

namespace otafl::ota {

namespace {

// Stream labels for derive_seed.
enum Stream : std::uint64_t {
  kTrainStream = 1,
  kPhyStream,
  kChannelStream,
  kStaleStream,
  kPilotNoiseStream,
  kSyncNoiseStream,
  kPayloadNoiseStream,
  kOffsetStream,
  kDiagStream,
};

constexpr int kGoldFamily = (1 << grid::kDefaultGoldDegree) + 1;
// Longer codes for the per-UE diagnostic burst, where M codes overlap.
constexpr int kDiagGoldDegree = 9;
constexpr std::size_t kDiagGoldLength = (std::size_t{1} << kDiagGoldDegree) - 1;

grid::TimeSignal zeros(std::size_t length, double rate) {
  return {CVector(length, Complex{0.0, 0.0}), rate};
}

grid::TimeSignal preamble_signal(const std::vector<int>& chips, double rate) {
  grid::TimeSignal s{{}, rate};
  s.samples.reserve(chips.size());
  for (int c : chips) s.samples.emplace_back(static_cast<double>(c), 0.0);
  return s;
}

CVector channel_row(const CVector& values, const channel::ChannelRealization& ch) {
  CVector out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = values[k] * ch.gains[k];
  return out;
}

std::vector<grid::ResourceGrid> through_channel(const std::vector<grid::ResourceGrid>& grids,
                                                const channel::ChannelRealization& ch) {
  std::vector<grid::ResourceGrid> out = grids;
  for (auto& g : out) {
    for (Eigen::Index n = 0; n < g.data.cols(); ++n) g.data.col(n) *= ch.gains[static_cast<std::size_t>(n)];
  }
  return out;
}

double mean_gain_power(const channel::ChannelRealization& ch) {
  double s = 0.0;
  for (const Complex& g : ch.gains) s += std::norm(g);
  return s / static_cast<double>(ch.gains.size());
}

// Mean |x|^2 over the resource elements that carry parameters.
double occupied_power(const std::vector<grid::ResourceGrid>& grids, const codec::SlotPlan& plan,
                      const grid::GridConfig& cfg) {
  const CVector symbols = codec::grids_to_symbols(grids, plan, cfg);
  double s = 0.0;
  for (const Complex& z : symbols) s += std::norm(z);
  return symbols.empty() ? 0.0 : s / static_cast<double>(symbols.size());
}

double noise_variance_for(double signal_power, double snr_db) {
  if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
  return signal_power / db_to_linear(snr_db);
}

Aggregation aborted(Aggregation agg, std::string why) {
  agg.aborted = true;
  agg.diagnostic = std::move(why);
  agg.recovered = {};
  return agg;
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::ota: return "ota";
    case Mode::digital_fp32: return "digital_fp32";
    case Mode::digital_int8: return "digital_int8";
  }
  return "ota";
}

Mode parse_mode(const std::string& name) {
  if (name == "ota") return Mode::ota;
  if (name == "digital_fp32") return Mode::digital_fp32;
  if (name == "digital_int8") return Mode::digital_int8;
  throw ConfigError("unknown mode '" + name + "'");
}

void PhyConfig::validate() const {
  grid.validate();
  channel.validate();
  budget.validate();
  sync.validate();
  if (std::isnan(snr_db)) throw ConfigError("phy.snr_db must be a number");
  if (pilot_snr_db && std::isnan(*pilot_snr_db)) throw ConfigError("phy.pilot_snr_db must be a number");
  if (csi_decorrelation < 0.0 || csi_decorrelation > 1.0) {
    throw ConfigError("phy.csi_decorrelation must lie in [0, 1]");
  }
  if (csi_feedback_step < 0.0) throw ConfigError("phy.csi_feedback_step must be nonnegative");
  if (!(peak_power > 0.0)) throw ConfigError("phy.peak_power must be positive");
  if (!(margin > 0.0 && margin <= 1.0)) throw ConfigError("phy.margin must lie in (0, 1]");
  if (floor_fraction < 0.0) throw ConfigError("phy.floor_fraction must be nonnegative");
  if (detection_threshold < 0.0 || detection_threshold > 1.0) {
    throw ConfigError("phy.detection_threshold must lie in [0, 1]");
  }
  if (preamble_index >= static_cast<std::size_t>(kGoldFamily)) {
    throw ConfigError("phy.preamble_index exceeds the Gold family size");
  }
}

std::size_t resolve_threads(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OTAFL_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min<std::size_t>(n, cap);
  }
  return n;
}

Aggregation aggregate_ota(const std::vector<codec::WeightVector>& deltas, const PhyConfig& phy,
                          std::uint64_t seed, std::size_t threads) {
  phy.validate();
  const std::size_t M = deltas.size();
  if (M == 0) throw PreconditionError("aggregate_ota: no UEs");
  const std::size_t P = deltas.front().size();
  for (const auto& d : deltas) {
    if (d.size() != P) throw DimensionError("aggregate_ota: deltas differ in length");
  }
  const std::size_t workers = resolve_threads(threads);
  const grid::GridConfig& cfg = phy.grid;
  const double rate = cfg.sample_rate();
  const std::size_t backoff = phy.fft_backoff();
  const codec::SlotPlan plan = codec::slot_plan(P, cfg);

  Aggregation agg;
  agg.slots = plan.slots;

  // Control channel: peaks go up, the common scale comes back down.
  std::vector<codec::IQScale> peaks(M);
  for (std::size_t i = 0; i < M; ++i) peaks[i] = codec::peak_scales(deltas[i].values);
  const codec::IQScale shared = codec::common_scale(peaks);
  codec::IQScale rx_scale = shared;
  if (phy.per_client_scale) {
    rx_scale = {0.0, 0.0};
    for (const auto& p : peaks) {
      rx_scale.i += p.i / static_cast<double>(M);
      rx_scale.q += p.q / static_cast<double>(M);
    }
  }

  // Timing offsets hold for the whole round.
  sync::SyncConfig sync_cfg = phy.sync;
  sync_cfg.seed = derive_seed(seed, {kOffsetStream, phy.sync.seed});
  agg.offsets = sync::draw_offsets(sync_cfg, M, rate);
  const std::vector<double> phases = sync::draw_phase_offsets(sync_cfg, M);
  const auto [dmin, dmax] = std::minmax_element(agg.offsets.begin(), agg.offsets.end());
  agg.offset_spread = *dmax - *dmin;

  const grid::FrameSpec pilot_spec = grid::default_frame_spec(cfg, 0, phy.preamble_index);
  const grid::FrameSpec data_spec = grid::default_frame_spec(cfg, plan.slots, phy.preamble_index);
  // Room for the latest UE plus one symbol of trailing silence.
  const std::size_t span = grid::frame_length(data_spec, cfg) + *dmax + cfg.samples_per_symbol();

  std::vector<channel::ChannelRealization> chans(M);
  detail::parallel_for(M, workers, [&](std::size_t i) {
    chans[i] = channel::realize_channel(phy.channel, phy.budget, cfg.subcarriers,
                                        derive_seed(seed, {kChannelStream, i}), i);
    chans[i].noise_variance = 0.0;
  });

  double pilot_power = 0.0;
  for (const auto& ch : chans) pilot_power += mean_gain_power(ch) / static_cast<double>(M);
  const double pilot_noise = noise_variance_for(pilot_power, phy.pilot_snr());

  // Timing acquisition: all UEs send the common preamble at their offsets.
  std::vector<channel::DelayedSignal> burst{{zeros(span, rate), 0}};
  const grid::TimeSignal chips = preamble_signal(pilot_spec.preamble, rate);
  for (std::size_t i = 0; i < M; ++i) burst.push_back({chips, agg.offsets[i]});
  const grid::TimeSignal burst_rx = channel::superpose(burst, pilot_noise, derive_seed(seed, {kSyncNoiseStream}));
  const grid::Detection lock = grid::detect_frame(burst_rx, pilot_spec.preamble);
  agg.timing_reference = lock.offset;
  if (lock.peak_metric < phy.detection_threshold) {
    agg.peak_metric = lock.peak_metric;
    return aborted(std::move(agg), "timing acquisition failed: peak metric " +
                                       std::to_string(lock.peak_metric) + " below threshold");
  }

  // Diagnostic burst with distinct per-UE Gold codes.
  {
    std::vector<std::vector<int>> codes(M);
    std::vector<channel::DelayedSignal> diag{{zeros(kDiagGoldLength + *dmax + cfg.samples_per_symbol(), rate), 0}};
    for (std::size_t i = 0; i < M; ++i) {
      codes[i] = grid::gold_sequence(kDiagGoldDegree, i % (kDiagGoldLength + 2), kDiagGoldLength);
      diag.push_back({preamble_signal(codes[i], rate), agg.offsets[i]});
    }
    const grid::TimeSignal diag_rx = channel::superpose(diag, pilot_noise, derive_seed(seed, {kDiagStream}));
    agg.peak_spread = sync::spread_of(sync::peak_spread(diag_rx, codes));
  }

  // Pilot pass: UEs sound the channel one at a time, demodulated at the lock.
  std::vector<csi::ChannelEstimate> estimates(M);
  std::vector<std::vector<grid::ResourceGrid>> precoded(M);
  detail::parallel_for(M, workers, [&](std::size_t i) {
    const grid::TimeSignal frame = grid::assemble_frame_with_pilot(
        pilot_spec, channel_row(pilot_spec.pilot_values, chans[i]), {}, cfg);
    const grid::TimeSignal rx = channel::superpose({{zeros(span, rate), 0}, {frame, agg.offsets[i]}}, 0.0, 0);
    CVector pilot = grid::disassemble_frame(rx, pilot_spec, cfg, lock.offset, backoff).pilot;
    if (pilot_noise > 0.0) {
      Rng rng(derive_seed(seed, {kPilotNoiseStream, i}));
      for (auto& z : pilot) z += rng.complex_normal(pilot_noise);
    }
    estimates[i] = csi::quantize_feedback(
        csi::estimate_from_pilot_symbol(pilot, pilot_spec.pilot_values, cfg, i), phy.csi_feedback_step);

    const codec::ScaledUpdate scaled =
        codec::scale_updates(deltas[i], phy.per_client_scale ? peaks[i] : shared);
    const auto grids = codec::map_to_grids(codec::pack_complex(scaled.values), plan, cfg);
    const double floor = phy.floor_fraction > 0.0 ? precode::default_floor(estimates[i], phy.floor_fraction) : 0.0;
    precoded[i] = precode::channel_invert(grids, estimates[i], floor);
  });

  bool all_silent = true;
  for (const auto& p : precoded) all_silent = all_silent && precode::peak_element_power(p) == 0.0;
  if (all_silent) {
    // Nothing to send; the exact average is zero.
    agg.alpha = 0.0;
    agg.peak_metric = lock.peak_metric;
    agg.recovered.values.assign(P, 0.0);
    return agg;
  }
  agg.alpha = precode::compute_alpha(precoded, phy.peak_power, phy.margin);

  // Payload pass.
  std::vector<grid::TimeSignal> frames(M);
  RVector rx_power(M, 0.0);
  RVector tx_peak(M, 0.0);
  detail::parallel_for(M, workers, [&](std::size_t i) {
    channel::ChannelRealization payload_ch =
        channel::decorrelate(chans[i], phy.channel, phy.budget, phy.csi_decorrelation,
                             derive_seed(seed, {kStaleStream, i}));
    payload_ch.noise_variance = 0.0;
    if (phases[i] != 0.0) {
      const Complex rot = std::polar(1.0, phases[i]);
      for (auto& g : payload_ch.gains) g *= rot;
    }
    const auto tx = precode::apply_gain(precoded[i], agg.alpha);
    tx_peak[i] = precode::peak_element_power(tx);
    const auto rx = through_channel(tx, payload_ch);
    rx_power[i] = occupied_power(rx, plan, cfg);
    frames[i] = grid::assemble_frame_with_pilot(data_spec, channel_row(data_spec.pilot_values, payload_ch), rx, cfg);
  });
  agg.max_tx_power = *std::max_element(tx_peak.begin(), tx_peak.end());

  double mean_rx = 0.0;
  for (double p : rx_power) mean_rx += p / static_cast<double>(M);
  agg.noise_variance = noise_variance_for(mean_rx, phy.snr_db);

  std::vector<channel::DelayedSignal> air{{zeros(span, rate), 0}};
  for (std::size_t i = 0; i < M; ++i) air.push_back({std::move(frames[i]), agg.offsets[i]});
  const grid::TimeSignal received =
      channel::superpose(air, agg.noise_variance, derive_seed(seed, {kPayloadNoiseStream}));

  const grid::Detection det = grid::detect_frame(received, data_spec.preamble);
  agg.detected_offset = det.offset;
  agg.peak_metric = det.peak_metric;
  if (det.peak_metric < phy.detection_threshold) {
    return aborted(std::move(agg), "frame detection failed: peak metric " +
                                       std::to_string(det.peak_metric) + " below threshold");
  }

  // The receiver keeps the timing acquired with the pilots, so the estimated
  // channels and the payload share one reference.
  const auto payload = grid::disassemble_frame(received, data_spec, cfg, lock.offset, backoff).payload;
  codec::WeightVector sum = codec::unmap_from_grids(payload, plan, rx_scale, cfg);
  const double denom = static_cast<double>(M) * agg.alpha;
  for (double& v : sum.values) v /= denom;
  agg.recovered = std::move(sum);
  return agg;
}

void ExperimentConfig::validate() const {
  if (rounds == 0) throw ConfigError("rounds must be at least 1");
  if (!(spectral_efficiency > 0.0)) throw ConfigError("accounting.spectral_efficiency must be positive");
  energy.validate();
  phy.validate();
}

Federation::Federation(std::vector<fl::Task> tasks) : ues(std::move(tasks)) {
  if (ues.empty()) throw PreconditionError("federation needs at least one UE");
  pooled = fl::union_task(ues);
}

double aggregation_nmse_db(const codec::WeightVector& recovered, const codec::WeightVector& truth) {
  if (recovered.size() != truth.size()) throw DimensionError("aggregation_nmse_db: length mismatch");
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = recovered.values[i] - truth.values[i];
    err += e * e;
    ref += truth.values[i] * truth.values[i];
  }
  if (err == 0.0) return csi::kNmseFloorDb;
  if (ref == 0.0) return -csi::kNmseFloorDb;
  return std::max(csi::kNmseFloorDb, 10.0 * std::log10(err / ref));
}

std::size_t slots_per_round(Mode mode, std::size_t params, std::size_t num_ues,
                            double spectral_efficiency, const grid::GridConfig& grid) {
  const auto fmt = accounting::SlotFormat::from_grid(grid);
  switch (mode) {
    case Mode::ota: return accounting::ota_slots(params, fmt);
    case Mode::digital_fp32:
      return accounting::digital_slots(params, 32.0,
                                       accounting::SpectralProfile::uniform(num_ues, spectral_efficiency), fmt);
    case Mode::digital_int8:
      return accounting::digital_slots(params, 8.0,
                                       accounting::SpectralProfile::uniform(num_ues, spectral_efficiency), fmt);
  }
  return 0;
}

RoundOutput run_round(const fl::RoundState& state, const Federation& fed, const ExperimentConfig& cfg) {
  const std::size_t M = fed.size();
  if (state.num_ues != M) throw DimensionError("round state and federation disagree on M");
  const std::size_t P = state.global.size();
  const std::size_t workers = resolve_threads(cfg.threads);

  std::vector<codec::WeightVector> deltas(M);
  RVector local_loss(M, 0.0);
  detail::parallel_for(M, workers, [&](std::size_t i) {
    fl::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, {kTrainStream, state.round, i, cfg.train.seed});
    const fl::ModelParams local = fl::local_train(state.global, fed.ues[i], tc);
    local_loss[i] = fl::loss(fed.ues[i], local.theta);
    deltas[i] = fl::compute_delta(local, state.global);
  });

  RoundOutput out;
  out.oracle = fl::mean_delta(deltas);
  RoundTrace& tr = out.trace;
  tr.round = state.round;
  tr.loss_per_ue = local_loss;
  tr.slots_used = slots_per_round(cfg.mode, P, M, cfg.spectral_efficiency, cfg.phy.grid);

  switch (cfg.mode) {
    case Mode::digital_fp32:
      out.recovered = out.oracle;
      break;
    case Mode::digital_int8: {
      std::vector<codec::WeightVector> q(M);
      for (std::size_t i = 0; i < M; ++i) q[i] = fl::quantize_int8(deltas[i]);
      out.recovered = fl::mean_delta(q);
      break;
    }
    case Mode::ota: {
      const Aggregation agg =
          aggregate_ota(deltas, cfg.phy, derive_seed(cfg.seed, {kPhyStream, state.round}), cfg.threads);
      tr.alpha = agg.alpha;
      tr.aborted = agg.aborted;
      tr.peak_metric = agg.peak_metric;
      tr.offset_spread = agg.offset_spread;
      tr.peak_spread = agg.peak_spread;
      out.recovered = agg.aborted ? codec::WeightVector{RVector(P, 0.0)} : agg.recovered;
      break;
    }
  }

  tr.agg_nmse_db = aggregation_nmse_db(out.recovered, out.oracle);
  out.global = fl::apply_global(state.global, out.recovered);
  tr.global_loss = fl::loss(fed.pooled, out.global.theta);
  if (cfg.mode == Mode::ota) {
    tr.energy_j = accounting::energy(M, static_cast<double>(tr.slots_used), cfg.energy);
  } else {
    tr.energy_j = accounting::energy_for_ue_slots(static_cast<double>(tr.slots_used), cfg.energy);
  }
  return out;
}

std::vector<RoundTrace> run_experiment(const Federation& fed, const fl::ModelParams& init,
                                       const ExperimentConfig& cfg) {
  cfg.validate();
  for (const auto& t : fed.ues) {
    if (fl::param_count(t) != init.size()) {
      throw DimensionError("initial model size differs from the task parameter count");
    }
  }
  std::vector<RoundTrace> traces;
  traces.reserve(cfg.rounds);
  fl::RoundState state{1, init, fed.size()};
  for (std::size_t r = 1; r <= cfg.rounds; ++r) {
    state.round = r;
    RoundOutput out = run_round(state, fed, cfg);
    state.global = std::move(out.global);
    traces.push_back(std::move(out.trace));
  }
  return traces;
}

}  // namespace otafl::ota
