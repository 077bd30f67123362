#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "otafl/accounting.hpp"
#include "otafl/channel.hpp"
#include "otafl/fl.hpp"
#include "otafl/grid.hpp"
#include "otafl/precode.hpp"
#include "otafl/sync.hpp"
#include "otafl/weightcodec.hpp"

namespace otafl::ota {

enum class Mode { ota, digital_fp32, digital_int8 };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();
inline constexpr double kDetectionThreshold = 0.3;

/// Physical-layer settings of the uplink.
struct PhyConfig {
  grid::GridConfig grid;
  channel::ChannelModel channel;
  channel::LinkBudget budget;
  sync::SyncConfig sync;

  /// Payload SNR: mean noise-free received power per occupied RE over noise
  /// variance. Infinity disables payload noise.
  double snr_db = kNoNoise;
  /// Pilot and preamble SNR; follows snr_db when unset.
  std::optional<double> pilot_snr_db;

  /// Stale-CSI knob: the payload sees decorrelate(H, rho) while CSI came from H.
  double csi_decorrelation = 0.0;
  /// Quantization step of the fed-back estimate (0 = lossless).
  double csi_feedback_step = 0.0;

  double peak_power = 1.0;
  double margin = 0.9;
  /// Inversion floor as a fraction of median |H_hat|; 0 disables the clamp.
  double floor_fraction = precode::kDefaultFloorFraction;
  /// Each UE scales by its own peaks instead of the negotiated common scale.
  bool per_client_scale = false;
  double detection_threshold = kDetectionThreshold;
  /// Gold index of the common OTA preamble.
  std::size_t preamble_index = 0;

  void validate() const;
  double pilot_snr() const { return pilot_snr_db.value_or(snr_db); }
  /// FFT windows start this many samples early, inside the cyclic prefix.
  std::size_t fft_backoff() const { return grid.cp_len / 2; }

  bool operator==(const PhyConfig&) const = default;
};

/// Outcome of pushing one set of deltas through the uplink.
struct Aggregation {
  bool aborted = false;
  std::string diagnostic;
  codec::WeightVector recovered;  // empty when aborted
  double alpha = 0.0;
  double noise_variance = 0.0;
  double peak_metric = 0.0;
  std::size_t timing_reference = 0;
  std::size_t detected_offset = 0;
  std::vector<std::size_t> offsets;
  std::size_t offset_spread = 0;  // max - min of the injected delays
  std::size_t peak_spread = 0;    // from per-UE Gold correlation
  std::size_t slots = 0;
  double max_tx_power = 0.0;  // largest |x|^2 any UE put on any RE
};

/// Full PHY chain for one round: pilot pass, LS estimation, channel
/// inversion, common alpha, superposition with timing offsets and noise,
/// detection, demodulation and descaling by M * alpha. `seed` should already
/// be specific to the round.
Aggregation aggregate_ota(const std::vector<codec::WeightVector>& deltas, const PhyConfig& phy,
                          std::uint64_t seed, std::size_t threads = 0);

struct RoundTrace {
  std::size_t round = 0;
  double agg_nmse_db = csi::kNmseFloorDb;
  RVector loss_per_ue;
  double global_loss = 0.0;
  double alpha = 0.0;
  std::size_t slots_used = 0;
  double energy_j = 0.0;
  bool aborted = false;
  double peak_metric = 0.0;
  std::size_t offset_spread = 0;
  std::size_t peak_spread = 0;
};

struct ExperimentConfig {
  Mode mode = Mode::ota;
  std::size_t rounds = 1;
  fl::TrainConfig train;
  PhyConfig phy;
  accounting::EnergyModel energy;
  double spectral_efficiency = accounting::kDefaultSpectralEfficiency;
  std::uint64_t seed = 0;
  /// Worker cap; 0 reads OTAFL_THREADS, falling back to hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Per-UE datasets plus their union, used for the global loss.
struct Federation {
  std::vector<fl::Task> ues;
  fl::Task pooled;

  explicit Federation(std::vector<fl::Task> tasks);
  std::size_t size() const { return ues.size(); }
};

struct RoundOutput {
  fl::ModelParams global;
  RoundTrace trace;
  codec::WeightVector recovered;  // averaged delta actually applied
  codec::WeightVector oracle;     // exact digital average
};

/// 10 log10(sum (r - t)^2 / sum t^2); -300 when both are zero.
double aggregation_nmse_db(const codec::WeightVector& recovered, const codec::WeightVector& truth);

/// Slots one round costs in the given mode.
std::size_t slots_per_round(Mode mode, std::size_t params, std::size_t num_ues,
                            double spectral_efficiency, const grid::GridConfig& grid);

/// Local training on every UE, then aggregation in the configured mode.
/// An aborted OTA round leaves the global model unchanged.
RoundOutput run_round(const fl::RoundState& state, const Federation& fed, const ExperimentConfig& cfg);

std::vector<RoundTrace> run_experiment(const Federation& fed, const fl::ModelParams& init,
                                       const ExperimentConfig& cfg);

/// Worker count after applying OTAFL_THREADS and the explicit cap.
std::size_t resolve_threads(std::size_t requested);

}  // namespace otafl::ota
