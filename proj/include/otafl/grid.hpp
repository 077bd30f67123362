#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "otafl/common.hpp"

namespace otafl::grid {

/// OFDM numerology. Defaults follow 5G-NR numerology 0 on a 3.84 MHz
/// carrier: 256 subcarriers at 15 kHz, 14 symbols per 1 ms slot.
struct GridConfig {
  std::size_t subcarriers = 256;
  std::size_t symbols_per_slot = 14;
  double subcarrier_spacing = 15e3;
  std::size_t fft_size = 256;
  std::size_t cp_len = 16;

  double sample_rate() const { return static_cast<double>(fft_size) * subcarrier_spacing; }
  std::size_t samples_per_symbol() const { return fft_size + cp_len; }
  double symbol_duration() const { return static_cast<double>(samples_per_symbol()) / sample_rate(); }
  double useful_symbol_duration() const { return 1.0 / subcarrier_spacing; }
  std::size_t res_per_slot() const { return subcarriers * symbols_per_slot; }

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;

  bool operator==(const GridConfig&) const = default;
};

/// One slot of resource elements: symbols_per_slot rows by subcarriers columns.
struct ResourceGrid {
  CMatrix data;

  static ResourceGrid zeros(const GridConfig& cfg) {
    return {CMatrix::Zero(static_cast<Eigen::Index>(cfg.symbols_per_slot),
                          static_cast<Eigen::Index>(cfg.subcarriers))};
  }
  std::size_t symbols() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t subcarriers() const { return static_cast<std::size_t>(data.cols()); }
  bool matches(const GridConfig& cfg) const {
    return symbols() == cfg.symbols_per_slot && subcarriers() == cfg.subcarriers;
  }
};

struct TimeSignal {
  CVector samples;
  double sample_rate = 0.0;

  std::size_t size() const { return samples.size(); }
};

/// Frame layout: time-domain preamble, one pilot OFDM symbol, payload slots.
struct FrameSpec {
  std::vector<int> preamble;  // +1/-1 chips
  std::size_t pilot_symbol_index = 0;
  CVector pilot_values;  // unit-modulus, one per subcarrier
  std::size_t payload_slot_count = 0;

  void validate(const GridConfig& cfg) const;
};

/// Seed of the fixed QPSK pilot symbol.
inline constexpr std::uint64_t kPilotSeed = 0x51505348ULL;  // "QPSH"
inline constexpr int kDefaultGoldDegree = 7;

/// Gold sequence from the preferred m-sequence pair of the given odd degree
/// (5, 7, 9 or 11). Index k < 2^m-1 selects u xor (v shifted by k); indices
/// 2^m-1 and 2^m select u and v themselves. Chips are mapped 0 -> +1, 1 -> -1.
std::vector<int> gold_sequence(int degree, std::size_t index, std::size_t length);

/// Unit-modulus QPSK symbols, (+-1 +- j)/sqrt(2), from a fixed seed.
CVector qpsk_pilots(std::size_t count, std::uint64_t seed = kPilotSeed);

/// Preamble = degree-7 Gold code of full length; pilots = default QPSK symbol.
FrameSpec default_frame_spec(const GridConfig& cfg, std::size_t payload_slots,
                             std::size_t gold_index = 0);

/// FFT bin occupied by subcarrier k; subcarriers are centred on DC.
std::size_t subcarrier_bin(std::size_t k, const GridConfig& cfg);

/// Unitary DFT convention (1/sqrt(fft_size) in both directions), so the
/// useful-sample energy of a symbol equals the energy of its grid row.
CVector modulate_symbol(std::span<const Complex> row, const GridConfig& cfg);
CVector demodulate_symbol(std::span<const Complex> samples, const GridConfig& cfg);

TimeSignal ofdm_modulate(const ResourceGrid& grid, const GridConfig& cfg);

/// Demodulates symbols_per_slot symbols whose first cyclic prefix starts at `start`.
ResourceGrid ofdm_demodulate(const TimeSignal& signal, const GridConfig& cfg, std::size_t start);

std::size_t frame_length(const FrameSpec& spec, const GridConfig& cfg);

TimeSignal assemble_frame(const FrameSpec& spec, const std::vector<ResourceGrid>& payload,
                          const GridConfig& cfg);

/// Pilot OFDM symbol with explicit per-subcarrier values (e.g. already
/// multiplied by a channel); used to build frames whose fields differ per UE.
TimeSignal assemble_frame_with_pilot(const FrameSpec& spec, std::span<const Complex> pilot_row,
                                     const std::vector<ResourceGrid>& payload,
                                     const GridConfig& cfg);

struct DisassembledFrame {
  CVector pilot;
  std::vector<ResourceGrid> payload;
};

/// Inverse of assemble_frame for a frame starting at `offset`. A positive
/// `backoff` moves every FFT window that many samples earlier into the CP.
DisassembledFrame disassemble_frame(const TimeSignal& signal, const FrameSpec& spec,
                                    const GridConfig& cfg, std::size_t offset,
                                    std::size_t backoff = 0);

struct Detection {
  std::size_t offset = 0;
  double peak_metric = 0.0;
};

/// Sliding correlation against the preamble. The metric at each lag is
/// |<s, p>| / (||s_window|| * ||p||), which lies in [0, 1]; the earliest
/// global maximum wins.
Detection detect_frame(const TimeSignal& signal, std::span<const int> preamble);

/// Normalized correlation metric at every lag (detection diagnostics).
RVector correlation_profile(const TimeSignal& signal, std::span<const int> preamble);

}  // namespace otafl::grid
