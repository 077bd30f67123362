#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "otafl/grid.hpp"

namespace otafl::accounting {

/// Numerology-0 uplink slot: 14 symbols x 256 subcarriers at 15 kHz, 1 ms.
struct SlotFormat {
  std::size_t symbols_per_slot = 14;
  std::size_t subcarriers = 256;
  double subcarrier_spacing = 15e3;
  double slot_duration = 1e-3;

  std::size_t res_per_slot() const { return symbols_per_slot * subcarriers; }
  grid::GridConfig grid() const;

  static SlotFormat from_grid(const grid::GridConfig& cfg);
};

/// Spectral efficiency per UE in information bits per resource element.
struct SpectralProfile {
  std::vector<double> bits_per_re;

  static SpectralProfile uniform(std::size_t num_ues, double m);
  std::size_t num_ues() const { return bits_per_re.size(); }
  void validate() const;
};

/// 256-QAM, code rate 0.92 PUSCH at 20 m separation.
inline constexpr double kDefaultSpectralEfficiency = 7.4063;

/// Per-round fixed overhead, in units of one UE-slot of transmit energy.
/// Chosen so that two UEs give exactly a 4x energy gain with 87 vs 10
/// slots per UE: (c + 174) / (c + 20) = 4.
inline constexpr double kCalibratedOverhead = 94.0 / 3.0;

struct EnergyModel {
  double tx_power_dbm = 20.0;
  double slot_duration = 1e-3;
  double fixed_overhead = kCalibratedOverhead;

  void validate() const;
  /// Joules for one UE transmitting for one slot.
  double per_slot_energy() const;

  bool operator==(const EnergyModel&) const = default;
};

/// (P * b) / (m * K) before rounding.
double digital_slots_raw(std::size_t params, double bits, double bits_per_re, const SlotFormat& fmt);

/// Sum over UEs of ceil((P * b) / (m_k * K)); slots are not shared across UEs.
std::size_t digital_slots(std::size_t params, double bits, const SpectralProfile& profile,
                          const SlotFormat& fmt);

/// rho of the slot plan; independent of the number of UEs.
std::size_t ota_slots(std::size_t params, const SlotFormat& fmt);

double spectrum_gain(std::size_t params, double bits, const SpectralProfile& profile,
                     const SlotFormat& fmt);

/// e * (fixed_overhead + total UE-slots transmitted), e = per-slot energy.
double energy_for_ue_slots(double total_ue_slots, const EnergyModel& model);

/// e * fixed_overhead + M * slots_per_ue * e.
double energy(std::size_t num_ues, double slots_per_ue, const EnergyModel& model);

/// E_digital / E_ota for one round.
double energy_gain(std::size_t params, double bits, const SpectralProfile& profile,
                   const SlotFormat& fmt, const EnergyModel& model);

struct AccountingRow {
  std::size_t num_ues = 0;
  std::string mode;
  std::size_t slots = 0;
  double gain = 0.0;
  double energy_j = 0.0;
};

/// One digital and one OTA row per M in [m_lo, m_hi]; gain columns hold the
/// spectrum gain (digital rows) and energy gain (ota rows) respectively.
std::vector<AccountingRow> accounting_table(std::size_t m_lo, std::size_t m_hi, std::size_t params,
                                            double bits, double bits_per_re, const SlotFormat& fmt,
                                            const EnergyModel& model);

}  // namespace otafl::accounting
