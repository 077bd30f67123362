#include "otafl/accounting.hpp"

#include <cmath>

#include "otafl/weightcodec.hpp"

namespace otafl::accounting {

grid::GridConfig SlotFormat::grid() const {
  grid::GridConfig cfg;
  cfg.subcarriers = subcarriers;
  cfg.symbols_per_slot = symbols_per_slot;
  cfg.subcarrier_spacing = subcarrier_spacing;
  return cfg;
}

SlotFormat SlotFormat::from_grid(const grid::GridConfig& cfg) {
  SlotFormat fmt;
  fmt.symbols_per_slot = cfg.symbols_per_slot;
  fmt.subcarriers = cfg.subcarriers;
  fmt.subcarrier_spacing = cfg.subcarrier_spacing;
  return fmt;
}

SpectralProfile SpectralProfile::uniform(std::size_t num_ues, double m) {
  return {RVector(num_ues, m)};
}

void SpectralProfile::validate() const {
  if (bits_per_re.empty()) throw ConfigError("spectral profile needs at least one UE");
  for (double m : bits_per_re) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("spectral efficiency must be positive");
  }
}

void EnergyModel::validate() const {
  if (!std::isfinite(tx_power_dbm)) throw ConfigError("energy.tx_power_dbm must be finite");
  if (!(slot_duration > 0.0)) throw ConfigError("energy.slot_duration must be positive");
  if (!(fixed_overhead >= 0.0)) throw ConfigError("energy.fixed_overhead must be nonnegative");
}

double EnergyModel::per_slot_energy() const {
  return std::pow(10.0, (tx_power_dbm - 30.0) / 10.0) * slot_duration;
}

double digital_slots_raw(std::size_t params, double bits, double bits_per_re, const SlotFormat& fmt) {
  if (params == 0 || !(bits > 0.0) || !(bits_per_re > 0.0) || fmt.res_per_slot() == 0) {
    throw PreconditionError("digital_slots: arguments must be positive");
  }
  return static_cast<double>(params) * bits / (bits_per_re * static_cast<double>(fmt.res_per_slot()));
}

std::size_t digital_slots(std::size_t params, double bits, const SpectralProfile& profile,
                          const SlotFormat& fmt) {
  profile.validate();
  std::size_t total = 0;
  for (double m : profile.bits_per_re) {
    total += static_cast<std::size_t>(std::ceil(digital_slots_raw(params, bits, m, fmt)));
  }
  return total;
}

std::size_t ota_slots(std::size_t params, const SlotFormat& fmt) {
  return codec::slot_plan(params, fmt.grid()).slots;
}

double spectrum_gain(std::size_t params, double bits, const SpectralProfile& profile,
                     const SlotFormat& fmt) {
  return static_cast<double>(digital_slots(params, bits, profile, fmt)) /
         static_cast<double>(ota_slots(params, fmt));
}

double energy_for_ue_slots(double total_ue_slots, const EnergyModel& model) {
  model.validate();
  return model.per_slot_energy() * (model.fixed_overhead + total_ue_slots);
}

double energy(std::size_t num_ues, double slots_per_ue, const EnergyModel& model) {
  if (num_ues == 0) throw PreconditionError("energy: M must be at least 1");
  return energy_for_ue_slots(static_cast<double>(num_ues) * slots_per_ue, model);
}

double energy_gain(std::size_t params, double bits, const SpectralProfile& profile,
                   const SlotFormat& fmt, const EnergyModel& model) {
  const double e_digital =
      energy_for_ue_slots(static_cast<double>(digital_slots(params, bits, profile, fmt)), model);
  const double e_ota = energy(profile.num_ues(), static_cast<double>(ota_slots(params, fmt)), model);
  return e_digital / e_ota;
}

std::vector<AccountingRow> accounting_table(std::size_t m_lo, std::size_t m_hi, std::size_t params,
                                            double bits, double bits_per_re, const SlotFormat& fmt,
                                            const EnergyModel& model) {
  if (m_lo == 0 || m_hi < m_lo) throw ConfigError("M range must satisfy 1 <= lo <= hi");
  std::vector<AccountingRow> rows;
  const std::size_t ota = ota_slots(params, fmt);
  for (std::size_t m = m_lo; m <= m_hi; ++m) {
    const SpectralProfile profile = SpectralProfile::uniform(m, bits_per_re);
    const std::size_t dig = digital_slots(params, bits, profile, fmt);
    rows.push_back({m, "digital", dig, spectrum_gain(params, bits, profile, fmt),
                    energy_for_ue_slots(static_cast<double>(dig), model)});
    rows.push_back({m, "ota", ota, energy_gain(params, bits, profile, fmt, model),
                    energy(m, static_cast<double>(ota), model)});
  }
  return rows;
}

}  // namespace otafl::accounting
