#include <gtest/gtest.h>

#include <cmath>

#include "otafl/accounting.hpp"

using namespace otafl;
using namespace otafl::accounting;

namespace {

constexpr std::size_t kP = 71666;
constexpr double kM = kDefaultSpectralEfficiency;
const SlotFormat kFmt;

double gain_at(std::size_t m) { return energy_gain(kP, 32, SpectralProfile::uniform(m, kM), kFmt, EnergyModel{}); }

}  // namespace

TEST(Slots, DigitalPaperFigures) {
  EXPECT_EQ(kFmt.res_per_slot(), 3584u);
  EXPECT_NEAR(digital_slots_raw(kP, 32, kM, kFmt), 86.396, 5e-4);
  EXPECT_EQ(digital_slots(kP, 32, SpectralProfile::uniform(1, kM), kFmt), 87u);
  EXPECT_EQ(digital_slots(kP, 32, SpectralProfile::uniform(5, kM), kFmt), 435u);
  EXPECT_EQ(digital_slots(kP, 8, SpectralProfile::uniform(1, kM), kFmt), 22u);
  EXPECT_NEAR(digital_slots_raw(kP, 8, kM, kFmt), 21.599, 5e-4);
}

TEST(Slots, Int8RawIsQuarter) {
  for (std::size_t p : {1000, 7168, 71666, 1000000}) {
    EXPECT_DOUBLE_EQ(digital_slots_raw(p, 32, kM, kFmt), 4.0 * digital_slots_raw(p, 8, kM, kFmt));
  }
}

TEST(Slots, Ota) {
  EXPECT_EQ(ota_slots(kP, kFmt), 10u);
  EXPECT_EQ(ota_slots(7168, kFmt), 1u);
}

TEST(Slots, MixedProfileCeilsPerUe) {
  const SpectralProfile p{{kM, kM / 2.0}};
  EXPECT_EQ(digital_slots(kP, 32, p, kFmt), 87u + 173u);
  EXPECT_THROW((SpectralProfile{{1.0, 0.0}}.validate()), ConfigError);
}

TEST(Spectrum, Gains) {
  EXPECT_DOUBLE_EQ(spectrum_gain(kP, 32, SpectralProfile::uniform(5, kM), kFmt), 43.5);
  EXPECT_DOUBLE_EQ(spectrum_gain(kP, 32, SpectralProfile::uniform(1, kM), kFmt), 8.7);
  EXPECT_DOUBLE_EQ(spectrum_gain(kP, 32, SpectralProfile::uniform(20, kM), kFmt), 174.0);
  double prev = 0.0;
  for (std::size_t m = 1; m <= 30; ++m) {
    const double g = spectrum_gain(kP, 32, SpectralProfile::uniform(m, kM), kFmt);
    EXPECT_GE(g, prev);
    prev = g;
  }
}

TEST(Energy, PerSlot) {
  EXPECT_NEAR(EnergyModel{}.per_slot_energy(), 1e-4, 1e-18);
  EXPECT_NEAR(energy(2, 10, EnergyModel{}), 1e-4 * (94.0 / 3.0 + 20.0), 1e-15);
  EXPECT_NEAR(energy_for_ue_slots(174, EnergyModel{}), 1e-4 * (94.0 / 3.0 + 174.0), 1e-15);
}

TEST(Energy, CalibratedGains) {
  EXPECT_NEAR(gain_at(2), 4.0, 1e-12);
  EXPECT_NEAR(gain_at(20), 7.657, 5e-4);
  EXPECT_GE(gain_at(20), 7.0);
  EXPECT_LE(gain_at(20), 8.0);
}

TEST(Energy, IncreasingAndBounded) {
  double prev = 0.0;
  for (std::size_t m = 1; m <= 50; ++m) {
    const double g = gain_at(m);
    EXPECT_GT(g, prev);
    prev = g;
  }
  const double far = gain_at(1000000);
  EXPECT_LT(far, 8.7);
  EXPECT_GT(far, 8.69);
}

TEST(Table, RowsPerM) {
  const auto rows = accounting_table(1, 5, kP, 32, kM, kFmt, EnergyModel{});
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[8].num_ues, 5u);
  EXPECT_EQ(rows[8].mode, "digital");
  EXPECT_EQ(rows[8].slots, 435u);
  EXPECT_DOUBLE_EQ(rows[8].gain, 43.5);
  EXPECT_EQ(rows[9].mode, "ota");
  EXPECT_EQ(rows[9].slots, 10u);
  EXPECT_NEAR(rows[3].gain, 4.0, 1e-12);
}
