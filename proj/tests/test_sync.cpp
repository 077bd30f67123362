#include <gtest/gtest.h>

#include <algorithm>

#include "otafl/channel.hpp"
#include "otafl/grid.hpp"
#include "otafl/sync.hpp"

using namespace otafl;
using namespace otafl::sync;

namespace {

constexpr double kFs = 3.84e6;

SyncConfig off(std::size_t spread, std::uint64_t seed = 0) {
  SyncConfig c;
  c.mode = SyncMode::ptp_off;
  c.off_spread = spread;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Offsets, PtpOnWithinBound) {
  SyncConfig c;
  EXPECT_EQ(max_offset(c, kFs), 4u);
  std::vector<bool> seen(5, false);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    c.seed = seed;
    for (std::size_t d : draw_offsets(c, 10, kFs)) {
      ASSERT_LE(d, 4u);
      seen[d] = true;
    }
  }
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
}

TEST(Offsets, ZeroSpreadIsAligned) {
  for (std::size_t d : draw_offsets(off(0), 20, kFs)) EXPECT_EQ(d, 0u);
}

TEST(Offsets, UniformSupportReached) {
  const auto d = draw_offsets(off(1000, 3), 10000, kFs);
  const std::size_t hi = *std::max_element(d.begin(), d.end());
  EXPECT_LE(hi, 1000u);
  EXPECT_GE(hi, 900u);
}

TEST(Offsets, TruncatedGaussianWithinSupport) {
  auto c = off(100, 4);
  c.shape = OffsetShape::truncated_gaussian;
  const auto d = draw_offsets(c, 10000, kFs);
  EXPECT_LE(*std::max_element(d.begin(), d.end()), 100u);
  double mean = 0.0;
  for (std::size_t v : d) mean += static_cast<double>(v);
  mean /= 10000.0;
  EXPECT_LT(mean, 50.0);  // mass concentrated near zero, unlike uniform
}

TEST(Offsets, DeterministicPerSeed) {
  EXPECT_EQ(draw_offsets(off(500, 9), 8, kFs), draw_offsets(off(500, 9), 8, kFs));
  EXPECT_NE(draw_offsets(off(500, 9), 8, kFs), draw_offsets(off(500, 10), 8, kFs));
}

TEST(Offsets, PhaseOffsetsZeroByDefault) {
  for (double p : draw_phase_offsets(SyncConfig{}, 5)) EXPECT_EQ(p, 0.0);
  SyncConfig c;
  c.phase_offset_std = 0.1;
  const auto p = draw_phase_offsets(c, 5);
  EXPECT_TRUE(std::any_of(p.begin(), p.end(), [](double v) { return v != 0.0; }));
}

TEST(Config, ParseAndValidate) {
  EXPECT_EQ(parse_sync_mode("ptp_off"), SyncMode::ptp_off);
  EXPECT_EQ(parse_offset_shape(to_string(OffsetShape::truncated_gaussian)), OffsetShape::truncated_gaussian);
  EXPECT_THROW(parse_sync_mode("gps"), ConfigError);
  SyncConfig c;
  c.ptp_bound = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(PeakSpread, ConstructedDelays) {
  const grid::GridConfig cfg;
  std::vector<std::vector<int>> codes;
  std::vector<channel::DelayedSignal> parts;
  const std::vector<std::size_t> delays{0, 0, 37, 5};
  for (std::size_t i = 0; i < delays.size(); ++i) {
    codes.push_back(grid::gold_sequence(9, i, 511));
    grid::TimeSignal s{{}, cfg.sample_rate()};
    for (int c : codes.back()) s.samples.emplace_back(static_cast<double>(c), 0.0);
    parts.push_back({s, delays[i]});
  }
  const auto rx = channel::superpose(parts, 0.0, 0);
  const auto peaks = peak_spread(rx, codes);
  ASSERT_EQ(peaks.size(), 4u);
  for (std::size_t i = 0; i < delays.size(); ++i) {
    EXPECT_EQ(peaks[i].ue_id, i);
    EXPECT_EQ(peaks[i].offset, delays[i]);
  }
  EXPECT_EQ(spread_of(peaks), 37u);
  EXPECT_EQ(spread_of(peak_spread(channel::superpose({parts[0], {parts[1].signal, 0}}, 0.0, 0),
                                  {codes[0], codes[1]})),
            0u);
}
