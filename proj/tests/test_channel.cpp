#include <gtest/gtest.h>

#include <cmath>

#include "otafl/channel.hpp"
#include "otafl/grid.hpp"
#include "otafl/rng.hpp"
#include "test_util.hpp"

using namespace otafl;
using namespace otafl::channel;
using otafl::testing::max_abs_diff;
using otafl::testing::random_grid;

namespace {

ChannelModel model_of(ChannelKind kind) {
  ChannelModel m;
  m.kind = kind;
  return m;
}

grid::TimeSignal random_signal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  grid::TimeSignal s{CVector(n), 3.84e6};
  for (auto& v : s.samples) v = rng.complex_normal();
  return s;
}

}  // namespace

TEST(Realize, IdealIsUnitGainNoiseless) {
  const auto ch = realize_channel(model_of(ChannelKind::ideal), LinkBudget{}, 256, 5);
  EXPECT_EQ(ch.noise_variance, 0.0);
  for (const auto& g : ch.gains) EXPECT_EQ(g, Complex(1.0, 0.0));
}

TEST(Realize, RayleighUnitSecondMoment) {
  const auto ch = realize_channel(model_of(ChannelKind::rayleigh_per_subcarrier), LinkBudget{}, 100000, 17);
  double power = 0.0;
  for (const auto& g : ch.gains) power += std::norm(g);
  power /= static_cast<double>(ch.gains.size());
  EXPECT_GE(power, 0.99);
  EXPECT_LE(power, 1.01);
}

TEST(Realize, FlatBlockReplicatesOneGain) {
  const auto ch = realize_channel(model_of(ChannelKind::flat_block), LinkBudget{}, 64, 3);
  for (const auto& g : ch.gains) EXPECT_EQ(g, ch.gains.front());
}

TEST(Realize, PathlossScalesFading) {
  const ChannelModel m = model_of(ChannelKind::pathloss_fading);
  LinkBudget b;
  b.distance = 100.0;
  const auto ch = realize_channel(m, b, 100000, 9);
  double power = 0.0;
  for (const auto& g : ch.gains) power += std::norm(g);
  power /= static_cast<double>(ch.gains.size());
  const double expect_db = -pathloss_db(m, b.distance);
  EXPECT_NEAR(10.0 * std::log10(power), expect_db, 0.05);
}

TEST(Realize, Deterministic) {
  const auto m = model_of(ChannelKind::rayleigh_per_subcarrier);
  const auto a = realize_channel(m, LinkBudget{}, 256, 42);
  const auto b = realize_channel(m, LinkBudget{}, 256, 42);
  const auto c = realize_channel(m, LinkBudget{}, 256, 43);
  EXPECT_EQ(a.gains, b.gains);
  EXPECT_NE(a.gains, c.gains);
}

TEST(ThermalNoise, ClosedForm) {
  LinkBudget b;
  b.noise_psd_dbm_hz = -174.0;
  b.bandwidth = 10e6;
  const double mw = std::pow(10.0, -17.4) * 1e7;
  EXPECT_NEAR(thermal_noise_watts(b) / (mw * 1e-3), 1.0, 1e-12);
  EXPECT_NEAR(thermal_noise_watts(b), 3.981e-14, 1e-17);
}

TEST(ThermalNoise, RealizationCarriesBudgetNoise) {
  const auto ch = realize_channel(model_of(ChannelKind::flat_block), LinkBudget{}, 8, 1);
  EXPECT_DOUBLE_EQ(ch.noise_variance, thermal_noise_watts(LinkBudget{}));
}

TEST(Decorrelate, EndpointsAndPower) {
  const auto m = model_of(ChannelKind::rayleigh_per_subcarrier);
  const auto ch = realize_channel(m, LinkBudget{}, 50000, 1);
  EXPECT_EQ(decorrelate(ch, m, LinkBudget{}, 0.0, 2).gains, ch.gains);
  const auto half = decorrelate(ch, m, LinkBudget{}, 0.5, 2);
  double p = 0.0;
  for (const auto& g : half.gains) p += std::norm(g);
  EXPECT_NEAR(p / 50000.0, 1.0, 0.03);
  EXPECT_THROW(decorrelate(ch, m, LinkBudget{}, 1.5, 2), ConfigError);
}

TEST(Apply, IdealNoiselessIsIdentity) {
  const grid::GridConfig cfg;
  const auto g = random_grid(cfg, 1);
  const auto ch = realize_channel(model_of(ChannelKind::ideal), LinkBudget{}, cfg.subcarriers, 0);
  EXPECT_EQ(max_abs_diff(apply_channel(g, ch, 3).data, g.data), 0.0);
}

TEST(Apply, GainTwoDoubles) {
  const grid::GridConfig cfg;
  const auto g = random_grid(cfg, 2);
  ChannelRealization ch;
  ch.gains.assign(cfg.subcarriers, Complex(2.0, 0.0));
  EXPECT_LE(max_abs_diff(apply_channel(g, ch, 3).data, (2.0 * g.data).eval()), 1e-15);
}

TEST(Apply, NoiseVarianceWithinTwoPercent) {
  grid::GridConfig cfg;
  cfg.symbols_per_slot = 400;  // 400 x 256 = 102400 elements
  ChannelRealization ch;
  ch.gains.assign(cfg.subcarriers, Complex(1.0, 0.0));
  ch.noise_variance = 0.37;
  const auto y = apply_channel(grid::ResourceGrid::zeros(cfg), ch, 77);
  const double var = y.data.squaredNorm() / static_cast<double>(y.data.size());
  EXPECT_NEAR(var / ch.noise_variance, 1.0, 0.02);
}

TEST(Apply, BlockFadingSameGainPerRow) {
  const grid::GridConfig cfg;
  grid::ResourceGrid ones{CMatrix::Ones(14, 256)};
  const auto ch = realize_channel(model_of(ChannelKind::rayleigh_per_subcarrier), LinkBudget{}, 256, 8);
  auto noiseless = ch;
  noiseless.noise_variance = 0.0;
  const auto y = apply_channel(ones, noiseless, 1);
  for (Eigen::Index r = 0; r < 14; ++r) {
    for (Eigen::Index n = 0; n < 256; ++n) EXPECT_EQ(y.data(r, n), ch.gains[static_cast<std::size_t>(n)]);
  }
}

TEST(Apply, DimensionMismatchThrows) {
  const grid::GridConfig cfg;
  ChannelRealization ch;
  ch.gains.assign(10, Complex(1.0, 0.0));
  EXPECT_THROW(apply_channel(grid::ResourceGrid::zeros(cfg), ch, 0), DimensionError);
}

TEST(Apply, NoiseDeterministicPerSeed) {
  const grid::GridConfig cfg;
  auto ch = realize_channel(model_of(ChannelKind::rayleigh_per_subcarrier), LinkBudget{}, 256, 8);
  ch.noise_variance = 0.1;
  const auto g = random_grid(cfg, 4);
  EXPECT_EQ(apply_channel(g, ch, 5).data, apply_channel(g, ch, 5).data);
}

TEST(Superpose, SingleIsIdentity) {
  const auto s = random_signal(500, 1);
  const auto out = superpose({{s, 0}}, 0.0, 0);
  EXPECT_EQ(out.samples, s.samples);
}

TEST(Superpose, TwoIdenticalDouble) {
  const auto s = random_signal(500, 1);
  const auto out = superpose({{s, 0}, {s, 0}}, 0.0, 0);
  for (std::size_t t = 0; t < s.size(); ++t) EXPECT_EQ(out.samples[t], 2.0 * s.samples[t]);
}

TEST(Superpose, LengthAndLinearity) {
  const auto s1 = random_signal(300, 1);
  const auto s2 = random_signal(200, 2);
  const double a = 0.7;
  const double b = -1.3;
  auto scaled = [](grid::TimeSignal s, double k) {
    for (auto& v : s.samples) v *= k;
    return s;
  };
  const auto lhs = superpose({{scaled(s1, a), 3}, {scaled(s2, b), 150}}, 0.0, 0);
  const auto x1 = superpose({{s1, 3}, {grid::TimeSignal{CVector(200), 3.84e6}, 150}}, 0.0, 0);
  const auto x2 = superpose({{grid::TimeSignal{CVector(300), 3.84e6}, 3}, {s2, 150}}, 0.0, 0);
  ASSERT_EQ(lhs.size(), 350u);
  for (std::size_t t = 0; t < lhs.size(); ++t) {
    EXPECT_LE(std::abs(lhs.samples[t] - (a * x1.samples[t] + b * x2.samples[t])), 1e-14);
  }
}

TEST(Superpose, MixedRatesThrow) {
  auto s1 = random_signal(10, 1);
  auto s2 = random_signal(10, 2);
  s2.sample_rate = 1.0;
  EXPECT_THROW(superpose({{s1, 0}, {s2, 0}}, 0.0, 0), ConfigError);
}

TEST(Superpose, TwoFramesGiveTwoPeaks) {
  const grid::GridConfig cfg;
  const auto spec = grid::default_frame_spec(cfg, 0);
  const auto frame = grid::assemble_frame(spec, {}, cfg);
  constexpr std::size_t d = 600;
  const auto rx = superpose({{frame, 0}, {frame, d}}, 0.0, 0);
  const RVector metric = grid::correlation_profile(rx, spec.preamble);
  std::vector<std::size_t> peaks;
  for (std::size_t lag = 0; lag < metric.size(); ++lag) {
    if (metric[lag] > 0.8) peaks.push_back(lag);
  }
  ASSERT_EQ(peaks.size(), 2u);
  EXPECT_EQ(peaks[1] - peaks[0], d);
}
