#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "otafl/grid.hpp"
#include "otafl/rng.hpp"
#include "test_util.hpp"

using namespace otafl;
using namespace otafl::grid;
using otafl::testing::max_abs_diff;
using otafl::testing::periodic_corr;
using otafl::testing::random_grid;

namespace {

TimeSignal delayed(const TimeSignal& s, std::size_t d, std::size_t tail = 0) {
  TimeSignal out{CVector(d, Complex{}), s.sample_rate};
  out.samples.insert(out.samples.end(), s.samples.begin(), s.samples.end());
  out.samples.resize(out.samples.size() + tail);
  return out;
}

}  // namespace

TEST(Gold, AutocorrelationPeakIsLength) {
  const auto g = gold_sequence(7, 0, 127);
  EXPECT_EQ(periodic_corr(g, g, 0), 127);
}

TEST(Gold, CrossCorrelationIsThreeValued) {
  const auto a = gold_sequence(7, 0, 127);
  const auto b = gold_sequence(7, 1, 127);
  for (std::size_t lag = 0; lag < 127; ++lag) {
    const long c = periodic_corr(a, b, lag);
    EXPECT_TRUE(c == -17 || c == -1 || c == 15) << "lag " << lag << " value " << c;
  }
}

TEST(Gold, Degree7FamilyBoundedExhaustively) {
  constexpr long bound = 17;
  std::vector<std::vector<int>> family;
  for (std::size_t k = 0; k < 129; ++k) family.push_back(gold_sequence(7, k, 127));
  for (std::size_t i = 0; i < family.size(); ++i) {
    for (std::size_t lag = 1; lag < 127; ++lag) {
      ASSERT_LE(std::abs(periodic_corr(family[i], family[i], lag)), bound) << "index " << i;
    }
    for (std::size_t j = i + 1; j < family.size(); ++j) {
      for (std::size_t lag = 0; lag < 127; ++lag) {
        ASSERT_LE(std::abs(periodic_corr(family[i], family[j], lag)), bound) << i << " vs " << j;
      }
    }
  }
}

TEST(Gold, OtherDegreesMeetTheirBound) {
  for (int m : {5, 9}) {
    const std::size_t n = (std::size_t{1} << m) - 1;
    const long bound = (1L << ((m + 1) / 2)) + 1;
    for (std::size_t i : {std::size_t{0}, std::size_t{3}, n}) {
      const auto a = gold_sequence(m, i, n);
      const auto b = gold_sequence(m, i + 1, n);
      for (std::size_t lag = 0; lag < n; ++lag) {
        if (lag) EXPECT_LE(std::abs(periodic_corr(a, a, lag)), bound);
        EXPECT_LE(std::abs(periodic_corr(a, b, lag)), bound);
      }
    }
  }
}

TEST(Gold, Errors) {
  EXPECT_THROW(gold_sequence(6, 0, 10), ConfigError);
  EXPECT_THROW(gold_sequence(7, 0, 128), BoundsError);
  EXPECT_THROW(gold_sequence(7, 129, 127), BoundsError);
}

TEST(Pilots, UnitModulusAndFixed) {
  const auto p = qpsk_pilots(256);
  for (const auto& v : p) EXPECT_NEAR(std::abs(v), 1.0, 1e-15);
  EXPECT_EQ(p, qpsk_pilots(256));
}

TEST(Ofdm, ZeroGridGivesZeroSignal) {
  const GridConfig cfg;
  const auto s = ofdm_modulate(ResourceGrid::zeros(cfg), cfg);
  EXPECT_EQ(s.size(), cfg.symbols_per_slot * cfg.samples_per_symbol());
  for (const auto& v : s.samples) EXPECT_EQ(v, Complex{});
  const auto g = ofdm_demodulate(s, cfg, 0);
  EXPECT_EQ(g.data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Ofdm, RoundTrip) {
  for (const GridConfig cfg : {GridConfig{}, GridConfig{72, 14, 15e3, 128, 9}}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto g = random_grid(cfg, seed);
      const auto back = ofdm_demodulate(ofdm_modulate(g, cfg), cfg, 0);
      EXPECT_LE(max_abs_diff(back.data, g.data), 1e-12);
    }
  }
}

TEST(Ofdm, UnitaryParseval) {
  const GridConfig cfg;
  const auto g = random_grid(cfg, 7);
  const auto s = ofdm_modulate(g, cfg);
  double useful = 0.0;
  for (std::size_t sym = 0; sym < cfg.symbols_per_slot; ++sym) {
    for (std::size_t i = 0; i < cfg.fft_size; ++i) {
      useful += std::norm(s.samples[sym * cfg.samples_per_symbol() + cfg.cp_len + i]);
    }
  }
  EXPECT_NEAR(useful / g.data.squaredNorm(), 1.0, 1e-12);
}

TEST(Ofdm, CpOffsetIsPhaseRamp) {
  const GridConfig cfg;
  const auto g = random_grid(cfg, 11);
  const auto s = delayed(ofdm_modulate(g, cfg), cfg.cp_len);
  for (std::size_t k = 0; k < cfg.cp_len; ++k) {
    const auto back = ofdm_demodulate(s, cfg, cfg.cp_len - k);
    CMatrix expect = g.data;
    for (std::size_t n = 0; n < cfg.subcarriers; ++n) {
      const double bin = static_cast<double>(subcarrier_bin(n, cfg));
      const Complex ramp = std::polar(1.0, -2.0 * std::numbers::pi * bin * static_cast<double>(k) /
                                               static_cast<double>(cfg.fft_size));
      expect.col(static_cast<Eigen::Index>(n)) *= ramp;
    }
    EXPECT_LE(max_abs_diff(back.data, expect), 1e-11) << "k = " << k;
  }
}

TEST(Ofdm, Errors) {
  const GridConfig cfg;
  ResourceGrid bad{CMatrix::Zero(3, 4)};
  EXPECT_THROW(ofdm_modulate(bad, cfg), DimensionError);
  const auto s = ofdm_modulate(ResourceGrid::zeros(cfg), cfg);
  EXPECT_THROW(ofdm_demodulate(s, cfg, 1), BoundsError);
}

TEST(Frame, LengthAndEmptyPayload) {
  const GridConfig cfg;
  const auto spec0 = default_frame_spec(cfg, 0);
  const auto f = assemble_frame(spec0, {}, cfg);
  EXPECT_EQ(f.size(), 127 + cfg.samples_per_symbol());
  for (std::size_t slots : {1, 3}) {
    const auto spec = default_frame_spec(cfg, slots);
    EXPECT_EQ(frame_length(spec, cfg), 127 + (1 + 14 * slots) * 272);
  }
  for (std::size_t i = 0; i < 127; ++i) {
    EXPECT_EQ(f.samples[i], Complex(static_cast<double>(spec0.preamble[i]), 0.0));
  }
}

TEST(Frame, PayloadCountMismatchThrows) {
  const GridConfig cfg;
  EXPECT_THROW(assemble_frame(default_frame_spec(cfg, 2), {ResourceGrid::zeros(cfg)}, cfg), DimensionError);
}

TEST(Frame, DisassembleAtDetectedOffset) {
  const GridConfig cfg;
  const auto spec = default_frame_spec(cfg, 2);
  const std::vector<ResourceGrid> payload{random_grid(cfg, 1), random_grid(cfg, 2)};
  const auto frame = assemble_frame(spec, payload, cfg);
  const auto rx = delayed(frame, 37, 50);
  const auto det = detect_frame(rx, spec.preamble);
  ASSERT_EQ(det.offset, 37u);
  EXPECT_NEAR(det.peak_metric, 1.0, 1e-12);
  const auto out = disassemble_frame(rx, spec, cfg, det.offset);
  ASSERT_EQ(out.payload.size(), 2u);
  for (std::size_t s = 0; s < 2; ++s) EXPECT_LE(max_abs_diff(out.payload[s].data, payload[s].data), 1e-12);
  for (std::size_t k = 0; k < cfg.subcarriers; ++k) EXPECT_LE(std::abs(out.pilot[k] - spec.pilot_values[k]), 1e-12);
}

TEST(Frame, BackoffBeyondCpThrows) {
  const GridConfig cfg;
  const auto spec = default_frame_spec(cfg, 0);
  const auto f = assemble_frame(spec, {}, cfg);
  EXPECT_THROW(disassemble_frame(f, spec, cfg, 0, cfg.cp_len + 1), BoundsError);
}

TEST(Detect, StartAtZero) {
  const GridConfig cfg;
  const auto spec = default_frame_spec(cfg, 1);
  const auto f = assemble_frame(spec, {random_grid(cfg, 3)}, cfg);
  EXPECT_EQ(detect_frame(f, spec.preamble).offset, 0u);
}

TEST(Detect, TranslationEquivariant) {
  const GridConfig cfg;
  const auto spec = default_frame_spec(cfg, 1);
  const auto f = assemble_frame(spec, {random_grid(cfg, 4)}, cfg);
  const std::size_t base = detect_frame(f, spec.preamble).offset;
  for (std::size_t z : {1, 5, 100, 999}) {
    EXPECT_EQ(detect_frame(delayed(f, z), spec.preamble).offset, base + z);
  }
}

TEST(Detect, NoiseRarelyCrossesThreshold) {
  const GridConfig cfg;
  const auto spec = default_frame_spec(cfg, 0);
  constexpr int trials = 10000;
  int false_alarms = 0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(t)}));
    TimeSignal noise{CVector(spec.preamble.size() + 64), cfg.sample_rate()};
    for (auto& v : noise.samples) v = rng.complex_normal();
    if (detect_frame(noise, spec.preamble).peak_metric >= 0.3) ++false_alarms;
  }
  EXPECT_LE(false_alarms, trials / 1000);
}
