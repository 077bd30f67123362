// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "otafl/accounting.hpp"
#include "otafl/grid.hpp"
#include "otafl/ota.hpp"
#include "otafl/rng.hpp"
#include "otafl/scenario.hpp"
#include "otafl/sync.hpp"
#include "otafl/weightcodec.hpp"
#include "test_util.hpp"

using namespace otafl;
using otafl::testing::max_abs;
using otafl::testing::max_abs_diff;
using otafl::testing::periodic_corr;
using otafl::testing::random_grid;
using otafl::testing::random_weights;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict slot_arithmetic() {
  const accounting::SlotFormat fmt_;
  const double m = accounting::kDefaultSpectralEfficiency;
  const double raw = accounting::digital_slots_raw(71666, 32, m, fmt_);
  const auto one = accounting::digital_slots(71666, 32, accounting::SpectralProfile::uniform(1, m), fmt_);
  const auto five = accounting::digital_slots(71666, 32, accounting::SpectralProfile::uniform(5, m), fmt_);
  const auto ota = accounting::ota_slots(71666, fmt_);
  const double gain = accounting::spectrum_gain(71666, 32, accounting::SpectralProfile::uniform(5, m), fmt_);
  const bool ok = std::abs(raw - 86.396) <= 0.001 && one == 87 && five == 435 && ota == 10 && gain == 43.5;
  return {ok, "raw " + fmt("%.4f", raw) + ", 1 UE " + std::to_string(one) + ", 5 UEs " + std::to_string(five) +
                  ", OTA " + std::to_string(ota) + ", gain " + fmt("%.2f", gain)};
}

Verdict oracle_equivalence() {
  ota::PhyConfig phy;
  phy.channel.kind = channel::ChannelKind::ideal;
  phy.sync.mode = sync::SyncMode::ptp_off;
  phy.sync.off_spread = 0;
  double worst = 0.0;
  for (std::size_t p : {2, 1000, 71666}) {
    for (std::size_t m : {1, 2, 5}) {
      std::vector<codec::WeightVector> deltas;
      for (std::size_t i = 0; i < m; ++i) deltas.push_back(random_weights(p, derive_seed(p, {m, i}), 0.01));
      const auto agg = ota::aggregate_ota(deltas, phy, p + m);
      if (agg.aborted) return {false, "round aborted at P=" + std::to_string(p)};
      const auto oracle = fl::mean_delta(deltas);
      worst = std::max(worst, max_abs_diff(agg.recovered.values, oracle.values) / max_abs(oracle.values));
    }
  }
  return {worst <= 1e-9, "max relative error " + fmt("%.2e", worst) + " (bound 1e-9)"};
}

Verdict round_trips() {
  const grid::GridConfig cfg;
  double codec_err = 0.0;
  for (std::uint64_t c = 0; c < 500; ++c) {
    Rng rng(derive_seed(3, {c}));
    const auto p = static_cast<std::size_t>(rng.uniform_int(1, 80000));
    const auto w = random_weights(p, c, 0.001 + rng.uniform());
    const auto scaled = codec::scale_updates(w);
    const auto plan = codec::slot_plan(p, cfg);
    const auto back = codec::unmap_from_grids(codec::map_to_grids(codec::pack_complex(scaled.values), plan, cfg),
                                              plan, scaled.scale, cfg);
    codec_err = std::max(codec_err, max_abs_diff(back.values, w.values) / max_abs(w.values));
  }
  double ofdm_err = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto g = random_grid(cfg, s);
    ofdm_err = std::max(ofdm_err, max_abs_diff(grid::ofdm_demodulate(grid::ofdm_modulate(g, cfg), cfg, 0).data, g.data));
  }
  bool gold_ok = true;
  const auto a = grid::gold_sequence(7, 0, 127);
  const auto b = grid::gold_sequence(7, 1, 127);
  for (std::size_t lag = 0; lag < 127; ++lag) {
    const long v = periodic_corr(a, b, lag);
    gold_ok = gold_ok && (v == -17 || v == -1 || v == 15);
  }
  const bool ok = codec_err <= 1e-14 && ofdm_err <= 1e-12 && gold_ok;
  return {ok, "codec " + fmt("%.1e", codec_err) + " over 500 cases, OFDM " + fmt("%.1e", ofdm_err) +
                  ", Gold cross-correlation " + (gold_ok ? "three-valued" : "out of set")};
}

Verdict power_constraint() {
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t r = 0; r < 200; ++r) {
    Rng rng(derive_seed(4, {r}));
    ota::PhyConfig phy;
    phy.channel.kind = r % 3 == 0 ? channel::ChannelKind::flat_block : channel::ChannelKind::rayleigh_per_subcarrier;
    phy.snr_db = 5.0 + 25.0 * rng.uniform();
    phy.peak_power = std::pow(10.0, rng.uniform() * 2.0 - 1.0);
    phy.margin = 0.9;
    phy.csi_decorrelation = rng.uniform() < 0.3 ? 0.1 : 0.0;
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto p = static_cast<std::size_t>(rng.uniform_int(2, 20000));
    std::vector<codec::WeightVector> deltas;
    for (std::size_t i = 0; i < m; ++i) deltas.push_back(random_weights(p, derive_seed(r, {i}), rng.uniform()));
    const auto agg = ota::aggregate_ota(deltas, phy, r);
    worst_ratio = std::max(worst_ratio, agg.max_tx_power / phy.peak_power);
    if (agg.max_tx_power > phy.peak_power) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations in 200 rounds, peak/limit " +
                               fmt("%.3f", worst_ratio)};
}

scenario::Scenario convergence_scenario(std::uint64_t seed) {
  scenario::Scenario s;
  s.num_ues = 5;
  s.task.dim = 63;
  s.task.outputs = 112;  // (63 + 1) * 112 = 7168 parameters, one OTA slot
  s.experiment.rounds = 50;
  s.experiment.seed = seed;
  s.experiment.phy.snr_db = 20.0;
  s.experiment.phy.sync.mode = sync::SyncMode::ptp_on;
  s.experiment.train.learning_rate = 0.05;
  return s;
}

Verdict convergence_parity() {
  double ota_loss = 0.0;
  double digital_loss = 0.0;
  std::size_t ota_slots = 0;
  std::size_t digital_slots = 0;
  constexpr std::size_t seeds = 10;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    const auto s = convergence_scenario(seed);
    scenario::validate(s);
    const auto fed = scenario::build_federation(s);
    const auto init = scenario::initial_model(s, fed);
    for (ota::Mode mode : {ota::Mode::ota, ota::Mode::digital_fp32}) {
      auto cfg = s.experiment;
      cfg.mode = mode;
      const auto traces = ota::run_experiment(fed, init, cfg);
      std::size_t slots = 0;
      for (const auto& t : traces) slots += t.slots_used;
      if (mode == ota::Mode::ota) {
        ota_loss += traces.back().global_loss / seeds;
        ota_slots += slots;
      } else {
        digital_loss += traces.back().global_loss / seeds;
        digital_slots += slots;
      }
    }
  }
  const double rel = std::abs(ota_loss - digital_loss) / digital_loss;
  const double ratio = static_cast<double>(ota_slots) / static_cast<double>(digital_slots);
  return {rel <= 0.05 && ratio <= 1.0 / 40.0,
          "final loss OTA " + fmt("%.4f", ota_loss) + " vs digital " + fmt("%.4f", digital_loss) + " (" +
              fmt("%.2f", 100.0 * rel) + "% apart), slot ratio " + fmt("%.4f", ratio)};
}

Verdict synchronization() {
  const grid::GridConfig cfg;
  bool constructed = true;
  for (std::uint64_t t = 0; t < 20; ++t) {
    Rng rng(t);
    std::vector<std::vector<int>> codes;
    std::vector<channel::DelayedSignal> parts;
    std::vector<std::size_t> delays;
    for (std::size_t i = 0; i < 5; ++i) {
      codes.push_back(grid::gold_sequence(9, i, 511));
      grid::TimeSignal s{{}, cfg.sample_rate()};
      for (int c : codes.back()) s.samples.emplace_back(static_cast<double>(c), 0.0);
      delays.push_back(static_cast<std::size_t>(rng.uniform_int(0, 300)));
      parts.push_back({s, delays.back()});
    }
    const auto peaks = sync::peak_spread(channel::superpose(parts, 0.0, 0), codes);
    for (std::size_t i = 0; i < 5; ++i) constructed = constructed && peaks[i].offset == delays[i];
    const auto [lo, hi] = std::minmax_element(delays.begin(), delays.end());
    constructed = constructed && sync::spread_of(peaks) == *hi - *lo;
  }

  std::vector<scenario::SweepPoint> points{scenario::SweepPoint::parse("ptp_on")};
  for (const char* s : {"256", "64", "16", "4", "0"}) points.push_back(scenario::SweepPoint::parse(s));
  const auto rows = scenario::sync_sweep(scenario::Scenario{}, points, 20);
  const bool ptp_ok = rows[0].max_peak_spread <= 4;
  bool monotone = true;
  std::string trend;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (k > 1) monotone = monotone && rows[k].mean_agg_nmse_db <= rows[k - 1].mean_agg_nmse_db;
    trend += (k > 1 ? ", " : "") + std::to_string(rows[k].point.off_spread) + ":" +
             fmt("%.2f", rows[k].mean_agg_nmse_db);
  }
  return {constructed && ptp_ok && monotone,
          std::string("constructed delays ") + (constructed ? "exact" : "wrong") + ", ptp_on max spread " +
              std::to_string(rows[0].max_peak_spread) + ", NMSE dB by spread " + trend};
}

Verdict energy_reconstruction() {
  const accounting::SlotFormat f;
  const accounting::EnergyModel e;
  const double m = accounting::kDefaultSpectralEfficiency;
  const double g2 = accounting::energy_gain(71666, 32, accounting::SpectralProfile::uniform(2, m), f, e);
  const double g20 = accounting::energy_gain(71666, 32, accounting::SpectralProfile::uniform(20, m), f, e);
  const bool ok = std::abs(g2 - 4.0) <= 1e-12 && g20 >= 7.0 && g20 <= 8.0;
  return {ok, "gain(2) " + fmt("%.6f", g2) + ", gain(20) " + fmt("%.4f", g20)};
}

bool same_traces(const std::vector<ota::RoundTrace>& a, const std::vector<ota::RoundTrace>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t r = 0; r < a.size(); ++r) {
    const auto& x = a[r];
    const auto& y = b[r];
    if (x.round != y.round || x.agg_nmse_db != y.agg_nmse_db || x.loss_per_ue != y.loss_per_ue ||
        x.global_loss != y.global_loss || x.alpha != y.alpha || x.slots_used != y.slots_used ||
        x.energy_j != y.energy_j || x.aborted != y.aborted || x.peak_metric != y.peak_metric ||
        x.offset_spread != y.offset_spread || x.peak_spread != y.peak_spread) {
      return false;
    }
  }
  return true;
}

Verdict determinism() {
  scenario::Scenario s;
  s.experiment.rounds = 4;
  s.experiment.phy.sync.mode = sync::SyncMode::ptp_off;
  s.experiment.phy.sync.off_spread = 8;
  s.modes = {ota::Mode::ota, ota::Mode::digital_fp32, ota::Mode::digital_int8};
  s.task.kind = fl::TaskKind::two_layer_mlp_classification;
  const auto fed = scenario::build_federation(s);
  const auto init = scenario::initial_model(s, fed);
  std::size_t compared = 0;
  for (ota::Mode mode : s.modes) {
    auto cfg = s.experiment;
    cfg.mode = mode;
    cfg.threads = 1;
    const auto a = ota::run_experiment(fed, init, cfg);
    cfg.threads = 4;
    const auto b = ota::run_experiment(fed, init, cfg);
    const auto c = ota::run_experiment(fed, init, cfg);
    if (!same_traces(a, b) || !same_traces(b, c)) {
      return {false, "traces differ in mode " + ota::to_string(mode)};
    }
    compared += a.size();
  }
  return {true, std::to_string(compared) + " rounds bit-identical at 1 and 4 workers"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"slot arithmetic", slot_arithmetic},
      {"oracle equivalence", oracle_equivalence},
      {"codec and PHY round trips", round_trips},
      {"power constraint", power_constraint},
      {"convergence parity", convergence_parity},
      {"synchronization study", synchronization},
      {"energy reconstruction", energy_reconstruction},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu %s: %s - %s [%.1f s]\n", k + 1, criteria[k].first, v.pass ? "PASS" : "FAIL",
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
