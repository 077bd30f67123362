#include "otafl/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <utility>

#include "otafl/rng.hpp"

namespace otafl::grid {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (size, direction) and never freed.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    fftw_complex* in = fftw_alloc_complex(n);
    fftw_complex* out = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

void run_dft(std::size_t n, int sign, const Complex* in, Complex* out) {
  fftw_plan plan = PlanCache::instance().get(n, sign);
  // fftw_execute_dft does not write to its input for out-of-place plans.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) out[i] *= norm;
}

// (tap exponents of the feedback polynomial, excluding x^0)
struct PreferredPair {
  int degree;
  std::vector<int> poly_u;
  std::vector<int> poly_v;
};

const std::vector<PreferredPair>& preferred_pairs() {
  static const std::vector<PreferredPair> pairs = {
      {5, {5, 2}, {5, 4, 3, 2}},
      {7, {7, 3}, {7, 3, 2, 1}},
      {9, {9, 4}, {9, 6, 4, 3}},
      {11, {11, 2}, {11, 8, 5, 2}},
  };
  return pairs;
}

// Fibonacci LFSR for x^m + sum x^t + 1, all-ones initial state.
std::vector<std::uint8_t> m_sequence(int degree, const std::vector<int>& taps) {
  const std::size_t n = (std::size_t{1} << degree) - 1;
  std::vector<std::uint8_t> s(n + static_cast<std::size_t>(degree), 1);
  for (std::size_t i = 0; i + static_cast<std::size_t>(degree) < s.size(); ++i) {
    std::uint8_t bit = s[i];
    for (int t : taps) {
      if (t < degree) bit ^= s[i + static_cast<std::size_t>(t)];
    }
    s[i + static_cast<std::size_t>(degree)] = bit;
  }
  s.resize(n);
  return s;
}

void check_window(const TimeSignal& signal, std::size_t start, std::size_t count) {
  if (start > signal.size() || signal.size() - start < count) {
    throw BoundsError("signal too short: need " + std::to_string(count) + " samples from " +
                      std::to_string(start) + ", have " + std::to_string(signal.size()));
  }
}

}  // namespace

void GridConfig::validate() const {
  if (subcarriers == 0 || symbols_per_slot == 0 || fft_size == 0) {
    throw ConfigError("grid counts must be positive");
  }
  if (!(subcarrier_spacing > 0.0)) throw ConfigError("grid.subcarrier_spacing must be positive");
  if (subcarriers > fft_size) throw ConfigError("grid.subcarriers exceeds grid.fft_size");
  if (cp_len >= fft_size) throw ConfigError("grid.cp_len must be shorter than grid.fft_size");
}

void FrameSpec::validate(const GridConfig& cfg) const {
  if (preamble.empty()) throw ConfigError("frame preamble is empty");
  for (int c : preamble) {
    if (c != 1 && c != -1) throw ConfigError("frame preamble must be bipolar");
  }
  if (pilot_values.size() != cfg.subcarriers) {
    throw DimensionError("pilot_values length differs from subcarrier count");
  }
  for (const Complex& p : pilot_values) {
    if (std::abs(std::abs(p) - 1.0) > 1e-12) throw ConfigError("pilot values must be unit-modulus");
  }
}

std::vector<int> gold_sequence(int degree, std::size_t index, std::size_t length) {
  const auto& pairs = preferred_pairs();
  auto it = std::find_if(pairs.begin(), pairs.end(),
                         [degree](const PreferredPair& p) { return p.degree == degree; });
  if (it == pairs.end()) {
    throw ConfigError("no preferred m-sequence pair for Gold degree " + std::to_string(degree));
  }
  const std::size_t n = (std::size_t{1} << degree) - 1;
  if (length > n) throw BoundsError("Gold length exceeds 2^degree - 1");
  if (index >= n + 2) throw BoundsError("Gold index exceeds family size 2^degree + 1");

  const auto u = m_sequence(degree, it->poly_u);
  const auto v = m_sequence(degree, it->poly_v);
  std::vector<int> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    std::uint8_t bit;
    if (index < n) {
      bit = u[i] ^ v[(i + index) % n];
    } else if (index == n) {
      bit = u[i];
    } else {
      bit = v[i];
    }
    out[i] = bit ? -1 : 1;
  }
  return out;
}

CVector qpsk_pilots(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const double a = 1.0 / std::sqrt(2.0);
  CVector out(count);
  for (auto& p : out) {
    const std::uint64_t r = rng.next_u64();
    p = {(r & 1) ? -a : a, (r & 2) ? -a : a};
  }
  return out;
}

FrameSpec default_frame_spec(const GridConfig& cfg, std::size_t payload_slots,
                             std::size_t gold_index) {
  FrameSpec spec;
  const std::size_t len = (std::size_t{1} << kDefaultGoldDegree) - 1;
  spec.preamble = gold_sequence(kDefaultGoldDegree, gold_index, len);
  spec.pilot_values = qpsk_pilots(cfg.subcarriers);
  spec.payload_slot_count = payload_slots;
  return spec;
}

std::size_t subcarrier_bin(std::size_t k, const GridConfig& cfg) {
  const auto n = static_cast<std::int64_t>(cfg.fft_size);
  const std::int64_t f = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(cfg.subcarriers / 2);
  return static_cast<std::size_t>(((f % n) + n) % n);
}

CVector modulate_symbol(std::span<const Complex> row, const GridConfig& cfg) {
  if (row.size() != cfg.subcarriers) throw DimensionError("symbol row length differs from subcarriers");
  const std::size_t n = cfg.fft_size;
  CVector bins(n, Complex{0.0, 0.0});
  for (std::size_t k = 0; k < row.size(); ++k) bins[subcarrier_bin(k, cfg)] = row[k];
  CVector out(n + cfg.cp_len);
  run_dft(n, FFTW_BACKWARD, bins.data(), out.data() + cfg.cp_len);
  std::copy(out.end() - static_cast<std::ptrdiff_t>(cfg.cp_len), out.end(), out.begin());
  return out;
}

CVector demodulate_symbol(std::span<const Complex> samples, const GridConfig& cfg) {
  if (samples.size() != cfg.fft_size) throw DimensionError("demodulate_symbol expects fft_size samples");
  CVector bins(cfg.fft_size);
  run_dft(cfg.fft_size, FFTW_FORWARD, samples.data(), bins.data());
  CVector row(cfg.subcarriers);
  for (std::size_t k = 0; k < row.size(); ++k) row[k] = bins[subcarrier_bin(k, cfg)];
  return row;
}

TimeSignal ofdm_modulate(const ResourceGrid& grid, const GridConfig& cfg) {
  if (!grid.matches(cfg)) throw DimensionError("resource grid does not match grid config");
  TimeSignal out{{}, cfg.sample_rate()};
  out.samples.reserve(cfg.symbols_per_slot * cfg.samples_per_symbol());
  for (Eigen::Index r = 0; r < grid.data.rows(); ++r) {
    const CVector sym = modulate_symbol({grid.data.row(r).data(), grid.subcarriers()}, cfg);
    out.samples.insert(out.samples.end(), sym.begin(), sym.end());
  }
  return out;
}

ResourceGrid ofdm_demodulate(const TimeSignal& signal, const GridConfig& cfg, std::size_t start) {
  const std::size_t sym_len = cfg.samples_per_symbol();
  check_window(signal, start, cfg.symbols_per_slot * sym_len);
  ResourceGrid grid = ResourceGrid::zeros(cfg);
  for (std::size_t s = 0; s < cfg.symbols_per_slot; ++s) {
    const std::size_t first = start + s * sym_len + cfg.cp_len;
    const CVector row = demodulate_symbol({signal.samples.data() + first, cfg.fft_size}, cfg);
    for (std::size_t k = 0; k < row.size(); ++k) {
      grid.data(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = row[k];
    }
  }
  return grid;
}

std::size_t frame_length(const FrameSpec& spec, const GridConfig& cfg) {
  return spec.preamble.size() +
         (1 + cfg.symbols_per_slot * spec.payload_slot_count) * cfg.samples_per_symbol();
}

TimeSignal assemble_frame_with_pilot(const FrameSpec& spec, std::span<const Complex> pilot_row,
                                     const std::vector<ResourceGrid>& payload,
                                     const GridConfig& cfg) {
  if (payload.size() != spec.payload_slot_count) {
    throw DimensionError("payload has " + std::to_string(payload.size()) + " slots, frame expects " +
                         std::to_string(spec.payload_slot_count));
  }
  TimeSignal out{{}, cfg.sample_rate()};
  out.samples.reserve(frame_length(spec, cfg));
  for (int c : spec.preamble) out.samples.emplace_back(static_cast<double>(c), 0.0);
  const CVector pilot = modulate_symbol(pilot_row, cfg);
  out.samples.insert(out.samples.end(), pilot.begin(), pilot.end());
  for (const auto& g : payload) {
    const TimeSignal slot = ofdm_modulate(g, cfg);
    out.samples.insert(out.samples.end(), slot.samples.begin(), slot.samples.end());
  }
  return out;
}

TimeSignal assemble_frame(const FrameSpec& spec, const std::vector<ResourceGrid>& payload,
                          const GridConfig& cfg) {
  spec.validate(cfg);
  return assemble_frame_with_pilot(spec, spec.pilot_values, payload, cfg);
}

DisassembledFrame disassemble_frame(const TimeSignal& signal, const FrameSpec& spec,
                                    const GridConfig& cfg, std::size_t offset,
                                    std::size_t backoff) {
  if (backoff > cfg.cp_len) throw BoundsError("FFT window back-off exceeds cyclic prefix");
  const std::size_t pilot_start = offset + spec.preamble.size();
  if (pilot_start < backoff) throw BoundsError("frame offset too small for back-off");
  check_window(signal, pilot_start - backoff, frame_length(spec, cfg) - spec.preamble.size());

  DisassembledFrame out;
  const std::size_t sym_len = cfg.samples_per_symbol();
  out.pilot = demodulate_symbol(
      {signal.samples.data() + pilot_start - backoff + cfg.cp_len, cfg.fft_size}, cfg);
  for (std::size_t s = 0; s < spec.payload_slot_count; ++s) {
    const std::size_t start = pilot_start + sym_len * (1 + s * cfg.symbols_per_slot) - backoff;
    out.payload.push_back(ofdm_demodulate(signal, cfg, start));
  }
  return out;
}

RVector correlation_profile(const TimeSignal& signal, std::span<const int> preamble) {
  const std::size_t len = preamble.size();
  if (len == 0) throw ConfigError("empty preamble");
  if (signal.size() < len) throw BoundsError("signal shorter than preamble");
  const double p_norm = std::sqrt(static_cast<double>(len));
  RVector metric(signal.size() - len + 1, 0.0);
  for (std::size_t lag = 0; lag < metric.size(); ++lag) {
    Complex acc{0.0, 0.0};
    double energy = 0.0;
    const Complex* s = signal.samples.data() + lag;
    for (std::size_t i = 0; i < len; ++i) {
      acc += s[i] * static_cast<double>(preamble[i]);
      energy += std::norm(s[i]);
    }
    if (energy > 0.0) metric[lag] = std::min(1.0, std::abs(acc) / (std::sqrt(energy) * p_norm));
  }
  return metric;
}

Detection detect_frame(const TimeSignal& signal, std::span<const int> preamble) {
  const RVector metric = correlation_profile(signal, preamble);
  Detection best;
  for (std::size_t lag = 0; lag < metric.size(); ++lag) {
    if (metric[lag] > best.peak_metric) best = {lag, metric[lag]};
  }
  return best;
}

}  // namespace otafl::grid
