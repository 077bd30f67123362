#include "otafl/csi.hpp"

#include <algorithm>
#include <map>

namespace otafl::csi {

namespace {

double to_db_floored(double ratio) {
  if (ratio <= 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

// Piecewise-linear interpolation of (x, y) knots at integer x in [0, count).
CVector linear_fill(const std::vector<std::pair<std::size_t, Complex>>& knots, std::size_t count) {
  CVector out(count);
  for (std::size_t x = 0; x < count; ++x) {
    if (x <= knots.front().first) {
      out[x] = knots.front().second;
    } else if (x >= knots.back().first) {
      out[x] = knots.back().second;
    } else {
      auto hi = std::lower_bound(knots.begin(), knots.end(), x,
                                 [](const auto& k, std::size_t v) { return k.first < v; });
      if (hi->first == x) {
        out[x] = hi->second;
        continue;
      }
      auto lo = hi - 1;
      const double t = static_cast<double>(x - lo->first) / static_cast<double>(hi->first - lo->first);
      out[x] = lo->second + t * (hi->second - lo->second);
    }
  }
  return out;
}

}  // namespace

CVector ls_estimate(std::span<const Complex> received, std::span<const Complex> known) {
  if (received.size() != known.size()) throw DimensionError("ls_estimate: length mismatch");
  CVector h(received.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (known[i] == Complex{0.0, 0.0}) throw PreconditionError("ls_estimate: zero pilot symbol");
    h[i] = received[i] / known[i];
  }
  return h;
}

CMatrix interpolate(std::span<const Complex> pilot_estimates,
                    std::span<const PilotPosition> positions, const grid::GridConfig& cfg) {
  if (positions.empty()) throw PreconditionError("interpolate: empty pilot set");
  if (pilot_estimates.size() != positions.size()) {
    throw DimensionError("interpolate: estimates and positions differ in length");
  }
  std::map<std::size_t, std::vector<std::pair<std::size_t, Complex>>> by_symbol;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const auto& p = positions[i];
    if (p.symbol >= cfg.symbols_per_slot || p.subcarrier >= cfg.subcarriers) {
      throw BoundsError("interpolate: pilot position outside the grid");
    }
    by_symbol[p.symbol].emplace_back(p.subcarrier, pilot_estimates[i]);
  }

  std::vector<std::pair<std::size_t, CVector>> rows;
  for (auto& [symbol, knots] : by_symbol) {
    std::sort(knots.begin(), knots.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    rows.emplace_back(symbol, linear_fill(knots, cfg.subcarriers));
  }

  const auto T = static_cast<Eigen::Index>(cfg.symbols_per_slot);
  const auto N = static_cast<Eigen::Index>(cfg.subcarriers);
  CMatrix full(T, N);
  for (Eigen::Index n = 0; n < N; ++n) {
    std::vector<std::pair<std::size_t, Complex>> knots;
    knots.reserve(rows.size());
    for (const auto& [symbol, row] : rows) knots.emplace_back(symbol, row[static_cast<std::size_t>(n)]);
    const CVector column = linear_fill(knots, cfg.symbols_per_slot);
    for (Eigen::Index t = 0; t < T; ++t) full(t, n) = column[static_cast<std::size_t>(t)];
  }
  return full;
}

std::vector<PilotPosition> full_symbol_pilots(const grid::GridConfig& cfg, std::size_t symbol) {
  std::vector<PilotPosition> out(cfg.subcarriers);
  for (std::size_t n = 0; n < cfg.subcarriers; ++n) out[n] = {symbol, n};
  return out;
}

ChannelEstimate estimate_from_pilot_symbol(std::span<const Complex> received,
                                           std::span<const Complex> known,
                                           const grid::GridConfig& cfg, std::size_t ue_id) {
  ChannelEstimate est;
  est.ue_id = ue_id;
  est.pilot_estimates = ls_estimate(received, known);
  const auto positions = full_symbol_pilots(cfg);
  est.full_grid = interpolate(est.pilot_estimates, positions, cfg);
  return est;
}

ChannelEstimate quantize_feedback(const ChannelEstimate& est, double step) {
  if (step < 0.0) throw ConfigError("feedback quantization step must be nonnegative");
  if (step == 0.0) return est;
  auto q = [step](Complex z) {
    return Complex{std::round(z.real() / step) * step, std::round(z.imag() / step) * step};
  };
  ChannelEstimate out = est;
  for (auto& h : out.pilot_estimates) h = q(h);
  out.full_grid = est.full_grid.unaryExpr(q);
  return out;
}

double nmse(std::span<const Complex> est, std::span<const Complex> truth) {
  if (est.size() != truth.size()) throw DimensionError("nmse: dimension mismatch");
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    err += std::norm(est[i] - truth[i]);
    ref += std::norm(truth[i]);
  }
  if (ref <= 0.0) throw PreconditionError("nmse: zero-norm reference");
  return to_db_floored(err / ref);
}

double nmse(const CMatrix& est, const CMatrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) {
    throw DimensionError("nmse: dimension mismatch");
  }
  return nmse(std::span<const Complex>(est.data(), static_cast<std::size_t>(est.size())),
              std::span<const Complex>(truth.data(), static_cast<std::size_t>(truth.size())));
}

double nmse_per_sample(const std::vector<CMatrix>& est, const std::vector<CMatrix>& truth) {
  if (est.size() != truth.size() || est.empty()) throw DimensionError("nmse_per_sample: sample count mismatch");
  double acc = 0.0;
  for (std::size_t s = 0; s < est.size(); ++s) {
    if (est[s].rows() != truth[s].rows() || est[s].cols() != truth[s].cols()) {
      throw DimensionError("nmse_per_sample: dimension mismatch");
    }
    const double ref = truth[s].squaredNorm();
    if (ref <= 0.0) throw PreconditionError("nmse_per_sample: zero-norm reference");
    acc += (est[s] - truth[s]).squaredNorm() / ref;
  }
  return to_db_floored(acc / static_cast<double>(est.size()));
}

}  // namespace otafl::csi
