#include "otafl/weightcodec.hpp"

#include <algorithm>

namespace otafl::codec {

IQScale peak_scales(std::span<const double> values) {
  IQScale s{0.0, 0.0};
  for (std::size_t k = 0; k < values.size(); ++k) {
    double& rail = (k % 2 == 0) ? s.i : s.q;
    rail = std::max(rail, std::abs(values[k]));
  }
  if (s.i == 0.0) s.i = 1.0;
  if (s.q == 0.0) s.q = 1.0;
  return s;
}

IQScale common_scale(std::span<const IQScale> reported) {
  if (reported.empty()) throw PreconditionError("common_scale: no reports");
  IQScale s{0.0, 0.0};
  for (const auto& r : reported) {
    s.i = std::max(s.i, r.i);
    s.q = std::max(s.q, r.q);
  }
  return s;
}

ScaledUpdate scale_updates(const WeightVector& delta, std::optional<IQScale> shared) {
  for (double v : delta.values) {
    if (!std::isfinite(v)) throw PreconditionError("scale_updates: non-finite update");
  }
  ScaledUpdate out;
  if (shared) {
    if (!(shared->i > 0.0) || !(shared->q > 0.0)) throw ConfigError("shared scale must be positive");
    out.scale = *shared;
  } else {
    out.scale = peak_scales(delta.values);
  }
  out.values.resize(delta.size());
  for (std::size_t k = 0; k < delta.size(); ++k) {
    out.values[k] = delta.values[k] / (k % 2 == 0 ? out.scale.i : out.scale.q);
  }
  return out;
}

WeightVector unscale(const ScaledUpdate& scaled) {
  WeightVector out{RVector(scaled.values.size())};
  for (std::size_t k = 0; k < scaled.values.size(); ++k) {
    out.values[k] = scaled.values[k] * (k % 2 == 0 ? scaled.scale.i : scaled.scale.q);
  }
  return out;
}

CVector pack_complex(std::span<const double> u) {
  CVector w((u.size() + 1) / 2);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double im = 2 * k + 1 < u.size() ? u[2 * k + 1] : 0.0;
    w[k] = {u[2 * k], im};
  }
  return w;
}

RVector unpack_complex(std::span<const Complex> w, std::size_t count) {
  if (count > 2 * w.size()) throw BoundsError("unpack_complex: count exceeds 2 * symbols");
  RVector u(count);
  for (std::size_t k = 0; k < count; ++k) u[k] = (k % 2 == 0) ? w[k / 2].real() : w[k / 2].imag();
  return u;
}

SlotPlan slot_plan(std::size_t param_count, const grid::GridConfig& cfg) {
  if (param_count == 0) throw PreconditionError("slot_plan: P must be at least 1");
  const std::size_t per_slot = 2 * cfg.res_per_slot();
  SlotPlan plan;
  plan.param_count = param_count;
  plan.slots = (param_count + per_slot - 1) / per_slot;
  plan.pad = per_slot * plan.slots - param_count;
  return plan;
}

std::vector<grid::ResourceGrid> map_to_grids(std::span<const Complex> symbols, const SlotPlan& plan,
                                             const grid::GridConfig& cfg) {
  const std::size_t per_slot = cfg.res_per_slot();
  if (symbols.size() > per_slot * plan.slots) {
    throw BoundsError("map_to_grids: " + std::to_string(symbols.size()) +
                      " symbols exceed plan capacity " + std::to_string(per_slot * plan.slots));
  }
  std::vector<grid::ResourceGrid> grids(plan.slots, grid::ResourceGrid::zeros(cfg));
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const std::size_t slot = k / per_slot;
    const std::size_t re = k % per_slot;
    grids[slot].data(static_cast<Eigen::Index>(re / cfg.subcarriers),
                     static_cast<Eigen::Index>(re % cfg.subcarriers)) = symbols[k];
  }
  return grids;
}

CVector grids_to_symbols(const std::vector<grid::ResourceGrid>& grids, const SlotPlan& plan,
                         const grid::GridConfig& cfg) {
  if (grids.size() != plan.slots) throw DimensionError("grids_to_symbols: slot count mismatch");
  for (const auto& g : grids) {
    if (!g.matches(cfg)) throw DimensionError("grids_to_symbols: grid does not match config");
  }
  const std::size_t per_slot = cfg.res_per_slot();
  CVector out(plan.symbol_count());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t re = k % per_slot;
    out[k] = grids[k / per_slot].data(static_cast<Eigen::Index>(re / cfg.subcarriers),
                                      static_cast<Eigen::Index>(re % cfg.subcarriers));
  }
  return out;
}

WeightVector unmap_from_grids(const std::vector<grid::ResourceGrid>& grids, const SlotPlan& plan,
                              const IQScale& scales, const grid::GridConfig& cfg) {
  const CVector symbols = grids_to_symbols(grids, plan, cfg);
  ScaledUpdate scaled{unpack_complex(symbols, plan.param_count), scales};
  return unscale(scaled);
}

std::vector<grid::ResourceGrid> encode(const WeightVector& delta, const IQScale& scales,
                                       const grid::GridConfig& cfg) {
  const ScaledUpdate scaled = scale_updates(delta, scales);
  return map_to_grids(pack_complex(scaled.values), slot_plan(delta.size(), cfg), cfg);
}

}  // namespace otafl::codec
