#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "otafl/common.hpp"
#include "otafl/grid.hpp"

namespace otafl::codec {

/// Flat model parameters or updates.
struct WeightVector {
  RVector values;

  std::size_t size() const { return values.size(); }
  bool operator==(const WeightVector&) const = default;
};

/// Per-component peak scales. Even (0-based) parameter positions ride on
/// the in-phase rail, odd positions on the quadrature rail.
struct IQScale {
  double i = 1.0;
  double q = 1.0;

  bool operator==(const IQScale&) const = default;
};

struct ScaledUpdate {
  RVector values;  // every component magnitude <= 1
  IQScale scale;
};

struct SlotPlan {
  std::size_t slots = 0;        // rho
  std::size_t pad = 0;          // zero-filled parameter positions
  std::size_t param_count = 0;  // P

  std::size_t symbol_count() const { return (param_count + 1) / 2; }
};

/// Peak |value| on each rail; 1 for an all-zero rail.
IQScale peak_scales(std::span<const double> values);

/// Elementwise max of reported peaks (the common scale broadcast to all UEs).
IQScale common_scale(std::span<const IQScale> reported);

/// Divides each rail by its peak, or by `shared` when given.
ScaledUpdate scale_updates(const WeightVector& delta, std::optional<IQScale> shared = std::nullopt);

WeightVector unscale(const ScaledUpdate& scaled);

/// w[k] = u[2k] + j u[2k+1]; an odd trailing value is paired with 0.
CVector pack_complex(std::span<const double> u);

/// Inverse of pack_complex, keeping the first `count` reals.
RVector unpack_complex(std::span<const Complex> w, std::size_t count);

/// rho = ceil(P / (2 T N_sc)).
SlotPlan slot_plan(std::size_t param_count, const grid::GridConfig& cfg);

/// Row-major fill (symbol, then subcarrier) across rho slots, zero tail.
std::vector<grid::ResourceGrid> map_to_grids(std::span<const Complex> symbols, const SlotPlan& plan,
                                             const grid::GridConfig& cfg);

/// Reads the occupied symbols back in fill order.
CVector grids_to_symbols(const std::vector<grid::ResourceGrid>& grids, const SlotPlan& plan,
                         const grid::GridConfig& cfg);

/// Inverts the fill, drops the pad, de-interleaves I/Q and re-applies the scales.
WeightVector unmap_from_grids(const std::vector<grid::ResourceGrid>& grids, const SlotPlan& plan,
                              const IQScale& scales, const grid::GridConfig& cfg);

/// scale -> pack -> map in one step.
std::vector<grid::ResourceGrid> encode(const WeightVector& delta, const IQScale& scales,
                                       const grid::GridConfig& cfg);

}  // namespace otafl::codec
