#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "otafl/accounting.hpp"
#include "otafl/grid.hpp"
#include "otafl/ota.hpp"
#include "otafl/scenario.hpp"
#include "otafl/sync.hpp"
#include "otafl/weightcodec.hpp"

namespace py = pybind11;
using namespace otafl;

namespace {

using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

RVector to_vector(const RealArray& a) {
  if (a.ndim() != 1) throw DimensionError("expected a 1-D array");
  return RVector(a.data(), a.data() + a.size());
}

py::array_t<double> to_array(const RVector& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<Complex> to_array(const CMatrix& m) {
  py::array_t<Complex> out({m.rows(), m.cols()});
  std::copy(m.data(), m.data() + m.size(), out.mutable_data());
  return out;
}

CMatrix to_matrix(const ComplexArray& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  CMatrix m(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), m.data());
  return m;
}

grid::GridConfig grid_config(std::size_t subcarriers, std::size_t symbols, std::size_t fft_size,
                             std::size_t cp_len) {
  grid::GridConfig cfg;
  cfg.subcarriers = subcarriers;
  cfg.symbols_per_slot = symbols;
  cfg.fft_size = fft_size;
  cfg.cp_len = cp_len;
  cfg.validate();
  return cfg;
}

py::dict trace_dict(const ota::RoundTrace& t) {
  py::dict d;
  d["round"] = t.round;
  d["agg_nmse_db"] = t.agg_nmse_db;
  d["global_loss"] = t.global_loss;
  d["loss_per_ue"] = t.loss_per_ue;
  d["alpha"] = t.alpha;
  d["slots_used"] = t.slots_used;
  d["energy_j"] = t.energy_j;
  d["aborted"] = t.aborted;
  d["peak_metric"] = t.peak_metric;
  d["offset_spread"] = t.offset_spread;
  d["peak_spread"] = t.peak_spread;
  return d;
}

py::dict aggregate(const std::vector<RealArray>& deltas, const std::string& channel_kind, double snr_db,
                   const std::string& sync_mode, std::size_t off_spread, double floor_fraction,
                   bool per_client_scale, double margin, std::uint64_t seed, std::size_t threads) {
  std::vector<codec::WeightVector> ws;
  for (const auto& d : deltas) ws.push_back({to_vector(d)});
  ota::PhyConfig phy;
  phy.channel.kind = channel::parse_channel_kind(channel_kind);
  phy.snr_db = snr_db;
  phy.sync.mode = sync::parse_sync_mode(sync_mode);
  phy.sync.off_spread = off_spread;
  phy.floor_fraction = floor_fraction;
  phy.per_client_scale = per_client_scale;
  phy.margin = margin;
  ota::Aggregation agg;
  {
    py::gil_scoped_release release;
    agg = ota::aggregate_ota(ws, phy, seed, threads);
  }
  py::dict d;
  d["aborted"] = agg.aborted;
  d["diagnostic"] = agg.diagnostic;
  d["recovered"] = to_array(agg.recovered.values);
  d["oracle"] = to_array(fl::mean_delta(ws).values);
  d["agg_nmse_db"] = agg.aborted ? py::object(py::none())
                                 : py::object(py::float_(ota::aggregation_nmse_db(agg.recovered, fl::mean_delta(ws))));
  d["alpha"] = agg.alpha;
  d["noise_variance"] = agg.noise_variance;
  d["peak_metric"] = agg.peak_metric;
  d["offsets"] = agg.offsets;
  d["offset_spread"] = agg.offset_spread;
  d["peak_spread"] = agg.peak_spread;
  d["slots"] = agg.slots;
  d["max_tx_power"] = agg.max_tx_power;
  return d;
}

std::vector<py::dict> run_scenario(const scenario::Scenario& s, const std::string& mode) {
  std::vector<ota::RoundTrace> traces;
  {
    py::gil_scoped_release release;
    const ota::Federation fed = scenario::build_federation(s);
    ota::ExperimentConfig cfg = s.experiment;
    cfg.mode = ota::parse_mode(mode);
    traces = ota::run_experiment(fed, scenario::initial_model(s, fed), cfg);
  }
  std::vector<py::dict> out;
  for (const auto& t : traces) out.push_back(trace_dict(t));
  return out;
}

}  // namespace

PYBIND11_MODULE(_otafl, m) {
  m.doc() = "Over-the-air federated learning link-level simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);

  m.def("digital_slots",
        [](std::size_t params, double bits, std::size_t num_ues, double efficiency) {
          return accounting::digital_slots(params, bits, accounting::SpectralProfile::uniform(num_ues, efficiency),
                                           accounting::SlotFormat{});
        },
        py::arg("params"), py::arg("bits") = 32.0, py::arg("num_ues") = 1,
        py::arg("spectral_efficiency") = accounting::kDefaultSpectralEfficiency);
  m.def("digital_slots_raw",
        [](std::size_t params, double bits, double efficiency) {
          return accounting::digital_slots_raw(params, bits, efficiency, accounting::SlotFormat{});
        },
        py::arg("params"), py::arg("bits") = 32.0,
        py::arg("spectral_efficiency") = accounting::kDefaultSpectralEfficiency);
  m.def("ota_slots", [](std::size_t params) { return accounting::ota_slots(params, accounting::SlotFormat{}); },
        py::arg("params"));
  m.def("spectrum_gain",
        [](std::size_t num_ues, std::size_t params, double bits, double efficiency) {
          return accounting::spectrum_gain(params, bits, accounting::SpectralProfile::uniform(num_ues, efficiency),
                                           accounting::SlotFormat{});
        },
        py::arg("num_ues"), py::arg("params") = 71666, py::arg("bits") = 32.0,
        py::arg("spectral_efficiency") = accounting::kDefaultSpectralEfficiency);
  m.def("energy_gain",
        [](std::size_t num_ues, std::size_t params, double bits, double efficiency, double overhead) {
          accounting::EnergyModel model;
          model.fixed_overhead = overhead;
          return accounting::energy_gain(params, bits, accounting::SpectralProfile::uniform(num_ues, efficiency),
                                         accounting::SlotFormat{}, model);
        },
        py::arg("num_ues"), py::arg("params") = 71666, py::arg("bits") = 32.0,
        py::arg("spectral_efficiency") = accounting::kDefaultSpectralEfficiency,
        py::arg("fixed_overhead") = accounting::kCalibratedOverhead);

  m.def("gold_sequence", &grid::gold_sequence, py::arg("degree"), py::arg("index"), py::arg("length"));
  m.def("ofdm_modulate",
        [](const ComplexArray& g, std::size_t fft_size, std::size_t cp_len) {
          const auto cfg = grid_config(static_cast<std::size_t>(g.shape(1)), static_cast<std::size_t>(g.shape(0)),
                                       fft_size, cp_len);
          const auto s = grid::ofdm_modulate({to_matrix(g)}, cfg);
          return py::array_t<Complex>(s.samples.size(), s.samples.data());
        },
        py::arg("grid"), py::arg("fft_size") = 256, py::arg("cp_len") = 16);
  m.def("ofdm_demodulate",
        [](const ComplexArray& samples, std::size_t subcarriers, std::size_t symbols, std::size_t fft_size,
           std::size_t cp_len, std::size_t start) {
          const auto cfg = grid_config(subcarriers, symbols, fft_size, cp_len);
          grid::TimeSignal s{CVector(samples.data(), samples.data() + samples.size()), cfg.sample_rate()};
          return to_array(grid::ofdm_demodulate(s, cfg, start).data);
        },
        py::arg("samples"), py::arg("subcarriers") = 256, py::arg("symbols") = 14, py::arg("fft_size") = 256,
        py::arg("cp_len") = 16, py::arg("start") = 0);

  m.def("slot_plan",
        [](std::size_t params) {
          const auto p = codec::slot_plan(params, grid::GridConfig{});
          return py::make_tuple(p.slots, p.pad);
        },
        py::arg("params"), "(slots, pad) for the default grid.");
  m.def("codec_round_trip",
        [](const RealArray& w) {
          const grid::GridConfig cfg;
          const codec::WeightVector v{to_vector(w)};
          const auto scales = codec::peak_scales(v.values);
          const auto grids = codec::encode(v, scales, cfg);
          return to_array(codec::unmap_from_grids(grids, codec::slot_plan(v.size(), cfg), scales, cfg).values);
        },
        py::arg("weights"), "Scale, pack, map onto grids and back.");

  m.def("draw_offsets",
        [](const std::string& mode, std::size_t num_ues, std::size_t off_spread, std::uint64_t seed) {
          sync::SyncConfig cfg;
          cfg.mode = sync::parse_sync_mode(mode);
          cfg.off_spread = off_spread;
          cfg.seed = seed;
          return sync::draw_offsets(cfg, num_ues, grid::GridConfig{}.sample_rate());
        },
        py::arg("mode"), py::arg("num_ues"), py::arg("off_spread") = 0, py::arg("seed") = 0);

  m.def("aggregate_ota", &aggregate, py::arg("deltas"), py::arg("channel") = "rayleigh_per_subcarrier",
        py::arg("snr_db") = ota::kNoNoise, py::arg("sync") = "ptp_on", py::arg("off_spread") = 0,
        py::arg("floor_fraction") = precode::kDefaultFloorFraction, py::arg("per_client_scale") = false,
        py::arg("margin") = 0.9, py::arg("seed") = 0, py::arg("threads") = 0,
        "Pushes one set of per-UE updates through the OTA uplink.");

  py::class_<scenario::Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_static("parse", &scenario::parse, py::arg("text"))
      .def_static("load", &scenario::load, py::arg("path"))
      .def("serialize", [](const scenario::Scenario& s) { return scenario::serialize(s); })
      .def("validate", [](const scenario::Scenario& s) { scenario::validate(s); })
      .def_readwrite("num_ues", &scenario::Scenario::num_ues)
      .def_property(
          "seed", [](const scenario::Scenario& s) { return s.experiment.seed; },
          [](scenario::Scenario& s, std::uint64_t v) { s.experiment.seed = v; })
      .def_property(
          "rounds", [](const scenario::Scenario& s) { return s.experiment.rounds; },
          [](scenario::Scenario& s, std::size_t v) { s.experiment.rounds = v; })
      .def_property(
          "snr_db", [](const scenario::Scenario& s) { return s.experiment.phy.snr_db; },
          [](scenario::Scenario& s, double v) { s.experiment.phy.snr_db = v; })
      .def_property_readonly("modes",
                             [](const scenario::Scenario& s) {
                               std::vector<std::string> out;
                               for (auto mode : s.modes) out.push_back(ota::to_string(mode));
                               return out;
                             })
      .def("__eq__", [](const scenario::Scenario& a, const scenario::Scenario& b) { return a == b; });

  m.def("run_scenario", &run_scenario, py::arg("scenario"), py::arg("mode") = "ota",
        "Runs every round in one mode; returns one dict per round.");

  m.def("sync_sweep",
        [](const scenario::Scenario& s, const std::vector<std::string>& spreads, std::size_t seeds) {
          std::vector<scenario::SweepPoint> points;
          for (const auto& t : spreads) points.push_back(scenario::SweepPoint::parse(t));
          std::vector<scenario::SweepRow> rows;
          {
            py::gil_scoped_release release;
            rows = scenario::sync_sweep(s, points, seeds);
          }
          std::vector<py::dict> out;
          for (const auto& r : rows) {
            py::dict d;
            d["sync"] = r.point.label();
            d["off_spread"] = r.point.off_spread;
            d["mean_agg_nmse_db"] = r.mean_agg_nmse_db;
            d["mean_peak_spread"] = r.mean_peak_spread;
            d["max_peak_spread"] = r.max_peak_spread;
            d["aborted"] = r.aborted;
            out.push_back(std::move(d));
          }
          return out;
        },
        py::arg("scenario"), py::arg("spreads"), py::arg("seeds") = 20);
}
