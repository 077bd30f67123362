#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "otafl/accounting.hpp"
#include "otafl/ota.hpp"
#include "otafl/scenario.hpp"

namespace {

using namespace otafl;

constexpr int kTraceSchemaVersion = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAllAborted = 3;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string trace_csv(const std::vector<std::pair<ota::Mode, std::vector<ota::RoundTrace>>>& runs) {
  std::ostringstream csv;
  csv << "schema_version,mode,round,agg_nmse_db,global_loss,loss_per_ue,alpha,slots_used,"
         "cumulative_slots,energy_j,cumulative_energy_j,aborted,peak_metric,offset_spread,peak_spread\n";
  for (const auto& [mode, traces] : runs) {
    std::size_t slots = 0;
    double energy = 0.0;
    for (const auto& t : traces) {
      slots += t.slots_used;
      energy += t.energy_j;
      std::string losses;
      for (std::size_t i = 0; i < t.loss_per_ue.size(); ++i) {
        if (i) losses += ';';
        losses += num(t.loss_per_ue[i]);
      }
      csv << kTraceSchemaVersion << ',' << ota::to_string(mode) << ',' << t.round << ','
          << num(t.agg_nmse_db) << ',' << num(t.global_loss) << ',' << losses << ',' << num(t.alpha)
          << ',' << t.slots_used << ',' << slots << ',' << num(t.energy_j) << ',' << num(energy) << ','
          << (t.aborted ? 1 : 0) << ',' << num(t.peak_metric) << ',' << t.offset_spread << ','
          << t.peak_spread << '\n';
    }
  }
  return csv.str();
}

nlohmann::ordered_json summary(const scenario::Scenario& s,
                               const std::vector<std::pair<ota::Mode, std::vector<ota::RoundTrace>>>& runs) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kTraceSchemaVersion;
  doc["seed"] = s.experiment.seed;
  doc["ues"] = s.num_ues;
  doc["rounds"] = s.experiment.rounds;
  auto& modes = doc["modes"];
  for (const auto& [mode, traces] : runs) {
    std::size_t slots = 0;
    std::size_t aborted = 0;
    double energy = 0.0;
    double nmse = 0.0;
    for (const auto& t : traces) {
      slots += t.slots_used;
      energy += t.energy_j;
      nmse += t.agg_nmse_db / static_cast<double>(traces.size());
      aborted += t.aborted ? 1 : 0;
    }
    nlohmann::ordered_json m;
    m["final_loss"] = traces.back().global_loss;
    m["total_slots"] = slots;
    m["total_energy_j"] = energy;
    m["mean_agg_nmse_db"] = nmse;
    m["aborted_rounds"] = aborted;
    modes[ota::to_string(mode)] = m;
  }
  return doc;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  scenario::Scenario s = scenario::load(path);
  if (seed) s.experiment.seed = *seed;
  const std::filesystem::path out = out_dir.empty() ? std::filesystem::path(s.output) : std::filesystem::path(out_dir);

  const ota::Federation fed = scenario::build_federation(s);
  const fl::ModelParams init = scenario::initial_model(s, fed);
  std::vector<std::pair<ota::Mode, std::vector<ota::RoundTrace>>> runs;
  bool any_completed = false;
  bool any_ota = false;
  for (ota::Mode mode : s.modes) {
    ota::ExperimentConfig cfg = s.experiment;
    cfg.mode = mode;
    auto traces = ota::run_experiment(fed, init, cfg);
    for (const auto& t : traces) {
      if (t.aborted) {
        std::cerr << "round " << t.round << " (" << ota::to_string(mode)
                  << ") aborted: peak metric " << num(t.peak_metric) << '\n';
      }
    }
    if (mode == ota::Mode::ota) {
      any_ota = true;
      for (const auto& t : traces) any_completed = any_completed || !t.aborted;
    }
    runs.emplace_back(mode, std::move(traces));
  }
  write_file(out / "trace.csv", trace_csv(runs));
  write_file(out / "summary.json", summary(s, runs).dump(2) + "\n");
  std::cout << "wrote " << (out / "trace.csv").string() << " and " << (out / "summary.json").string() << '\n';
  if (any_ota && !any_completed) {
    std::cerr << "every OTA round aborted\n";
    return kExitAllAborted;
  }
  return 0;
}

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const std::size_t m = std::stoul(text);
      return {m, m};
    }
    return {std::stoul(text.substr(0, dots)), std::stoul(text.substr(dots + 2))};
  } catch (const std::exception&) {
    throw ConfigError("--m-range must look like A..B, got '" + text + "'");
  }
}

int cmd_accounting(const std::string& range, std::size_t params, double bits, double efficiency,
                   bool with_energy, const std::string& out_path) {
  const auto [lo, hi] = parse_range(range);
  const accounting::SlotFormat fmt;
  const accounting::EnergyModel model;
  const auto rows = accounting::accounting_table(lo, hi, params, bits, efficiency, fmt, model);

  std::cout << "M,digital_slots,ota_slots,spectrum_gain";
  if (with_energy) std::cout << ",digital_energy_j,ota_energy_j,energy_gain";
  std::cout << '\n';
  for (std::size_t k = 0; k + 1 < rows.size(); k += 2) {
    const auto& d = rows[k];
    const auto& o = rows[k + 1];
    std::cout << d.num_ues << ',' << d.slots << ',' << o.slots << ',' << num(d.gain);
    if (with_energy) std::cout << ',' << num(d.energy_j) << ',' << num(o.energy_j) << ',' << num(o.gain);
    std::cout << '\n';
  }
  if (!out_path.empty()) {
    std::ostringstream csv;
    csv << "M,mode,slots,gain,energy_j\n";
    for (const auto& r : rows) {
      csv << r.num_ues << ',' << r.mode << ',' << r.slots << ',' << num(r.gain) << ',' << num(r.energy_j) << '\n';
    }
    write_file(out_path, csv.str());
  }
  return 0;
}

int cmd_sync_sweep(const std::string& spreads, std::size_t seeds, const std::string& scenario_path,
                   std::optional<std::uint64_t> seed, const std::string& out_path) {
  scenario::Scenario s = scenario_path.empty() ? scenario::Scenario{} : scenario::load(scenario_path);
  if (seed) s.experiment.seed = *seed;
  std::vector<scenario::SweepPoint> points;
  std::stringstream ss(spreads);
  std::string token;
  while (std::getline(ss, token, ',')) points.push_back(scenario::SweepPoint::parse(token));
  if (points.empty()) throw ConfigError("--spreads is empty");

  const auto rows = scenario::sync_sweep(s, points, seeds);
  std::ostringstream csv;
  csv << "schema_version,sync,off_spread,mean_agg_nmse_db,mean_peak_spread,max_peak_spread,aborted\n";
  for (const auto& r : rows) {
    csv << kTraceSchemaVersion << ',' << r.point.label() << ',' << r.point.off_spread << ','
        << num(r.mean_agg_nmse_db) << ',' << num(r.mean_peak_spread) << ',' << r.max_peak_spread << ','
        << r.aborted << '\n';
  }
  std::cout << csv.str();
  if (!out_path.empty()) write_file(out_path, csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Over-the-air federated learning link-level simulator"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--seed", seed, "Master seed (overrides the scenario)");
  app.add_option("--out", out, "Output directory (run) or file (accounting, sync-sweep)");

  auto* run = app.add_subcommand("run", "Run a scenario and write trace.csv and summary.json");
  std::string scenario_path;
  run->add_option("scenario", scenario_path, "Scenario file")->required();

  auto* acc = app.add_subcommand("accounting", "Slot, spectrum and energy accounting table");
  std::string range = "1..20";
  std::size_t params = 71666;
  double bits = 32.0;
  double efficiency = accounting::kDefaultSpectralEfficiency;
  bool with_energy = false;
  acc->add_option("--m-range", range, "UE count range A..B")->capture_default_str();
  acc->add_option("--params", params, "Model parameter count")->capture_default_str();
  acc->add_option("--bits", bits, "Bits per parameter for digital FL")->capture_default_str();
  acc->add_option("--spectral-efficiency", efficiency, "Bits per resource element")->capture_default_str();
  acc->add_flag("--energy", with_energy, "Add energy columns");

  auto* sweep = app.add_subcommand("sync-sweep", "Aggregation NMSE versus timing spread");
  std::string spreads = "ptp_on,0,4,16,64,256";
  std::size_t seeds = 20;
  std::string sweep_scenario;
  sweep->add_option("--spreads", spreads, "Comma list of spreads in samples, or ptp_on")->capture_default_str();
  sweep->add_option("--seeds", seeds, "Seeds per point")->capture_default_str();
  sweep->add_option("--scenario", sweep_scenario, "Base scenario (defaults when omitted)");

  for (auto* sub : {run, acc, sweep}) {
    sub->add_option("--seed", seed, "Master seed (overrides the scenario)");
    sub->add_option("--out", out, "Output path");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(scenario_path, seed, out);
    if (*acc) return cmd_accounting(range, params, bits, efficiency, with_energy, out);
    if (*sweep) return cmd_sync_sweep(spreads, seeds, sweep_scenario, seed, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
