#include "otafl/scenario.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "otafl/rng.hpp"

namespace otafl::scenario {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const char* first = v.data();
  const char* last = v.data() + v.size();
  if (!v.empty() && v.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last) throw std::invalid_argument("expected a number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

bool to_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::vector<ota::Mode> to_modes(const std::string& v) {
  std::vector<ota::Mode> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ota::parse_mode(trim(item)));
  if (out.empty()) throw std::invalid_argument("mode list is empty");
  return out;
}

std::string fmt_modes(const std::vector<ota::Mode>& modes) {
  std::string out;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    if (i) out += ",";
    out += ota::to_string(modes[i]);
  }
  return out;
}

fl::OptimizerKind to_optimizer(const std::string& v) {
  if (v == "sgd") return fl::OptimizerKind::sgd;
  if (v == "adam") return fl::OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + v + "'");
}

std::string fmt_optimizer(fl::OptimizerKind k) { return k == fl::OptimizerKind::sgd ? "sgd" : "adam"; }

struct Field {
  std::string key;
  std::function<std::string(const Scenario&)> get;
  std::function<void(Scenario&, const std::string&)> set;
};

#define OTAFL_FIELD(KEY, EXPR, TO_STR, FROM_STR)                                    \
  Field {                                                                            \
    KEY, [](const Scenario& s) { return TO_STR(s.EXPR); },                           \
        [](Scenario& s, const std::string& v) { s.EXPR = FROM_STR(v); }              \
  }

#define OTAFL_NUM(KEY, EXPR) OTAFL_FIELD(KEY, EXPR, fmt_double, to_double)
#define OTAFL_SIZE(KEY, EXPR) OTAFL_FIELD(KEY, EXPR, std::to_string, to_size)

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      OTAFL_FIELD("seed", experiment.seed, std::to_string, to_u64),
      OTAFL_SIZE("rounds", experiment.rounds),
      OTAFL_SIZE("ues", num_ues),
      OTAFL_FIELD("modes", modes, fmt_modes, to_modes),
      OTAFL_FIELD("output", output, std::string, std::string),

      OTAFL_SIZE("grid.subcarriers", experiment.phy.grid.subcarriers),
      OTAFL_SIZE("grid.symbols_per_slot", experiment.phy.grid.symbols_per_slot),
      OTAFL_NUM("grid.subcarrier_spacing", experiment.phy.grid.subcarrier_spacing),
      OTAFL_SIZE("grid.fft_size", experiment.phy.grid.fft_size),
      OTAFL_SIZE("grid.cp_len", experiment.phy.grid.cp_len),

      OTAFL_FIELD("channel.kind", experiment.phy.channel.kind, channel::to_string,
                  channel::parse_channel_kind),
      OTAFL_NUM("channel.pathloss_exponent", experiment.phy.channel.pathloss_exponent),
      OTAFL_NUM("channel.reference_distance", experiment.phy.channel.reference_distance),
      OTAFL_NUM("channel.carrier", experiment.phy.channel.carrier),

      OTAFL_NUM("link.tx_power_dbm", experiment.phy.budget.tx_power_dbm),
      OTAFL_NUM("link.distance", experiment.phy.budget.distance),
      OTAFL_NUM("link.noise_psd_dbm_hz", experiment.phy.budget.noise_psd_dbm_hz),
      OTAFL_NUM("link.bandwidth", experiment.phy.budget.bandwidth),

      OTAFL_NUM("phy.snr_db", experiment.phy.snr_db),
      Field{"phy.pilot_snr_db",
            [](const Scenario& s) {
              return s.experiment.phy.pilot_snr_db ? fmt_double(*s.experiment.phy.pilot_snr_db)
                                                   : std::string("auto");
            },
            [](Scenario& s, const std::string& v) {
              if (v == "auto") {
                s.experiment.phy.pilot_snr_db.reset();
              } else {
                s.experiment.phy.pilot_snr_db = to_double(v);
              }
            }},
      OTAFL_NUM("phy.csi_decorrelation", experiment.phy.csi_decorrelation),
      OTAFL_NUM("phy.csi_feedback_step", experiment.phy.csi_feedback_step),
      OTAFL_NUM("phy.peak_power", experiment.phy.peak_power),
      OTAFL_NUM("phy.margin", experiment.phy.margin),
      OTAFL_NUM("phy.floor_fraction", experiment.phy.floor_fraction),
      OTAFL_FIELD("phy.per_client_scale", experiment.phy.per_client_scale, fmt_bool, to_bool),
      OTAFL_NUM("phy.detection_threshold", experiment.phy.detection_threshold),
      OTAFL_SIZE("phy.preamble_index", experiment.phy.preamble_index),

      OTAFL_FIELD("sync.mode", experiment.phy.sync.mode, sync::to_string, sync::parse_sync_mode),
      OTAFL_NUM("sync.ptp_bound", experiment.phy.sync.ptp_bound),
      OTAFL_SIZE("sync.off_spread", experiment.phy.sync.off_spread),
      OTAFL_FIELD("sync.shape", experiment.phy.sync.shape, sync::to_string, sync::parse_offset_shape),
      OTAFL_NUM("sync.phase_offset_std", experiment.phy.sync.phase_offset_std),
      OTAFL_FIELD("sync.seed", experiment.phy.sync.seed, std::to_string, to_u64),

      OTAFL_FIELD("task.kind", task.kind, fl::to_string, fl::parse_task_kind),
      OTAFL_SIZE("task.samples_per_ue", task.samples_per_ue),
      OTAFL_SIZE("task.dim", task.dim),
      OTAFL_NUM("task.heterogeneity", task.heterogeneity),
      OTAFL_NUM("task.noise_std", task.noise_std),
      OTAFL_SIZE("task.outputs", task.outputs),
      OTAFL_SIZE("task.classes", task.classes),
      OTAFL_SIZE("task.hidden", task.hidden),
      OTAFL_FIELD("task.data", task.data_path, std::string, std::string),
      OTAFL_SIZE("task.target_columns", task.target_columns),

      OTAFL_NUM("train.lr", experiment.train.learning_rate),
      OTAFL_SIZE("train.batch_size", experiment.train.batch_size),
      OTAFL_SIZE("train.epochs", experiment.train.local_epochs),
      OTAFL_FIELD("train.optimizer", experiment.train.optimizer, fmt_optimizer, to_optimizer),
      OTAFL_NUM("train.beta1", experiment.train.beta1),
      OTAFL_NUM("train.beta2", experiment.train.beta2),
      OTAFL_NUM("train.epsilon", experiment.train.epsilon),

      OTAFL_NUM("energy.tx_power_dbm", experiment.energy.tx_power_dbm),
      OTAFL_NUM("energy.slot_duration", experiment.energy.slot_duration),
      OTAFL_NUM("energy.fixed_overhead", experiment.energy.fixed_overhead),
      OTAFL_NUM("accounting.spectral_efficiency", experiment.spectral_efficiency),
  };
  return table;
}

#undef OTAFL_SIZE
#undef OTAFL_NUM
#undef OTAFL_FIELD

// Runs a validation step and re-labels its error with the key's line.
void check(const std::map<std::string, std::size_t>& lines, const std::string& key,
           const std::function<void()>& step) {
  try {
    step();
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::exception& e) {
    const auto it = lines.find(key);
    throw ScenarioError(it == lines.end() ? 0 : it->second, key, e.what());
  }
}

void validate_with_lines(const Scenario& s, const std::map<std::string, std::size_t>& lines) {
  const auto& ex = s.experiment;
  check(lines, "ues", [&] {
    if (s.num_ues == 0) throw ConfigError("must be at least 1");
  });
  check(lines, "rounds", [&] {
    if (ex.rounds == 0) throw ConfigError("must be at least 1");
  });
  check(lines, "modes", [&] {
    if (s.modes.empty()) throw ConfigError("needs at least one mode");
    std::set<ota::Mode> seen(s.modes.begin(), s.modes.end());
    if (seen.size() != s.modes.size()) throw ConfigError("lists a mode twice");
  });
  check(lines, "grid.subcarriers", [&] { ex.phy.grid.validate(); });
  check(lines, "channel.kind", [&] { ex.phy.channel.validate(); });
  check(lines, "link.distance", [&] { ex.phy.budget.validate(); });
  check(lines, "sync.ptp_bound", [&] { ex.phy.sync.validate(); });
  check(lines, "phy.snr_db", [&] { ex.phy.validate(); });
  check(lines, "energy.tx_power_dbm", [&] { ex.energy.validate(); });
  check(lines, "accounting.spectral_efficiency", [&] {
    if (!(ex.spectral_efficiency > 0.0)) throw ConfigError("must be positive");
  });
  const auto& t = s.task;
  if (t.data_path.empty()) {
    check(lines, "task.samples_per_ue", [&] {
      if (t.samples_per_ue == 0) throw ConfigError("must be at least 1");
    });
    check(lines, "task.dim", [&] {
      if (t.dim == 0) throw ConfigError("must be at least 1");
    });
    check(lines, "task.noise_std", [&] {
      if (t.noise_std < 0.0) throw ConfigError("must be nonnegative");
    });
    check(lines, "task.heterogeneity", [&] {
      if (t.heterogeneity < 0.0) throw ConfigError("must be nonnegative");
    });
  }
  if (t.kind == fl::TaskKind::two_layer_mlp_classification) {
    check(lines, "task.hidden", [&] {
      if (t.hidden == 0) throw ConfigError("must be at least 1 for the MLP");
    });
    check(lines, "task.classes", [&] {
      if (t.classes < 2) throw ConfigError("must be at least 2");
    });
  }
  check(lines, "train.lr", [&] {
    if (!(ex.train.learning_rate > 0.0)) throw ConfigError("must be positive");
  });
  check(lines, "train.batch_size", [&] {
    if (ex.train.batch_size == 0) throw ConfigError("must be at least 1");
    if (t.data_path.empty() && ex.train.batch_size > t.samples_per_ue) {
      throw ConfigError("exceeds task.samples_per_ue");
    }
  });
  check(lines, "train.epochs", [&] {
    if (ex.train.local_epochs == 0) throw ConfigError("must be at least 1");
  });
}

}  // namespace

ScenarioError::ScenarioError(std::size_t line, std::string key, const std::string& what)
    : ConfigError((line ? "line " + std::to_string(line) + ": " : std::string()) + "key '" + key +
                  "': " + what),
      line_(line),
      key_(std::move(key)) {}

Scenario::Scenario() {
  experiment.rounds = 10;
  experiment.phy.channel.kind = channel::ChannelKind::rayleigh_per_subcarrier;
  experiment.phy.snr_db = 20.0;
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

Scenario parse(const std::string& text) {
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  Scenario s;
  std::map<std::string, std::size_t> lines;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ScenarioError(line_no, trim(line), "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ScenarioError(line_no, key, "unknown key");
    if (lines.count(key)) {
      throw ScenarioError(line_no, key, "duplicate key (first set on line " + std::to_string(lines[key]) + ")");
    }
    lines[key] = line_no;
    try {
      it->second->set(s, value);
    } catch (const std::exception& e) {
      throw ScenarioError(line_no, key, e.what());
    }
  }
  validate_with_lines(s, lines);
  return s;
}

Scenario load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string serialize(const Scenario& s) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(s) + "\n";
  return out;
}

void validate(const Scenario& s) { validate_with_lines(s, {}); }

ota::Federation build_federation(const Scenario& s) {
  const auto& t = s.task;
  const std::uint64_t data_seed = derive_seed(s.experiment.seed, {0xda7a});
  if (!t.data_path.empty()) {
    const fl::Task all = fl::load_task_table(t.data_path, t.kind, t.target_columns, t.hidden);
    const std::size_t per = all.samples() / s.num_ues;
    if (per == 0) throw ScenarioError(0, "task.data", "fewer rows than UEs");
    std::vector<fl::Task> parts;
    for (std::size_t i = 0; i < s.num_ues; ++i) {
      fl::Task part = all;
      const auto start = static_cast<Eigen::Index>(i * per);
      const auto rows = static_cast<Eigen::Index>(per);
      part.features = all.features.middleRows(start, rows);
      part.targets = all.targets.middleRows(start, rows);
      parts.push_back(std::move(part));
    }
    return ota::Federation(std::move(parts));
  }
  if (t.kind == fl::TaskKind::linear_regression) {
    return ota::Federation(
        fl::make_regression_tasks(s.num_ues, t.samples_per_ue, t.dim, t.heterogeneity, t.noise_std, data_seed,
                                  t.outputs));
  }
  return ota::Federation(fl::make_blob_tasks(s.num_ues, t.samples_per_ue, t.dim, t.classes, t.hidden, data_seed));
}

fl::ModelParams initial_model(const Scenario& s, const ota::Federation& fed) {
  return fl::init_params(fed.ues.front(), derive_seed(s.experiment.seed, {0x1417}));
}

}  // namespace otafl::scenario

namespace otafl::scenario {

SweepPoint SweepPoint::parse(const std::string& token) {
  const std::string t = trim(token);
  if (t == "ptp_on") return {sync::SyncMode::ptp_on, 0};
  try {
    return {sync::SyncMode::ptp_off, to_size(t)};
  } catch (const std::exception&) {
    throw ConfigError("sweep point must be 'ptp_on' or a sample count, got '" + t + "'");
  }
}

std::string SweepPoint::label() const {
  return mode == sync::SyncMode::ptp_on ? "ptp_on" : "ptp_off";
}

std::vector<SweepRow> sync_sweep(const Scenario& base, const std::vector<SweepPoint>& points,
                                 std::size_t seeds) {
  if (seeds == 0) throw ConfigError("sweep needs at least one seed");
  validate(base);
  std::vector<SweepRow> rows;
  for (const auto& point : points) {
    SweepRow row;
    row.point = point;
    for (std::size_t k = 0; k < seeds; ++k) {
      Scenario s = base;
      s.experiment.seed = base.experiment.seed + k;
      s.experiment.mode = ota::Mode::ota;
      s.experiment.phy.sync.mode = point.mode;
      s.experiment.phy.sync.off_spread = point.off_spread;
      const ota::Federation fed = build_federation(s);
      const fl::RoundState state{1, initial_model(s, fed), fed.size()};
      const ota::RoundOutput out = ota::run_round(state, fed, s.experiment);
      row.mean_agg_nmse_db += out.trace.agg_nmse_db / static_cast<double>(seeds);
      row.mean_peak_spread += static_cast<double>(out.trace.peak_spread) / static_cast<double>(seeds);
      row.max_peak_spread = std::max(row.max_peak_spread, out.trace.peak_spread);
      row.aborted += out.trace.aborted ? 1 : 0;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace otafl::scenario
