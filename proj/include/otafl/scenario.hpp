#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "otafl/fl.hpp"
#include "otafl/ota.hpp"

namespace otafl::scenario {

/// Parse or validation failure tied to a key and, when known, a line.
class ScenarioError : public ConfigError {
 public:
  ScenarioError(std::size_t line, std::string key, const std::string& what);

  std::size_t line() const { return line_; }  // 0 when not tied to a line
  const std::string& key() const { return key_; }

 private:
  std::size_t line_;
  std::string key_;
};

/// Synthetic data generator settings, or a data table split across UEs.
struct TaskSpec {
  fl::TaskKind kind = fl::TaskKind::linear_regression;
  std::size_t samples_per_ue = 200;
  std::size_t dim = 16;
  double heterogeneity = 0.5;
  double noise_std = 0.1;
  std::size_t outputs = 1;  // regression target columns
  std::size_t classes = 3;
  std::size_t hidden = 16;
  std::string data_path;  // empty: synthetic
  std::size_t target_columns = 1;

  bool operator==(const TaskSpec&) const = default;
};

struct Scenario {
  std::size_t num_ues = 5;
  std::vector<ota::Mode> modes{ota::Mode::ota};
  TaskSpec task;
  ota::ExperimentConfig experiment;  // mode field is set per run
  std::string output = "otafl_out";

  Scenario();
  bool operator==(const Scenario&) const = default;
};

/// Flat `key = value` lines with dotted section keys; '#' starts a comment.
Scenario parse(const std::string& text);
Scenario load(const std::string& path);

/// Every key, in a fixed order, with round-trip exact numbers.
std::string serialize(const Scenario& s);

/// Cross-field checks; errors name the offending key.
void validate(const Scenario& s);

/// Builds the per-UE datasets and the initial model.
ota::Federation build_federation(const Scenario& s);
fl::ModelParams initial_model(const Scenario& s, const ota::Federation& fed);

/// One point of a synchronization sweep: ptp_on, or ptp_off with a spread.
struct SweepPoint {
  sync::SyncMode mode = sync::SyncMode::ptp_off;
  std::size_t off_spread = 0;

  /// "ptp_on" or a nonnegative sample count.
  static SweepPoint parse(const std::string& token);
  std::string label() const;
};

struct SweepRow {
  SweepPoint point;
  double mean_agg_nmse_db = 0.0;
  double mean_peak_spread = 0.0;
  std::size_t max_peak_spread = 0;
  std::size_t aborted = 0;
};

/// One OTA round from the initial model per seed (master seeds base, base+1,
/// ...), identical across points except for the timing offsets.
std::vector<SweepRow> sync_sweep(const Scenario& base, const std::vector<SweepPoint>& points,
                                 std::size_t seeds);

/// Keys the parser accepts, in serialization order.
const std::vector<std::string>& known_keys();

}  // namespace otafl::scenario
