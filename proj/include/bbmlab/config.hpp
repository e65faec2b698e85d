#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bbmlab/bbm.hpp"
#include "bbmlab/fields.hpp"
#include "bbmlab/mm_space.hpp"
#include "bbmlab/mollifiers.hpp"

namespace bbmlab {

/// Target map description: a scalar expression over atom variables, the
/// identity of a circle grid, or an explicit value table (inline or loaded
/// from a JSON array file).
struct MapConfig {
  std::string kind;            // "scalar_expr" | "identity_circle" | "table"
  std::string expr;            // scalar_expr only
  std::vector<double> values;  // table, inline form
  std::string file;            // table, file form (path to a JSON array)
  bool operator==(const MapConfig&) const = default;
};

/// Kernel family description mirroring the library factories.
/// JSON forms: {"family": 1..5, "p": real},
///             {"family": "table", "base": real, "bins": {"j": value, ...}},
///             {"family": "expr", "formula": text, "p": real}.
struct MollifierConfig {
  std::string kind;  // "builtin" | "table" | "expr"
  int kappa = 0;     // builtin only
  double p = 1.0;    // builtin / expr
  double base = 0.0;
  std::map<int, double> bins;
  std::string formula;
  bool operator==(const MollifierConfig&) const = default;
};

/// Scale schedules shared by the experiment and audit pipelines.  Both lists
/// must be strictly decreasing; `window` is the tail width entering limit
/// estimates (the only schedule field with a default).
struct ScheduleConfig {
  std::vector<double> delta;
  std::vector<double> radius;
  int window = 3;
  bool operator==(const ScheduleConfig&) const = default;
};

/// Energy-bracket parameters.  `tol` (the only defaulted field) caps how far
/// a smoothing candidate may sit from the target field.
struct EnergyConfig {
  double h = 0.0;
  int dictionary_size = 0;
  double dictionary_cap = 0.0;
  int regions = 0;
  double tol = 0.5;
  bool operator==(const EnergyConfig&) const = default;
};

/// Admissibility-audit knobs.  `budget` (chain-optimization effort) is
/// required; the verdict thresholds and the region margin have defaults.
struct AuditConfig {
  int budget = 0;
  double floor = 1e-6;
  double cap = 1e6;
  double margin = 0.0;
  bool operator==(const AuditConfig&) const = default;
};

/// Artifact paths.  Empty string means "not configured".
struct OutputConfig {
  std::string csv;
  std::string golden;
  bool operator==(const OutputConfig&) const = default;
};

/// Parsed experiment configuration.  `space` is the only required section;
/// each command validates that the sections it needs are present.  The space
/// generator object is kept as canonical JSON text.
struct ExperimentConfig {
  std::string space_json;
  std::optional<MapConfig> map;
  std::optional<MollifierConfig> mollifier;
  std::optional<double> p;
  std::optional<ScheduleConfig> schedules;
  std::optional<EnergyConfig> energy;
  std::optional<AuditConfig> audit;
  std::optional<OutputConfig> output;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parser: unknown keys are rejected at every level, numeric
/// invariants are checked, and every violation found is reported in one
/// ValidationError ("invalid config: a; b; ...").  `base_dir` resolves
/// relative paths referenced by the config (map table files).
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = "");

/// Canonical JSON rendering; parse_config(serialize(cfg)) == cfg.
std::string serialize(const ExperimentConfig& cfg);

MetricMeasureSpace build_space(const ExperimentConfig& cfg);
MetricMap build_map(const ExperimentConfig& cfg, const MetricMeasureSpace& space,
                    const std::string& base_dir = "");
MollifierFamily build_family(const ExperimentConfig& cfg);
DeltaSchedule build_delta_schedule(const ExperimentConfig& cfg);
EnergyArgs build_energy_args(const ExperimentConfig& cfg);
AdmissibilitySchedule build_audit_schedule(const ExperimentConfig& cfg);

/// Whole-file text IO; write creates parent directories.  Both throw
/// ValidationError with the offending path on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace bbmlab
