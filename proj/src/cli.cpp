#include "bbmlab/cli.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bbmlab/bbm.hpp"
#include "bbmlab/common.hpp"
#include "bbmlab/config.hpp"
#include "bbmlab/golden.hpp"
#include "bbmlab/mollifiers.hpp"
#include "bbmlab/regularity.hpp"

namespace bbmlab {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// Carries the mismatch list up to the exit-code dispatcher (exit code 2).
struct GoldenMismatch {
  std::vector<std::string> details;
};

constexpr double kScalarTol = 1e-9;

void emit(const json& j) { std::fputs((j.dump(2) + "\n").c_str(), stdout); }

/// Loaded configuration plus the directory its relative paths resolve
/// against and the raw bytes that golden records hash.
struct LoadedConfig {
  ExperimentConfig cfg;
  std::string base_dir;
  std::string raw;
};

LoadedConfig load(const std::string& path) {
  LoadedConfig out;
  out.raw = read_text_file(path);
  out.base_dir = fs::path(path).parent_path().string();
  out.cfg = parse_config(out.raw, out.base_dir);
  return out;
}

double require_p(const ExperimentConfig& cfg) {
  if (!cfg.p) throw ValidationError("config has no p value");
  return *cfg.p;
}

const OutputConfig& require_output(const ExperimentConfig& cfg) {
  if (!cfg.output) throw ValidationError("config has no output section");
  return *cfg.output;
}

std::string require_csv_path(const LoadedConfig& lc) {
  const OutputConfig& out = require_output(lc.cfg);
  if (out.csv.empty()) throw ValidationError("config output section has no csv path");
  return (fs::path(lc.base_dir) / out.csv).string();
}

std::string require_golden_path(const LoadedConfig& lc) {
  const OutputConfig& out = require_output(lc.cfg);
  if (out.golden.empty()) throw ValidationError("config output section has no golden path");
  return (fs::path(lc.base_dir) / out.golden).string();
}

json regularity_to_json(const RegularityReport& rep) {
  json j;
  j["constant"] = format_double(rep.constant);
  j["label"] = rep.label;
  j["witness_atom"] = rep.witness_atom;
  j["witness_radius"] = format_double(rep.witness_radius);
  j["witness_test"] = rep.witness_test;
  j["unbounded"] = rep.unbounded;
  j["flags"] = rep.flags;
  return j;
}

/// Everything a golden record needs from one pipeline execution, plus the
/// JSON summary the command prints.
struct PipelineResult {
  std::string csv;
  std::map<std::string, double> scalars;
  std::map<std::string, double> tolerances;
  json summary;
};

PipelineResult run_sandwich(const LoadedConfig& lc) {
  const MetricMeasureSpace space = build_space(lc.cfg);
  const MetricMap f = build_map(lc.cfg, space, lc.base_dir);
  const MollifierFamily family = build_family(lc.cfg);
  const double p = require_p(lc.cfg);
  const ExperimentReport rep =
      sandwich_report(space, space.all_atoms(), f, family, p, build_delta_schedule(lc.cfg),
                      build_energy_args(lc.cfg));

  PipelineResult out;
  out.csv = report_csv(rep);
  out.scalars = {{"liminf", rep.liminf_est},         {"limsup", rep.limsup_est},
                 {"energy_lower", rep.energy.lower}, {"energy_upper", rep.energy.upper},
                 {"lower_ratio", rep.lower_ratio},   {"upper_ratio", rep.upper_ratio}};
  for (const auto& [name, value] : out.scalars) {
    (void)value;
    out.tolerances[name] = kScalarTol;
  }
  out.summary["rows"] = static_cast<int>(rep.rows.size());
  out.summary["liminf"] = format_double(rep.liminf_est);
  out.summary["limsup"] = format_double(rep.limsup_est);
  out.summary["energy_lower"] = format_double(rep.energy.lower);
  out.summary["energy_upper"] = format_double(rep.energy.upper);
  out.summary["lower_ratio"] = format_double(rep.lower_ratio);
  out.summary["upper_ratio"] = format_double(rep.upper_ratio);
  out.summary["tail_radius"] = format_double(rep.tail_radius);
  out.summary["best_candidate"] = rep.energy.best_candidate;
  out.summary["family"] = rep.family_label;
  out.summary["space"] = rep.space_label;
  json flags = json::array();
  for (const std::string& fl : rep.flags) flags.push_back(fl);
  for (const std::string& fl : rep.energy.flags) flags.push_back(fl);
  out.summary["flags"] = std::move(flags);
  return out;
}

PipelineResult run_audit(const LoadedConfig& lc) {
  const MetricMeasureSpace space = build_space(lc.cfg);
  const MollifierFamily family = build_family(lc.cfg);
  const double p = require_p(lc.cfg);
  const AdmissibilityReport rep =
      limit_admissibility(space, family, p, space.all_atoms(), build_audit_schedule(lc.cfg));

  PipelineResult out;
  out.csv = "delta,radius,lower_sum,upper_sum,decay\n";
  for (const AdmissibilityAuditRow& row : rep.rows) {
    out.csv += format_double(row.delta);
    out.csv += ',';
    out.csv += format_double(row.r);
    out.csv += ',';
    out.csv += format_double(row.lower);
    out.csv += ',';
    out.csv += format_double(row.upper);
    out.csv += ',';
    out.csv += format_double(row.decay);
    out.csv += '\n';
  }
  out.scalars = {{"lower_estimate", rep.lower_estimate},
                 {"upper_estimate", rep.upper_estimate},
                 {"lower_envelope_constant", rep.lower_envelope_constant},
                 {"upper_envelope_constant", rep.upper_envelope_constant},
                 {"lower_admissible", rep.lower_admissible ? 1.0 : 0.0},
                 {"upper_admissible", rep.upper_admissible ? 1.0 : 0.0},
                 {"decay_improves", rep.decay_improves ? 1.0 : 0.0}};
  out.tolerances = {{"lower_estimate", kScalarTol},
                    {"upper_estimate", kScalarTol},
                    {"lower_envelope_constant", kScalarTol},
                    {"upper_envelope_constant", kScalarTol},
                    {"lower_admissible", 0.0},
                    {"upper_admissible", 0.0},
                    {"decay_improves", 0.0}};
  out.summary["lower_estimate"] = format_double(rep.lower_estimate);
  out.summary["upper_estimate"] = format_double(rep.upper_estimate);
  out.summary["lower_admissible"] = rep.lower_admissible;
  out.summary["upper_admissible"] = rep.upper_admissible;
  out.summary["lower_envelope_constant"] = format_double(rep.lower_envelope_constant);
  out.summary["upper_envelope_constant"] = format_double(rep.upper_envelope_constant);
  json decay = json::array();
  for (double d : rep.decay_series) decay.push_back(format_double(d));
  out.summary["decay_series"] = std::move(decay);
  out.summary["decay_improves"] = rep.decay_improves;
  out.summary["rows"] = static_cast<int>(rep.rows.size());
  out.summary["flags"] = rep.flags;
  out.summary["family"] = family.describe();
  return out;
}

/// Sandwich when the config maps atoms somewhere, audit otherwise.
PipelineResult run_pipeline(const LoadedConfig& lc) {
  if (lc.cfg.map) return run_sandwich(lc);
  if (lc.cfg.mollifier) return run_audit(lc);
  throw ValidationError("golden commands need a map or a mollifier section");
}

GoldenRecord make_record(const LoadedConfig& lc, const PipelineResult& res) {
  GoldenRecord rec;
  rec.config_hash = fnv1a64_hex(lc.raw);
  rec.csv_hash = fnv1a64_hex(res.csv);
  rec.scalars = res.scalars;
  rec.tolerances = res.tolerances;
  return rec;
}

void cmd_space_build(const std::string& config_path) {
  const LoadedConfig lc = load(config_path);
  const MetricMeasureSpace space = build_space(lc.cfg);
  json j;
  j["atoms"] = space.size();
  j["dim"] = space.dim();
  j["mass"] = format_double(space.total_mass());
  j["h_min"] = format_double(space.h_min());
  j["diameter"] = format_double(space.diameter());
  if (lc.cfg.output && !lc.cfg.output->csv.empty()) {
    std::string csv = "id,weight";
    if (space.dim() >= 1) csv += ",x";
    if (space.dim() >= 2) csv += ",y";
    csv += '\n';
    for (AtomId i = 0; i < space.size(); ++i) {
      csv += std::to_string(i);
      csv += ',';
      csv += format_double(space.weight(i));
      for (int a = 0; a < space.dim(); ++a) {
        csv += ',';
        csv += format_double(space.coord(i, a));
      }
      csv += '\n';
    }
    const std::string path = require_csv_path(lc);
    write_text_file(path, csv);
    j["csv"] = path;
  }
  emit(j);
}

void cmd_check(const std::string& config_path, const std::string& which, double R,
               double lambda) {
  const LoadedConfig lc = load(config_path);
  const MetricMeasureSpace space = build_space(lc.cfg);
  RegularityReport rep;
  if (which == "doubling") {
    rep = doubling_constant(space, space.all_atoms(), R);
  } else if (which == "strong-doubling") {
    rep = strong_doubling_constant(space, space.all_atoms(), R);
  } else {
    const MetricMap f = build_map(lc.cfg, space, lc.base_dir);
    if (!f.target.is_real()) {
      throw ValidationError("check poincare needs a real-valued map");
    }
    ScalarField u(static_cast<std::size_t>(space.size()), 0.0);
    for (AtomId i = 0; i < space.size(); ++i) {
      u[static_cast<std::size_t>(i)] = f.target.value(f.to[static_cast<std::size_t>(i)]);
    }
    if (!lc.cfg.energy) throw ValidationError("config has no energy section");
    rep = poincare_constant(space, space.all_atoms(), R, lambda, require_p(lc.cfg), {u},
                            lc.cfg.energy->h);
  }
  emit(regularity_to_json(rep));
}

void cmd_mollifier_audit(const std::string& config_path) {
  const LoadedConfig lc = load(config_path);
  const PipelineResult res = run_audit(lc);
  const std::string path = require_csv_path(lc);
  write_text_file(path, res.csv);
  json j = res.summary;
  j["csv"] = path;
  emit(j);
}

void cmd_energy_estimate(const std::string& config_path) {
  const LoadedConfig lc = load(config_path);
  const MetricMeasureSpace space = build_space(lc.cfg);
  const MetricMap f = build_map(lc.cfg, space, lc.base_dir);
  if (!lc.cfg.energy) throw ValidationError("config has no energy section");
  EnergyArgs args;
  args.h = lc.cfg.energy->h;
  args.tol = lc.cfg.energy->tol;
  args.dictionary_size = lc.cfg.energy->dictionary_size;
  args.dictionary_cap = lc.cfg.energy->dictionary_cap;
  args.region_count = lc.cfg.energy->regions;
  if (lc.cfg.schedules) args.radius_grid = lc.cfg.schedules->radius;
  const EnergyEstimate est = energy_bracket(space, space.all_atoms(), f, require_p(lc.cfg), args);
  json j;
  j["lower"] = format_double(est.lower);
  j["upper"] = format_double(est.upper);
  j["method"] = est.best_candidate >= 0 ? "metric+scalar" : "metric";
  j["best_candidate"] = est.best_candidate;
  j["flags"] = est.flags;
  emit(j);
}

void cmd_run(const std::string& config_path) {
  const LoadedConfig lc = load(config_path);
  const PipelineResult res = run_sandwich(lc);
  const std::string path = require_csv_path(lc);
  write_text_file(path, res.csv);
  json j = res.summary;
  j["csv"] = path;
  emit(j);
}

void cmd_golden_record(const std::string& config_path) {
  const LoadedConfig lc = load(config_path);
  const PipelineResult res = run_pipeline(lc);
  const std::string csv_path = require_csv_path(lc);
  const std::string golden_path = require_golden_path(lc);
  write_text_file(csv_path, res.csv);
  const GoldenRecord rec = make_record(lc, res);
  write_text_file(golden_path, golden_to_json(rec));
  json j;
  j["recorded"] = golden_path;
  j["csv"] = csv_path;
  j["config_hash"] = rec.config_hash;
  j["csv_hash"] = rec.csv_hash;
  emit(j);
}

void cmd_golden_compare(const std::string& config_path) {
  const LoadedConfig lc = load(config_path);
  const std::string golden_path = require_golden_path(lc);
  const GoldenRecord stored = golden_from_json(read_text_file(golden_path));
  const PipelineResult res = run_pipeline(lc);
  const GoldenRecord fresh = make_record(lc, res);
  const std::vector<std::string> diff = golden_diff(stored, fresh);
  if (!diff.empty()) throw GoldenMismatch{diff};
  json j;
  j["match"] = true;
  j["golden"] = golden_path;
  j["csv_hash"] = fresh.csv_hash;
  emit(j);
}

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"numerical laboratory for nonlocal pair-energy experiments on discrete "
               "metric measure spaces"};
  app.require_subcommand(1);
  std::string config_path;
  double R = 0.0;
  double lambda = 0.0;

  const auto with_config = [&config_path](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "path to a JSON experiment config")
        ->required();
    return cmd;
  };

  CLI::App* space = app.add_subcommand("space", "space generators");
  space->require_subcommand(1);
  with_config(space->add_subcommand("build", "build the space and report its invariants"))
      ->callback([&] { cmd_space_build(config_path); });

  CLI::App* check = app.add_subcommand("check", "geometry and regularity scans");
  check->require_subcommand(1);
  for (const char* which : {"doubling", "strong-doubling", "poincare"}) {
    const std::string what =
        std::string(which) == "doubling"   ? "largest doubled-ball to ball mass ratio"
        : std::string(which) == "poincare" ? "certified lower bound on the oscillation constant"
                                           : "largest doubled-ball to shell mass ratio";
    CLI::App* sub = with_config(check->add_subcommand(which, what));
    sub->add_option("--R", R, "scan radii up to this scale")->required();
    if (std::string(which) == "poincare") {
      sub->add_option("--lambda", lambda, "ball enlargement factor of the slope average")
          ->required();
    }
    sub->callback([&, which] { cmd_check(config_path, which, R, lambda); });
  }

  CLI::App* mollifier = app.add_subcommand("mollifier", "kernel family audits");
  mollifier->require_subcommand(1);
  with_config(mollifier->add_subcommand("audit", "limit-admissibility audit to CSV"))
      ->callback([&] { cmd_mollifier_audit(config_path); });

  CLI::App* energy = app.add_subcommand("energy", "energy brackets");
  energy->require_subcommand(1);
  with_config(energy->add_subcommand("estimate", "two-sided energy bracket of the map"))
      ->callback([&] { cmd_energy_estimate(config_path); });

  with_config(app.add_subcommand("run", "sandwich experiment over the delta schedule"))
      ->callback([&] { cmd_run(config_path); });

  CLI::App* golden = app.add_subcommand("golden", "golden-record maintenance");
  golden->require_subcommand(1);
  with_config(golden->add_subcommand("record", "run the pipeline and freeze its record"))
      ->callback([&] { cmd_golden_record(config_path); });
  with_config(golden->add_subcommand("compare", "rerun and compare against the record"))
      ->callback([&] { cmd_golden_compare(config_path); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::fputs(app.help().c_str(), stdout);
    return 0;
  }
  return 0;
}

}  // namespace

int run_command(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const CLI::ParseError& e) {
    json j;
    j["error"] = "usage";
    j["detail"] = e.what();
    std::fputs((j.dump() + "\n").c_str(), stderr);
    return 1;
  } catch (const GoldenMismatch& e) {
    json j;
    j["error"] = "golden_mismatch";
    j["detail"] = e.details;
    std::fputs((j.dump() + "\n").c_str(), stderr);
    return 2;
  } catch (const ValidationError& e) {
    json j;
    j["error"] = "validation";
    j["detail"] = e.what();
    std::fputs((j.dump() + "\n").c_str(), stderr);
    return 1;
  } catch (const std::exception& e) {
    json j;
    j["error"] = "internal";
    j["detail"] = e.what();
    std::fputs((j.dump() + "\n").c_str(), stderr);
    return 1;
  }
}

}  // namespace bbmlab
