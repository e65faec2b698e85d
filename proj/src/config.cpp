#include "bbmlab/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

#include "bbmlab/common.hpp"

namespace bbmlab {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

using Violations = std::vector<std::string>;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed, Violations& bad) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) {
      if (it.key() == a) ok = true;
    }
    if (!ok) bad.push_back("unknown key '" + it.key() + "' in " + where);
  }
}

bool fetch_real(const json& obj, const std::string& name, bool required, double& out,
                Violations& bad) {
  const std::string key = name.substr(name.rfind('.') + 1);
  if (!obj.contains(key)) {
    if (required) bad.push_back(name + " is required");
    return false;
  }
  if (!obj[key].is_number()) {
    bad.push_back(name + " must be a number");
    return false;
  }
  out = obj[key].get<double>();
  return true;
}

bool fetch_int(const json& obj, const std::string& name, bool required, int& out,
               Violations& bad) {
  const std::string key = name.substr(name.rfind('.') + 1);
  if (!obj.contains(key)) {
    if (required) bad.push_back(name + " is required");
    return false;
  }
  if (!obj[key].is_number_integer()) {
    bad.push_back(name + " must be an integer");
    return false;
  }
  out = obj[key].get<int>();
  return true;
}

bool fetch_string(const json& obj, const std::string& name, bool required, std::string& out,
                  Violations& bad) {
  const std::string key = name.substr(name.rfind('.') + 1);
  if (!obj.contains(key)) {
    if (required) bad.push_back(name + " is required");
    return false;
  }
  if (!obj[key].is_string()) {
    bad.push_back(name + " must be a string");
    return false;
  }
  out = obj[key].get<std::string>();
  return true;
}

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

/// Array of finite positive numbers, strictly decreasing.
bool fetch_schedule_list(const json& obj, const std::string& name, std::vector<double>& out,
                         Violations& bad) {
  const std::string key = name.substr(name.rfind('.') + 1);
  if (!obj.contains(key)) {
    bad.push_back(name + " is required");
    return false;
  }
  const json& arr = obj[key];
  if (!arr.is_array() || arr.empty()) {
    bad.push_back(name + " must be a non-empty array of numbers");
    return false;
  }
  out.clear();
  for (const json& v : arr) {
    if (!v.is_number() || !positive_finite(v.get<double>())) {
      bad.push_back(name + " entries must be positive finite numbers");
      return false;
    }
    out.push_back(v.get<double>());
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (!(out[i] < out[i - 1])) {
      bad.push_back("schedule not decreasing (" + name + ")");
      return false;
    }
  }
  return true;
}

void parse_map(const json& m, const std::string& base_dir, ExperimentConfig& cfg,
               Violations& bad) {
  if (!m.is_object()) {
    bad.push_back("map must be an object");
    return;
  }
  MapConfig mc;
  if (!fetch_string(m, "map.kind", true, mc.kind, bad)) return;
  if (mc.kind == "scalar_expr") {
    check_keys(m, "map", {"kind", "expr"}, bad);
    if (fetch_string(m, "map.expr", true, mc.expr, bad) && mc.expr.empty()) {
      bad.push_back("map.expr must not be empty");
    }
  } else if (mc.kind == "identity_circle") {
    check_keys(m, "map", {"kind"}, bad);
  } else if (mc.kind == "table") {
    check_keys(m, "map", {"kind", "values", "file"}, bad);
    const bool has_values = m.contains("values");
    const bool has_file = m.contains("file");
    if (has_values == has_file) {
      bad.push_back("table map takes either values or file, not both");
      return;
    }
    if (has_values) {
      if (!m["values"].is_array() || m["values"].empty()) {
        bad.push_back("map.values must be a non-empty array of numbers");
        return;
      }
      for (const json& v : m["values"]) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
          bad.push_back("map.values entries must be finite numbers");
          return;
        }
        mc.values.push_back(v.get<double>());
      }
    } else {
      if (!fetch_string(m, "map.file", true, mc.file, bad)) return;
      const fs::path path = base_dir.empty() ? fs::path(mc.file) : fs::path(base_dir) / mc.file;
      if (!fs::exists(path)) {
        bad.push_back("map table file does not exist: " + path.string());
      }
    }
  } else {
    bad.push_back("map.kind must be scalar_expr, identity_circle, or table");
    return;
  }
  cfg.map = std::move(mc);
}

void parse_mollifier(const json& mo, ExperimentConfig& cfg, Violations& bad) {
  if (!mo.is_object()) {
    bad.push_back("mollifier must be an object");
    return;
  }
  if (!mo.contains("family")) {
    bad.push_back("mollifier.family is required");
    return;
  }
  MollifierConfig mc;
  const json& fam = mo["family"];
  if (fam.is_number_integer()) {
    mc.kind = "builtin";
    mc.kappa = fam.get<int>();
    if (mc.kappa < 1 || mc.kappa > 5) {
      bad.push_back("mollifier family must be 1..5, \"table\", or \"expr\"");
      return;
    }
    check_keys(mo, "mollifier", {"family", "p"}, bad);
    if (fetch_real(mo, "mollifier.p", true, mc.p, bad) &&
        (!(mc.p >= 1.0) || !std::isfinite(mc.p))) {
      bad.push_back("mollifier p must be >= 1");
    }
  } else if (fam.is_string() && fam.get<std::string>() == "table") {
    mc.kind = "table";
    check_keys(mo, "mollifier", {"family", "base", "bins"}, bad);
    if (fetch_real(mo, "mollifier.base", true, mc.base, bad) && !positive_finite(mc.base)) {
      bad.push_back("mollifier base must be a positive finite number");
    }
    if (!mo.contains("bins") || !mo["bins"].is_object() || mo["bins"].empty()) {
      bad.push_back("mollifier.bins must be a non-empty object of bin values");
      return;
    }
    for (auto it = mo["bins"].begin(); it != mo["bins"].end(); ++it) {
      char* end = nullptr;
      const long j = std::strtol(it.key().c_str(), &end, 10);
      if (end == it.key().c_str() || *end != '\0') {
        bad.push_back("mollifier bins key '" + it.key() + "' is not an integer");
        return;
      }
      if (!it.value().is_number() || !(it.value().get<double>() >= 0.0) ||
          !std::isfinite(it.value().get<double>())) {
        bad.push_back("mollifier bin values must be finite and non-negative");
        return;
      }
      mc.bins[static_cast<int>(j)] = it.value().get<double>();
    }
  } else if (fam.is_string() && fam.get<std::string>() == "expr") {
    mc.kind = "expr";
    check_keys(mo, "mollifier", {"family", "formula", "p"}, bad);
    if (fetch_string(mo, "mollifier.formula", true, mc.formula, bad) && mc.formula.empty()) {
      bad.push_back("mollifier.formula must not be empty");
    }
    if (fetch_real(mo, "mollifier.p", true, mc.p, bad) &&
        (!(mc.p >= 1.0) || !std::isfinite(mc.p))) {
      bad.push_back("mollifier p must be >= 1");
    }
  } else {
    bad.push_back("mollifier family must be 1..5, \"table\", or \"expr\"");
    return;
  }
  cfg.mollifier = std::move(mc);
}

void parse_schedules(const json& s, ExperimentConfig& cfg, Violations& bad) {
  if (!s.is_object()) {
    bad.push_back("schedules must be an object");
    return;
  }
  check_keys(s, "schedules", {"delta", "radius", "window"}, bad);
  ScheduleConfig sc;
  const bool have_delta = fetch_schedule_list(s, "schedules.delta", sc.delta, bad);
  fetch_schedule_list(s, "schedules.radius", sc.radius, bad);
  if (fetch_int(s, "schedules.window", false, sc.window, bad) && sc.window < 1) {
    bad.push_back("window must be a positive integer");
  } else if (have_delta && sc.window > static_cast<int>(sc.delta.size())) {
    bad.push_back("window exceeds the delta schedule length");
  }
  cfg.schedules = std::move(sc);
}

void parse_energy(const json& e, ExperimentConfig& cfg, Violations& bad) {
  if (!e.is_object()) {
    bad.push_back("energy must be an object");
    return;
  }
  check_keys(e, "energy", {"h", "dictionary", "regions", "tol"}, bad);
  EnergyConfig ec;
  if (fetch_real(e, "energy.h", true, ec.h, bad) && !positive_finite(ec.h)) {
    bad.push_back("energy.h must be a positive finite number");
  }
  if (!e.contains("dictionary") || !e["dictionary"].is_object()) {
    bad.push_back("energy.dictionary must be an object with size and cap");
  } else {
    const json& d = e["dictionary"];
    check_keys(d, "energy.dictionary", {"size", "cap"}, bad);
    if (fetch_int(d, "energy.dictionary.size", true, ec.dictionary_size, bad) &&
        ec.dictionary_size < 1) {
      bad.push_back("dictionary size must be a positive integer");
    }
    if (fetch_real(d, "energy.dictionary.cap", true, ec.dictionary_cap, bad) &&
        !positive_finite(ec.dictionary_cap)) {
      bad.push_back("dictionary cap must be a positive finite number");
    }
  }
  if (fetch_int(e, "energy.regions", true, ec.regions, bad) && ec.regions < 1) {
    bad.push_back("regions must be a positive integer");
  }
  if (fetch_real(e, "energy.tol", false, ec.tol, bad) && !positive_finite(ec.tol)) {
    bad.push_back("tol must be a positive finite number");
  }
  cfg.energy = ec;
}

void parse_audit(const json& a, ExperimentConfig& cfg, Violations& bad) {
  if (!a.is_object()) {
    bad.push_back("audit must be an object");
    return;
  }
  check_keys(a, "audit", {"budget", "floor", "cap", "margin"}, bad);
  AuditConfig ac;
  if (fetch_int(a, "audit.budget", true, ac.budget, bad) && ac.budget < 0) {
    bad.push_back("audit budget must be a non-negative integer");
  }
  if (fetch_real(a, "audit.floor", false, ac.floor, bad) && !positive_finite(ac.floor)) {
    bad.push_back("audit floor must be a positive finite number");
  }
  if (fetch_real(a, "audit.cap", false, ac.cap, bad) && !positive_finite(ac.cap)) {
    bad.push_back("audit cap must be a positive finite number");
  }
  if (fetch_real(a, "audit.margin", false, ac.margin, bad) &&
      (!(ac.margin >= 0.0) || !std::isfinite(ac.margin))) {
    bad.push_back("audit margin must be a non-negative finite number");
  }
  cfg.audit = ac;
}

void parse_output(const json& o, ExperimentConfig& cfg, Violations& bad) {
  if (!o.is_object()) {
    bad.push_back("output must be an object");
    return;
  }
  check_keys(o, "output", {"csv", "golden"}, bad);
  OutputConfig oc;
  fetch_string(o, "output.csv", false, oc.csv, bad);
  fetch_string(o, "output.golden", false, oc.golden, bad);
  cfg.output = std::move(oc);
}

const ScheduleConfig& need_schedules(const ExperimentConfig& cfg) {
  if (!cfg.schedules) throw ValidationError("config has no schedules section");
  return *cfg.schedules;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("config must be a JSON object");

  Violations bad;
  check_keys(root, "config root",
             {"space", "map", "mollifier", "p", "schedules", "energy", "audit", "output"},
             bad);

  ExperimentConfig cfg;
  if (!root.contains("space")) {
    bad.push_back("space section is required");
  } else {
    const std::string dumped = root["space"].dump();
    try {
      (void)MetricMeasureSpace::from_json(dumped);
      cfg.space_json = dumped;
    } catch (const ValidationError& e) {
      bad.push_back(e.what());
    }
  }
  if (root.contains("map")) parse_map(root["map"], base_dir, cfg, bad);
  if (root.contains("mollifier")) parse_mollifier(root["mollifier"], cfg, bad);
  if (root.contains("p")) {
    double p = 0.0;
    if (!root["p"].is_number()) {
      bad.push_back("p must be a number");
    } else if (p = root["p"].get<double>(); !(p >= 1.0) || !std::isfinite(p)) {
      bad.push_back("p must be >= 1");
    } else {
      cfg.p = p;
    }
  }
  if (root.contains("schedules")) parse_schedules(root["schedules"], cfg, bad);
  if (root.contains("energy")) parse_energy(root["energy"], cfg, bad);
  if (root.contains("audit")) parse_audit(root["audit"], cfg, bad);
  if (root.contains("output")) parse_output(root["output"], cfg, bad);

  if (!bad.empty()) {
    std::string joined = "invalid config: ";
    for (std::size_t i = 0; i < bad.size(); ++i) {
      if (i) joined += "; ";
      joined += bad[i];
    }
    throw ValidationError(joined);
  }
  return cfg;
}

std::string serialize(const ExperimentConfig& cfg) {
  json root;
  root["space"] = json::parse(cfg.space_json);
  if (cfg.map) {
    json m;
    m["kind"] = cfg.map->kind;
    if (cfg.map->kind == "scalar_expr") m["expr"] = cfg.map->expr;
    if (cfg.map->kind == "table") {
      if (!cfg.map->file.empty()) {
        m["file"] = cfg.map->file;
      } else {
        m["values"] = cfg.map->values;
      }
    }
    root["map"] = std::move(m);
  }
  if (cfg.mollifier) {
    json mo;
    if (cfg.mollifier->kind == "builtin") {
      mo["family"] = cfg.mollifier->kappa;
      mo["p"] = cfg.mollifier->p;
    } else if (cfg.mollifier->kind == "table") {
      mo["family"] = "table";
      mo["base"] = cfg.mollifier->base;
      json bins = json::object();
      for (const auto& [j, v] : cfg.mollifier->bins) bins[std::to_string(j)] = v;
      mo["bins"] = std::move(bins);
    } else {
      mo["family"] = "expr";
      mo["formula"] = cfg.mollifier->formula;
      mo["p"] = cfg.mollifier->p;
    }
    root["mollifier"] = std::move(mo);
  }
  if (cfg.p) root["p"] = *cfg.p;
  if (cfg.schedules) {
    root["schedules"] = {{"delta", cfg.schedules->delta},
                         {"radius", cfg.schedules->radius},
                         {"window", cfg.schedules->window}};
  }
  if (cfg.energy) {
    root["energy"] = {{"h", cfg.energy->h},
                      {"dictionary",
                       {{"size", cfg.energy->dictionary_size},
                        {"cap", cfg.energy->dictionary_cap}}},
                      {"regions", cfg.energy->regions},
                      {"tol", cfg.energy->tol}};
  }
  if (cfg.audit) {
    root["audit"] = {{"budget", cfg.audit->budget},
                     {"floor", cfg.audit->floor},
                     {"cap", cfg.audit->cap},
                     {"margin", cfg.audit->margin}};
  }
  if (cfg.output) {
    json o = json::object();
    if (!cfg.output->csv.empty()) o["csv"] = cfg.output->csv;
    if (!cfg.output->golden.empty()) o["golden"] = cfg.output->golden;
    root["output"] = std::move(o);
  }
  return root.dump(2) + "\n";
}

MetricMeasureSpace build_space(const ExperimentConfig& cfg) {
  return MetricMeasureSpace::from_json(cfg.space_json);
}

MetricMap build_map(const ExperimentConfig& cfg, const MetricMeasureSpace& space,
                    const std::string& base_dir) {
  if (!cfg.map) throw ValidationError("config has no map section");
  const MapConfig& m = *cfg.map;
  if (m.kind == "scalar_expr") return scalar_map(space, field_from_expr(space, m.expr));
  if (m.kind == "identity_circle") return identity_circle_map(space);
  std::vector<double> vals = m.values;
  if (!m.file.empty()) {
    const fs::path path = base_dir.empty() ? fs::path(m.file) : fs::path(base_dir) / m.file;
    json arr;
    try {
      arr = json::parse(read_text_file(path.string()));
    } catch (const json::exception& e) {
      throw ValidationError("map table file is not valid JSON: " + path.string());
    }
    if (!arr.is_array()) throw ValidationError("map table file must hold a JSON array");
    vals.clear();
    for (const json& v : arr) {
      if (!v.is_number() || !std::isfinite(v.get<double>())) {
        throw ValidationError("map table entries must be finite numbers");
      }
      vals.push_back(v.get<double>());
    }
  }
  if (static_cast<int>(vals.size()) != space.size()) {
    throw ValidationError("table map has " + std::to_string(vals.size()) +
                          " values for a space of " + std::to_string(space.size()) + " atoms");
  }
  return scalar_map(space, ScalarField(std::move(vals)));
}

MollifierFamily build_family(const ExperimentConfig& cfg) {
  if (!cfg.mollifier) throw ValidationError("config has no mollifier section");
  const MollifierConfig& mo = *cfg.mollifier;
  if (mo.kind == "builtin") return MollifierFamily::builtin(mo.kappa, mo.p);
  if (mo.kind == "table") return MollifierFamily::step_table(mo.base, mo.bins);
  return MollifierFamily::expression(mo.formula, mo.p);
}

DeltaSchedule build_delta_schedule(const ExperimentConfig& cfg) {
  const ScheduleConfig& sc = need_schedules(cfg);
  DeltaSchedule out;
  out.deltas = sc.delta;
  out.window = sc.window;
  return out;
}

EnergyArgs build_energy_args(const ExperimentConfig& cfg) {
  const ScheduleConfig& sc = need_schedules(cfg);
  if (!cfg.energy) throw ValidationError("config has no energy section");
  EnergyArgs out;
  out.h = cfg.energy->h;
  out.tol = cfg.energy->tol;
  out.radius_grid = sc.radius;
  out.dictionary_size = cfg.energy->dictionary_size;
  out.dictionary_cap = cfg.energy->dictionary_cap;
  out.region_count = cfg.energy->regions;
  return out;
}

AdmissibilitySchedule build_audit_schedule(const ExperimentConfig& cfg) {
  const ScheduleConfig& sc = need_schedules(cfg);
  if (!cfg.audit) throw ValidationError("config has no audit section");
  AdmissibilitySchedule out;
  out.deltas = sc.delta;
  out.radii = sc.radius;
  out.window = sc.window;
  out.budget = cfg.audit->budget;
  out.floor = cfg.audit->floor;
  out.cap = cfg.audit->cap;
  out.region_margin = cfg.audit->margin;
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << text;
  if (!out) throw ValidationError("cannot write file: " + path);
}

}  // namespace bbmlab
