#include "bbmlab/golden.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>

#include "json.hpp"

#include "bbmlab/common.hpp"

namespace bbmlab {
namespace {

using nlohmann::json;

double parse_scalar(const std::string& text, const std::string& name) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw ValidationError("golden record entry '" + name + "' is not a number: " + text);
  }
  return v;
}

std::map<std::string, double> parse_scalar_map(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ValidationError("golden record " + where + " must be an object");
  std::map<std::string, double> out;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!it.value().is_string()) {
      throw ValidationError("golden record " + where + " values must be strings");
    }
    out[it.key()] = parse_scalar(it.value().get<std::string>(), where + "." + it.key());
  }
  return out;
}

json render_scalar_map(const std::map<std::string, double>& m) {
  json obj = json::object();
  for (const auto& [k, v] : m) obj[k] = format_double(v);
  return obj;
}

}  // namespace

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string golden_to_json(const GoldenRecord& rec) {
  json root;
  root["config_hash"] = rec.config_hash;
  root["csv_hash"] = rec.csv_hash;
  root["scalars"] = render_scalar_map(rec.scalars);
  root["tolerances"] = render_scalar_map(rec.tolerances);
  return root.dump(2) + "\n";
}

GoldenRecord golden_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("golden record is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ValidationError("golden record must be a JSON object");
  for (auto it = root.begin(); it != root.end(); ++it) {
    if (it.key() != "config_hash" && it.key() != "csv_hash" && it.key() != "scalars" &&
        it.key() != "tolerances") {
      throw ValidationError("unknown key '" + it.key() + "' in golden record");
    }
  }
  GoldenRecord rec;
  for (const char* key : {"config_hash", "csv_hash"}) {
    if (!root.contains(key) || !root[key].is_string()) {
      throw ValidationError("golden record needs a string '" + std::string(key) + "'");
    }
  }
  rec.config_hash = root["config_hash"].get<std::string>();
  rec.csv_hash = root["csv_hash"].get<std::string>();
  if (!root.contains("scalars") || !root.contains("tolerances")) {
    throw ValidationError("golden record needs scalars and tolerances objects");
  }
  rec.scalars = parse_scalar_map(root["scalars"], "scalars");
  rec.tolerances = parse_scalar_map(root["tolerances"], "tolerances");
  return rec;
}

std::vector<std::string> golden_diff(const GoldenRecord& stored, const GoldenRecord& fresh) {
  std::vector<std::string> out;
  if (stored.config_hash != fresh.config_hash) {
    out.push_back("config hash changed from " + stored.config_hash + " to " +
                  fresh.config_hash);
  }
  if (stored.csv_hash != fresh.csv_hash) {
    out.push_back("csv bytes changed (hash " + stored.csv_hash + " -> " + fresh.csv_hash +
                  ")");
  }
  for (const auto& [name, old_value] : stored.scalars) {
    const auto it = fresh.scalars.find(name);
    if (it == fresh.scalars.end()) {
      out.push_back("scalar '" + name + "' missing from the new run");
      continue;
    }
    const double new_value = it->second;
    if (old_value == new_value) continue;
    double tol = 0.0;
    if (const auto t = stored.tolerances.find(name); t != stored.tolerances.end()) {
      tol = t->second;
    }
    const double diff = std::abs(new_value - old_value);
    if (!(diff <= tol)) {
      out.push_back("scalar '" + name + "' moved from " + format_double(old_value) + " to " +
                    format_double(new_value) + " beyond tolerance " + format_double(tol));
    }
  }
  for (const auto& [name, value] : fresh.scalars) {
    (void)value;
    if (!stored.scalars.count(name)) {
      out.push_back("scalar '" + name + "' absent from the golden record");
    }
  }
  return out;
}

}  // namespace bbmlab
