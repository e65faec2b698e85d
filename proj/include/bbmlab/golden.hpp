#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace bbmlab {

/// Frozen snapshot of a pipeline run: hash of the config file bytes, hash of
/// the produced CSV bytes, and named scalar results with per-entry comparison
/// tolerances.  Scalar values are stored as shortest round-trip decimal
/// strings so "inf" survives the JSON round trip.
struct GoldenRecord {
  std::string config_hash;
  std::string csv_hash;
  std::map<std::string, double> scalars;
  std::map<std::string, double> tolerances;
  bool operator==(const GoldenRecord&) const = default;
};

/// FNV-1a 64-bit hash rendered as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

std::string golden_to_json(const GoldenRecord& rec);
GoldenRecord golden_from_json(const std::string& text);

/// Mismatch list comparing a fresh run against the stored record: hashes must
/// match exactly, scalars within the stored tolerances (equal values always
/// pass, so infinities compare clean).  Empty result means the records agree.
std::vector<std::string> golden_diff(const GoldenRecord& stored, const GoldenRecord& fresh);

}  // namespace bbmlab
