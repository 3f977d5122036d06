#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiergraph {

inline constexpr int kTargetCount = 12;

// Canonical column ids of the 12 regression targets, in dataset order.
inline constexpr std::array<const char*, kTargetCount> kTargetColumns = {
    "mu", "alpha", "homo", "lumo", "gap", "r2",
    "zpve", "u0", "u298", "h298", "g298", "cv"};

inline constexpr std::array<const char*, kTargetCount> kTargetNames = {
    "μ", "α", "HOMO", "LUMO", "gap", "R²", "ZPVE", "U₀", "U", "H", "G", "C_v"};

inline constexpr std::array<const char*, kTargetCount> kTargetUnits = {
    "Debye", "Bohr³", "Hartree", "Hartree", "Hartree", "Bohr²",
    "Hartree", "Hartree", "Hartree", "Hartree", "Hartree", "cal/(mol·K)"};

enum class TargetKeying { kByIndex, kByCid };

struct TargetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingColumn : TargetError {
  using TargetError::TargetError;
};
struct NonNumericValue : TargetError {
  using TargetError::TargetError;
};
struct DuplicateKey : TargetError {
  using TargetError::TargetError;
};

struct TargetTable {
  TargetKeying keying = TargetKeying::kByCid;
  std::vector<std::string> keys;  // file order
  std::map<std::string, std::array<double, kTargetCount>> rows;

  bool has(const std::string& key) const { return rows.count(key) > 0; }
  const std::array<double, kTargetCount>& row(const std::string& key) const;
};

// Reads a comma- or tab-delimited table with a header naming one key column
// ("key", "cid", "id" or "index") and the 12 target columns. Values are kept
// as given; no unit conversion is applied.
TargetTable load_targets(const std::string& path, TargetKeying keying);

// Resolves a target column id (e.g. "homo") to its index, or -1.
int target_index(const std::string& column);

}  // namespace tiergraph
