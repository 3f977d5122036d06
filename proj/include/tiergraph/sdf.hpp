#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tiergraph {

enum class BondOrder : int {
  kSingle = 1,
  kDouble = 2,
  kTriple = 3,
  kAromatic = 4,
};

struct Atom {
  std::string element;
  int formal_charge = 0;
  std::array<double, 3> position{0.0, 0.0, 0.0};

  bool operator==(const Atom&) const = default;
};

// Endpoints are 0-based atom indices; the unordered pair is unique per molecule.
struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::kSingle;

  bool operator==(const Bond&) const = default;
};

struct Molecule {
  std::string title;
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::map<std::string, std::string> props;

  bool operator==(const Molecule&) const = default;

  std::optional<std::string> prop(std::string_view name) const;
  // PUBCHEM_COMPOUND_CID / "PubChem CID" data item, or fallback when absent.
  std::string cid_or(std::string_view fallback) const;
};

struct SdfParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedCountsLine : SdfParseError {
  using SdfParseError::SdfParseError;
};
struct UnsupportedVersion : SdfParseError {
  using SdfParseError::SdfParseError;
};
struct AtomIndexOutOfRange : SdfParseError {
  using SdfParseError::SdfParseError;
};
struct TruncatedBlock : SdfParseError {
  using SdfParseError::SdfParseError;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses one MOL/SD block (counts line through optional data items).
Molecule parse_sdf_record(std::string_view text);

// V2000 writer; parse_sdf_record(serialize_molecule(m)) == m up to the
// 4-decimal coordinate precision of the format.
std::string serialize_molecule(const Molecule& m);

// One element of a multi-record stream. A record that fails to parse is
// reported in place without aborting the rest of the stream.
struct SdfItem {
  std::size_t index = 0;
  std::optional<Molecule> molecule;
  std::string error;

  bool ok() const { return molecule.has_value(); }
};

// Sequential reader over "$$$$"-delimited records. Whitespace-only segments
// (e.g. after a trailing terminator) are not records.
class SdfReader {
 public:
  explicit SdfReader(const std::string& path);
  explicit SdfReader(std::istream& is);
  ~SdfReader();

  std::optional<SdfItem> next();

 private:
  std::unique_ptr<std::istream> owned_;
  std::istream* is_;
  std::size_t index_ = 0;
};

// Eager convenience wrapper around SdfReader.
std::vector<SdfItem> read_sdf_file(const std::string& path);

}  // namespace tiergraph
