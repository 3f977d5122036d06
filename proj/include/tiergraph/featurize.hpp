#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "tiergraph/mol_graph.hpp"

namespace tiergraph {

enum class SchemeName { kQm9Style, kBindingDbStyle };

struct UnknownElement : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FeatureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One contiguous slice of the atom feature vector. Segments flagged `strict`
// are one-hot (exactly one 1); others may be all-zero (e.g. hybridization of
// a hydrogen) or hold raw values.
struct FeatureSegment {
  std::string name;
  int offset = 0;
  int width = 0;
  bool one_hot = false;
  bool strict = false;
};

struct FeatureScheme {
  SchemeName name = SchemeName::kQm9Style;
  int atom_dim = 0;
  int bond_dim = 0;
  std::vector<std::string> atom_vocab;
  std::vector<FeatureSegment> layout;

  std::string id() const;  // "qm9" / "bindingdb"
};

const FeatureScheme& qm9_scheme();
const FeatureScheme& bindingdb_scheme();
const FeatureScheme& scheme_by_id(const std::string& id);

struct FeatureMatrix {
  Eigen::MatrixXd X;  // n x atom_dim, tier-1 input
  Eigen::MatrixXd E;  // bonds x bond_dim, aligned with MolecularGraph::bonds
  SchemeName scheme = SchemeName::kQm9Style;
};

Eigen::VectorXd atom_features(const MolecularGraph& g, int atom, const FeatureScheme& scheme);
Eigen::VectorXd bond_features(const MolecularGraph& g, int bond, const FeatureScheme& scheme);
FeatureMatrix featurize_molecule(const MolecularGraph& g, const FeatureScheme& scheme);

// Conjugation: aromatic, or a single bond whose both endpoints carry another
// multiple bond, or a double bond adjacent to another multiple bond.
bool bond_is_conjugated(const MolecularGraph& g, int bond);

}  // namespace tiergraph
