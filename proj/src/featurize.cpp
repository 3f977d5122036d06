#include "tiergraph/featurize.hpp"

#include <algorithm>

namespace tiergraph {
namespace {

FeatureScheme make_qm9() {
  FeatureScheme s;
  s.name = SchemeName::kQm9Style;
  s.atom_vocab = {"H", "C", "N", "O", "F"};
  s.layout = {
      {"atom_type", 0, 5, true, true},
      {"hybridization", 5, 3, true, false},
      {"aromatic", 8, 1, false, false},
      {"atomic_number", 9, 1, false, false},
      {"num_h", 10, 1, false, false},
      {"donor", 11, 1, false, false},
      {"acceptor", 12, 1, false, false},
  };
  s.atom_dim = 13;
  s.bond_dim = 4;
  return s;
}

FeatureScheme make_bindingdb() {
  FeatureScheme s;
  s.name = SchemeName::kBindingDbStyle;
  // 44 symbols in the published order; the second 'Ti' is a dead slot that is
  // never set, 'unknown' is the fallback.
  s.atom_vocab = {"C",  "N",  "O",  "S",  "F",  "Si", "P",  "Cl", "Br", "Mg", "Na",
                  "Ca", "Fe", "As", "Al", "I",  "B",  "V",  "K",  "Ti", "Yb", "Sb",
                  "Sn", "Ag", "Pd", "Co", "Se", "Ti", "Zn", "H",  "Li", "Ge", "Cu",
                  "Au", "Ni", "Cd", "In", "Mn", "Zr", "Cr", "Pt", "Hg", "Pb",
                  "unknown"};
  s.layout = {
      {"atom_type", 0, 44, true, true},
      {"degree", 44, 11, true, true},
      {"implicit_valence", 55, 7, true, true},
      {"formal_charge", 62, 1, false, false},
      {"radical_electrons", 63, 1, false, false},
      {"hybridization", 64, 5, true, false},
      {"aromatic", 69, 1, false, false},
  };
  s.atom_dim = 70;
  s.bond_dim = 6;
  return s;
}

}  // namespace

std::string FeatureScheme::id() const {
  return name == SchemeName::kQm9Style ? "qm9" : "bindingdb";
}

const FeatureScheme& qm9_scheme() {
  static const FeatureScheme s = make_qm9();
  return s;
}

const FeatureScheme& bindingdb_scheme() {
  static const FeatureScheme s = make_bindingdb();
  return s;
}

const FeatureScheme& scheme_by_id(const std::string& id) {
  if (id == "qm9") return qm9_scheme();
  if (id == "bindingdb") return bindingdb_scheme();
  throw FeatureError("unknown feature scheme '" + id + "'");
}

bool bond_is_conjugated(const MolecularGraph& g, int bond) {
  const Bond& b = g.bonds[bond];
  const bool aromatic =
      g.aromatic_bonds[bond] || b.order == BondOrder::kAromatic;
  if (aromatic) return true;

  auto has_other_multiple = [&](int v, int other_end) {
    for (int u : g.neighbors[v]) {
      if (u == other_end) continue;
      const BondOrder o = g.order(v, u);
      if (o != BondOrder::kSingle) return true;
      if (g.aromatic_between(v, u)) return true;
    }
    return false;
  };
  if (b.order == BondOrder::kSingle)
    return has_other_multiple(b.a, b.b) && has_other_multiple(b.b, b.a);
  if (b.order == BondOrder::kDouble)
    return has_other_multiple(b.a, b.b) || has_other_multiple(b.b, b.a);
  return false;
}

Eigen::VectorXd atom_features(const MolecularGraph& g, int atom,
                              const FeatureScheme& scheme) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(scheme.atom_dim);
  const std::string& el = g.elements[atom];
  const Hybridization hyb = g.hybridization[atom];

  if (scheme.name == SchemeName::kQm9Style) {
    const auto it = std::find(scheme.atom_vocab.begin(), scheme.atom_vocab.end(), el);
    if (it == scheme.atom_vocab.end())
      throw UnknownElement("element '" + el + "' outside the QM9 vocabulary");
    x[it - scheme.atom_vocab.begin()] = 1.0;
    if (hyb == Hybridization::kSp) x[5] = 1.0;
    if (hyb == Hybridization::kSp2) x[6] = 1.0;
    if (hyb == Hybridization::kSp3) x[7] = 1.0;
    x[8] = g.aromatic_atoms[atom] ? 1.0 : 0.0;
    x[9] = atomic_number(el);
    x[10] = g.h_count[atom];
    const bool n_or_o = el == "N" || el == "O";
    x[11] = (n_or_o && g.h_count[atom] >= 1) ? 1.0 : 0.0;           // donor
    x[12] = (n_or_o && g.formal_charge[atom] <= 0) ? 1.0 : 0.0;     // acceptor
    return x;
  }

  // BindingDB-style layout. First matching vocabulary slot wins, so the
  // duplicated 'Ti' at position 27 stays dead.
  int slot = static_cast<int>(scheme.atom_vocab.size()) - 1;  // 'unknown'
  for (std::size_t i = 0; i < scheme.atom_vocab.size(); ++i)
    if (scheme.atom_vocab[i] == el) {
      slot = static_cast<int>(i);
      break;
    }
  x[slot] = 1.0;
  const int deg = g.degree[atom];
  if (deg < 0 || deg > 10)
    throw FeatureError("degree " + std::to_string(deg) + " outside one-hot range");
  x[44 + deg] = 1.0;
  const int iv = g.implicit_valence[atom];
  if (iv < 0 || iv > 6)
    throw FeatureError("implicit valence " + std::to_string(iv) + " outside one-hot range");
  x[55 + iv] = 1.0;
  x[62] = g.formal_charge[atom];
  x[63] = 0.0;  // radical electrons, closed-shell inputs
  switch (hyb) {
    case Hybridization::kSp: x[64] = 1.0; break;
    case Hybridization::kSp2: x[65] = 1.0; break;
    case Hybridization::kSp3: x[66] = 1.0; break;
    case Hybridization::kSp3d: x[67] = 1.0; break;
    case Hybridization::kSp3d2: x[68] = 1.0; break;
    case Hybridization::kOther: break;
  }
  x[69] = g.aromatic_atoms[atom] ? 1.0 : 0.0;
  return x;
}

Eigen::VectorXd bond_features(const MolecularGraph& g, int bond,
                              const FeatureScheme& scheme) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(scheme.bond_dim);
  const Bond& b = g.bonds[bond];
  // Aromatic-flagged bonds encode AROMATIC regardless of the kekulized order.
  BondOrder o = b.order;
  if (g.aromatic_bonds[bond]) o = BondOrder::kAromatic;
  x[static_cast<int>(o) - 1] = 1.0;
  if (scheme.name == SchemeName::kBindingDbStyle) {
    x[4] = bond_is_conjugated(g, bond) ? 1.0 : 0.0;
    bool in_ring = false;
    for (const auto& walk : g.rings) {
      for (std::size_t i = 0; i < walk.size() && !in_ring; ++i) {
        const int u = walk[i], v = walk[(i + 1) % walk.size()];
        if ((u == b.a && v == b.b) || (u == b.b && v == b.a)) in_ring = true;
      }
      if (in_ring) break;
    }
    x[5] = in_ring ? 1.0 : 0.0;
  }
  return x;
}

FeatureMatrix featurize_molecule(const MolecularGraph& g, const FeatureScheme& scheme) {
  FeatureMatrix fm;
  fm.scheme = scheme.name;
  fm.X.resize(g.n, scheme.atom_dim);
  for (int v = 0; v < g.n; ++v) fm.X.row(v) = atom_features(g, v, scheme);
  fm.E.resize(static_cast<int>(g.bonds.size()), scheme.bond_dim);
  for (std::size_t i = 0; i < g.bonds.size(); ++i)
    fm.E.row(static_cast<int>(i)) = bond_features(g, static_cast<int>(i), scheme);
  return fm;
}

}  // namespace tiergraph
