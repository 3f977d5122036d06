#pragma once

#include <Eigen/Dense>
#include <map>
#include <utility>
#include <vector>

#include "tiergraph/sdf.hpp"

namespace tiergraph {

enum class Hybridization { kSp, kSp2, kSp3, kSp3d, kSp3d2, kOther };

// Perception-annotated molecular graph. Ring lists are SSSR cycles stored as
// closed walks (consecutive entries, and last-to-first, are bonds).
struct MolecularGraph {
  int n = 0;
  Eigen::MatrixXd adjacency;  // symmetric 0/1, zero diagonal
  std::vector<Bond> bonds;
  std::map<std::pair<int, int>, BondOrder> bond_order;  // key = (min, max)
  std::vector<std::vector<int>> rings;
  std::vector<bool> aromatic_atoms;
  std::vector<bool> aromatic_bonds;  // aligned with `bonds`
  std::vector<Hybridization> hybridization;
  std::vector<int> degree;
  std::vector<int> implicit_valence;
  std::vector<int> h_count;  // explicit H neighbours
  std::vector<std::string> elements;
  std::vector<int> formal_charge;
  std::vector<std::vector<int>> neighbors;

  BondOrder order(int a, int b) const;
  bool is_aromatic_bond(int bond_index) const { return aromatic_bonds[bond_index]; }
  // Effective aromatic character of the bond between a and b: either typed
  // AROMATIC in the input or flagged by ring perception.
  bool aromatic_between(int a, int b) const;
  int bond_index(int a, int b) const;  // -1 when not bonded
};

// Smallest set of smallest rings: a minimum cycle basis of size
// bonds - atoms + components, computed from Horton candidate cycles with a
// deterministic (length, sorted-vertex, sorted-edge) tie-break.
std::vector<std::vector<int>> sssr(int n, const std::vector<Bond>& bonds);

std::vector<int> connected_components(int n, const std::vector<Bond>& bonds);

// Flags aromatic rings: every ring atom C/N/O/S and sp2-capable, no exocyclic
// multiple bond on a ring atom, and a 4n+2 count of pi electrons under a
// simplified contribution rule (C or N in a double or aromatic-typed bond: 1;
// N/O/S contributing a lone pair: 2).
void perceive_aromaticity(MolecularGraph& g);

void perceive_hybridization(MolecularGraph& g);

MolecularGraph build_graph(const Molecule& m);

int default_valence(const std::string& element);
int atomic_number(const std::string& element);  // 0 when unknown

}  // namespace tiergraph
