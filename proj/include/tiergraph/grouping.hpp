#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tiergraph/mol_graph.hpp"

namespace tiergraph {

enum class GroupKind { kFg, kRg, kCcg };

struct Group {
  GroupKind kind = GroupKind::kCcg;
  std::vector<int> atoms;  // sorted ascending
};

// All FGs, then all RGs, then at most one CCG; within a kind ordered by
// (smallest member, size, lexicographic). Every atom belongs to >= 1 group.
struct GroupSet {
  std::vector<Group> groups;

  std::size_t size() const { return groups.size(); }
  std::vector<const Group*> of_kind(GroupKind k) const;
};

struct GroupWeightConfig {
  enum class Mode { kConstantByKind, kPerGroup };
  Mode mode = Mode::kConstantByKind;
  double w_fg = 1.0;
  double w_rg = 0.5;
  double w_ccg = 0.1;
  std::optional<std::vector<double>> per_group;

  double kind_weight(GroupKind k) const;
  void validate() const;  // all weights must be positive
};

struct WeightCountMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyDataset : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// M1: atoms x groups binary membership (overlaps allowed, every row covered);
// M2: per-group weight column.
struct TieredMembership {
  Eigen::MatrixXd m1;
  Eigen::VectorXd m2;
};

// Marked-atom functional group identification. Marks: heteroatoms; carbons
// double/triple-bonded (non-aromatic) to anything; sp3 carbons single-bonded
// to two or more single-bonded O/N/S; three-membered rings with exactly one
// O/N/S. Merges marked atoms over bonds between marked atoms.
std::vector<std::vector<int>> identify_functional_groups(const MolecularGraph& g);

// One ring group per SSSR ring, heavy ring atoms exactly.
std::vector<std::vector<int>> identify_ring_groups(const MolecularGraph& g);

GroupSet build_group_set(const MolecularGraph& g);

TieredMembership build_membership(const GroupSet& gs, int n_atoms,
                                  const GroupWeightConfig& weights);

struct GroupStats {
  std::size_t molecules = 0;
  double mean = 0.0;
  int min = 0;
  int max = 0;
  std::map<int, std::size_t> histogram;
};

GroupStats group_stats(const std::vector<std::size_t>& group_counts);

}  // namespace tiergraph
