#include "tiergraph/grouping.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace tiergraph {
namespace {

bool is_heteroatom(const std::string& el) { return el != "C" && el != "H"; }

bool is_ons(const std::string& el) { return el == "O" || el == "N" || el == "S"; }

// True when every bond of `v` is a plain single bond (not aromatic-typed and
// not flagged aromatic by perception).
bool only_single_bonds(const MolecularGraph& g, int v) {
  for (int u : g.neighbors[v]) {
    if (g.order(v, u) != BondOrder::kSingle) return false;
    if (g.aromatic_between(v, u)) return false;
  }
  return true;
}

void sort_groups(std::vector<Group>& groups) {
  std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    if (a.atoms.front() != b.atoms.front()) return a.atoms.front() < b.atoms.front();
    if (a.atoms.size() != b.atoms.size()) return a.atoms.size() < b.atoms.size();
    return a.atoms < b.atoms;
  });
}

}  // namespace

std::vector<const Group*> GroupSet::of_kind(GroupKind k) const {
  std::vector<const Group*> out;
  for (const auto& g : groups)
    if (g.kind == k) out.push_back(&g);
  return out;
}

double GroupWeightConfig::kind_weight(GroupKind k) const {
  switch (k) {
    case GroupKind::kFg: return w_fg;
    case GroupKind::kRg: return w_rg;
    case GroupKind::kCcg: return w_ccg;
  }
  return 0.0;
}

void GroupWeightConfig::validate() const {
  if (mode == Mode::kConstantByKind) {
    if (w_fg <= 0.0 || w_rg <= 0.0 || w_ccg <= 0.0)
      throw std::invalid_argument("group weights must be positive");
  } else {
    if (!per_group) throw std::invalid_argument("PER_GROUP mode without weights");
    for (double w : *per_group)
      if (w <= 0.0) throw std::invalid_argument("group weights must be positive");
  }
}

std::vector<std::vector<int>> identify_functional_groups(const MolecularGraph& g) {
  std::vector<bool> marked(g.n, false);

  for (int v = 0; v < g.n; ++v) {
    const std::string& el = g.elements[v];
    if (el == "H") continue;
    if (is_heteroatom(el)) {
      marked[v] = true;  // (a) non-aromatic and (b) aromatic heteroatoms
      continue;
    }
    // carbon rules
    for (int u : g.neighbors[v]) {
      const BondOrder o = g.order(v, u);
      if ((o == BondOrder::kDouble || o == BondOrder::kTriple) &&
          !g.aromatic_between(v, u)) {
        if (is_heteroatom(g.elements[u]))
          marked[v] = true;  // (c) C multiply bonded to a heteroatom
        else if (g.elements[u] == "C")
          marked[v] = true;  // (d) non-aromatic C=C / C#C
      }
    }
    if (!marked[v] && g.hybridization[v] == Hybridization::kSp3) {
      int qualifying = 0;
      for (int u : g.neighbors[v])
        if (is_ons(g.elements[u]) && g.order(v, u) == BondOrder::kSingle &&
            only_single_bonds(g, u))
          ++qualifying;
      if (qualifying >= 2) marked[v] = true;  // (e) acetal-type carbon
    }
  }

  // (f) oxirane/aziridine/thiirane rings
  for (const auto& walk : g.rings) {
    if (walk.size() != 3) continue;
    int het = 0;
    for (int v : walk)
      if (is_ons(g.elements[v])) ++het;
    if (het == 1)
      for (int v : walk) marked[v] = true;
  }

  // merge phase: components of the marked-induced subgraph
  std::vector<std::vector<int>> fgs;
  std::vector<bool> seen(g.n, false);
  for (int s = 0; s < g.n; ++s) {
    if (!marked[s] || seen[s]) continue;
    std::vector<int> comp, stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      for (int u : g.neighbors[v])
        if (marked[u] && !seen[u]) {
          seen[u] = true;
          stack.push_back(u);
        }
    }
    std::sort(comp.begin(), comp.end());
    fgs.push_back(std::move(comp));
  }
  std::sort(fgs.begin(), fgs.end());
  return fgs;
}

std::vector<std::vector<int>> identify_ring_groups(const MolecularGraph& g) {
  std::vector<std::vector<int>> rgs;
  for (const auto& walk : g.rings) {
    std::vector<int> atoms(walk);
    std::sort(atoms.begin(), atoms.end());
    rgs.push_back(std::move(atoms));
  }
  std::sort(rgs.begin(), rgs.end());
  return rgs;
}

GroupSet build_group_set(const MolecularGraph& g) {
  GroupSet gs;
  std::vector<bool> covered(g.n, false);
  for (auto& atoms : identify_functional_groups(g)) {
    for (int v : atoms) covered[v] = true;
    gs.groups.push_back({GroupKind::kFg, std::move(atoms)});
  }
  for (auto& atoms : identify_ring_groups(g)) {
    for (int v : atoms) covered[v] = true;
    gs.groups.push_back({GroupKind::kRg, std::move(atoms)});
  }
  std::vector<int> rest;
  for (int v = 0; v < g.n; ++v)
    if (!covered[v]) rest.push_back(v);
  if (!rest.empty()) gs.groups.push_back({GroupKind::kCcg, std::move(rest)});
  sort_groups(gs.groups);
  return gs;
}

TieredMembership build_membership(const GroupSet& gs, int n_atoms,
                                  const GroupWeightConfig& weights) {
  weights.validate();
  const int ng = static_cast<int>(gs.groups.size());
  if (weights.mode == GroupWeightConfig::Mode::kPerGroup &&
      static_cast<int>(weights.per_group->size()) != ng)
    throw WeightCountMismatch("expected " + std::to_string(ng) + " weights, got " +
                              std::to_string(weights.per_group->size()));

  TieredMembership tm;
  tm.m1 = Eigen::MatrixXd::Zero(n_atoms, ng);
  tm.m2 = Eigen::VectorXd::Zero(ng);
  for (int i = 0; i < ng; ++i) {
    for (int v : gs.groups[i].atoms) tm.m1(v, i) = 1.0;
    tm.m2[i] = weights.mode == GroupWeightConfig::Mode::kConstantByKind
                   ? weights.kind_weight(gs.groups[i].kind)
                   : (*weights.per_group)[i];
  }
  return tm;
}

GroupStats group_stats(const std::vector<std::size_t>& group_counts) {
  if (group_counts.empty()) throw EmptyDataset("no molecules in dataset");
  GroupStats st;
  st.molecules = group_counts.size();
  std::size_t total = 0;
  st.min = static_cast<int>(group_counts.front());
  st.max = static_cast<int>(group_counts.front());
  for (std::size_t c : group_counts) {
    total += c;
    st.min = std::min<int>(st.min, static_cast<int>(c));
    st.max = std::max<int>(st.max, static_cast<int>(c));
    ++st.histogram[static_cast<int>(c)];
  }
  st.mean = static_cast<double>(total) / static_cast<double>(group_counts.size());
  return st;
}

}  // namespace tiergraph
