#include "tiergraph/mol_graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <set>

namespace tiergraph {
namespace {

std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Edge-set bit vector for GF(2) independence tests.
struct EdgeVec {
  std::vector<std::uint64_t> w;
  explicit EdgeVec(std::size_t nedges) : w((nedges + 63) / 64, 0) {}
  void set(std::size_t i) { w[i / 64] ^= std::uint64_t(1) << (i % 64); }
  void operator^=(const EdgeVec& o) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] ^= o.w[i];
  }
  int leading() const {
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i]) return static_cast<int>(i * 64 + std::countr_zero(w[i]));
    return -1;
  }
  bool empty() const {
    for (auto x : w)
      if (x) return false;
    return true;
  }
};

struct Candidate {
  std::vector<int> walk;
  std::vector<int> sorted_vertices;
  std::vector<std::pair<int, int>> sorted_edges;

  bool operator<(const Candidate& o) const {
    if (walk.size() != o.walk.size()) return walk.size() < o.walk.size();
    if (sorted_vertices != o.sorted_vertices) return sorted_vertices < o.sorted_vertices;
    return sorted_edges < o.sorted_edges;
  }
  bool operator==(const Candidate& o) const { return sorted_edges == o.sorted_edges; }
};

}  // namespace

BondOrder MolecularGraph::order(int a, int b) const {
  auto it = bond_order.find(key(a, b));
  if (it == bond_order.end()) throw std::out_of_range("no bond between atoms");
  return it->second;
}

int MolecularGraph::bond_index(int a, int b) const {
  for (std::size_t i = 0; i < bonds.size(); ++i)
    if (key(bonds[i].a, bonds[i].b) == key(a, b)) return static_cast<int>(i);
  return -1;
}

bool MolecularGraph::aromatic_between(int a, int b) const {
  const int i = bond_index(a, b);
  if (i < 0) return false;
  return aromatic_bonds[i] || bonds[i].order == BondOrder::kAromatic;
}

std::vector<int> connected_components(int n, const std::vector<Bond>& bonds) {
  std::vector<std::vector<int>> adj(n);
  for (const auto& b : bonds) {
    adj[b.a].push_back(b.b);
    adj[b.b].push_back(b.a);
  }
  std::vector<int> comp(n, -1);
  int c = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::deque<int> q{s};
    comp[s] = c;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      for (int u : adj[v])
        if (comp[u] < 0) {
          comp[u] = c;
          q.push_back(u);
        }
    }
    ++c;
  }
  return comp;
}

std::vector<std::vector<int>> sssr(int n, const std::vector<Bond>& bonds) {
  std::vector<std::vector<int>> adj(n);
  std::map<std::pair<int, int>, int> edge_id;
  for (const auto& b : bonds) {
    adj[b.a].push_back(b.b);
    adj[b.b].push_back(b.a);
    edge_id.emplace(key(b.a, b.b), static_cast<int>(edge_id.size()));
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  const auto comp = connected_components(n, bonds);
  const int ncomp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  const int nu = static_cast<int>(bonds.size()) - n + ncomp;
  if (nu <= 0) return {};

  // Horton candidates: one BFS tree per root, cycle through each non-tree pair.
  std::vector<Candidate> candidates;
  std::vector<int> dist(n), parent(n);
  for (int root = 0; root < n; ++root) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(parent.begin(), parent.end(), -1);
    std::deque<int> q{root};
    dist[root] = 0;
    while (!q.empty()) {
      int v = q.front();
      q.pop_front();
      for (int u : adj[v])
        if (dist[u] < 0) {
          dist[u] = dist[v] + 1;
          parent[u] = v;
          q.push_back(u);
        }
    }
    auto path_to_root = [&](int v) {
      std::vector<int> p;
      for (; v != -1; v = parent[v]) p.push_back(v);
      return p;  // v .. root
    };
    for (const auto& [e, id] : edge_id) {
      const auto [x, y] = e;
      if (dist[x] < 0 || dist[y] < 0) continue;
      if (parent[x] == y || parent[y] == x) continue;  // tree edge
      const auto px = path_to_root(x);
      const auto py = path_to_root(y);
      // Paths must be vertex-disjoint except at the root.
      std::set<int> sx(px.begin(), px.end() - 1);
      bool disjoint = true;
      for (std::size_t i = 0; i + 1 < py.size(); ++i)
        if (sx.count(py[i])) {
          disjoint = false;
          break;
        }
      if (!disjoint) continue;
      Candidate c;
      c.walk.assign(px.rbegin(), px.rend());  // root .. x
      c.walk.insert(c.walk.end(), py.begin(), py.end() - 1);  // y .. (root excluded)
      if (c.walk.size() < 3) continue;
      c.sorted_vertices = c.walk;
      std::sort(c.sorted_vertices.begin(), c.sorted_vertices.end());
      for (std::size_t i = 0; i < c.walk.size(); ++i)
        c.sorted_edges.push_back(key(c.walk[i], c.walk[(i + 1) % c.walk.size()]));
      std::sort(c.sorted_edges.begin(), c.sorted_edges.end());
      candidates.push_back(std::move(c));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Greedy minimum cycle basis via GF(2) elimination over edge space.
  std::vector<std::vector<int>> basis_walks;
  std::map<int, EdgeVec> by_pivot;
  for (const auto& c : candidates) {
    if (static_cast<int>(basis_walks.size()) == nu) break;
    EdgeVec v(bonds.size());
    for (const auto& e : c.sorted_edges) v.set(edge_id.at(e));
    while (!v.empty()) {
      const int p = v.leading();
      auto it = by_pivot.find(p);
      if (it == by_pivot.end()) {
        by_pivot.emplace(p, std::move(v));
        basis_walks.push_back(c.walk);
        break;
      }
      v ^= it->second;
    }
  }
  return basis_walks;
}

void perceive_aromaticity(MolecularGraph& g) {
  g.aromatic_atoms.assign(g.n, false);
  g.aromatic_bonds.assign(g.bonds.size(), false);

  std::set<std::pair<int, int>> ring_bonds;
  for (const auto& walk : g.rings)
    for (std::size_t i = 0; i < walk.size(); ++i)
      ring_bonds.insert(key(walk[i], walk[(i + 1) % walk.size()]));

  for (const auto& walk : g.rings) {
    bool ok = true;
    int pi = 0;
    for (int v : walk) {
      const std::string& el = g.elements[v];
      if (el != "C" && el != "N" && el != "O" && el != "S") {
        ok = false;
        break;
      }
      int doubles = 0, triples = 0, aromatic_typed = 0, exocyclic_multi = 0;
      for (int u : g.neighbors[v]) {
        switch (g.order(v, u)) {
          case BondOrder::kDouble:
            ++doubles;
            if (!ring_bonds.count(key(v, u))) ++exocyclic_multi;
            break;
          case BondOrder::kTriple:
            ++triples;
            ++exocyclic_multi;  // sp carbon cannot sit in an aromatic ring
            break;
          case BondOrder::kAromatic:
            ++aromatic_typed;
            break;
          default:
            break;
        }
      }
      if (exocyclic_multi > 0 || triples > 0 || doubles >= 2) {
        ok = false;
        break;
      }
      if (el == "C") {
        if (doubles == 1 || aromatic_typed > 0) {
          pi += 1;
        } else {
          ok = false;  // saturated carbon breaks conjugation
          break;
        }
      } else {
        if (doubles == 1) {
          pi += 1;
        } else if (aromatic_typed > 0) {
          // pyrrole-type N (three connections) donates the lone pair
          pi += (el == "N" && g.degree[v] < 3) ? 1 : 2;
        } else if (g.formal_charge[v] <= 0) {
          pi += 2;  // heteroatom lone pair
        } else {
          ok = false;
          break;
        }
      }
    }
    if (!ok || pi % 4 != 2) continue;
    for (std::size_t i = 0; i < walk.size(); ++i) {
      g.aromatic_atoms[walk[i]] = true;
      const int bi = g.bond_index(walk[i], walk[(i + 1) % walk.size()]);
      if (bi >= 0) g.aromatic_bonds[bi] = true;
    }
  }
}

void perceive_hybridization(MolecularGraph& g) {
  g.hybridization.assign(g.n, Hybridization::kOther);
  for (int v = 0; v < g.n; ++v) {
    if (g.elements[v] == "H") continue;
    int doubles = 0, triples = 0, nonsingle = 0;
    for (int u : g.neighbors[v]) {
      const BondOrder o = g.order(v, u);
      if (o == BondOrder::kDouble) ++doubles;
      if (o == BondOrder::kTriple) ++triples;
      if (o != BondOrder::kSingle) ++nonsingle;
    }
    if (triples > 0 || doubles >= 2)
      g.hybridization[v] = Hybridization::kSp;
    else if (doubles == 1 || g.aromatic_atoms[v])
      g.hybridization[v] = Hybridization::kSp2;
    else if (nonsingle == 0)
      g.hybridization[v] = Hybridization::kSp3;
  }
}

int default_valence(const std::string& element) {
  static const std::map<std::string, int> table = {
      {"C", 4}, {"N", 3}, {"O", 2},  {"S", 2}, {"F", 1},  {"Cl", 1},
      {"Br", 1}, {"I", 1}, {"P", 3}, {"B", 3}, {"Si", 4},
  };
  auto it = table.find(element);
  return it == table.end() ? 0 : it->second;
}

int atomic_number(const std::string& element) {
  static const std::map<std::string, int> table = {
      {"H", 1},   {"Li", 3},  {"B", 5},   {"C", 6},   {"N", 7},   {"O", 8},
      {"F", 9},   {"Na", 11}, {"Mg", 12}, {"Al", 13}, {"Si", 14}, {"P", 15},
      {"S", 16},  {"Cl", 17}, {"K", 19},  {"Ca", 20}, {"Ti", 22}, {"V", 23},
      {"Cr", 24}, {"Mn", 25}, {"Fe", 26}, {"Co", 27}, {"Ni", 28}, {"Cu", 29},
      {"Zn", 30}, {"Ge", 32}, {"As", 33}, {"Se", 34}, {"Br", 35}, {"Zr", 40},
      {"Ag", 47}, {"Cd", 48}, {"In", 49}, {"Sn", 50}, {"Sb", 51}, {"I", 53},
      {"Yb", 70}, {"Pt", 78}, {"Au", 79}, {"Hg", 80}, {"Pb", 82}, {"Pd", 46},
  };
  auto it = table.find(element);
  return it == table.end() ? 0 : it->second;
}

MolecularGraph build_graph(const Molecule& m) {
  MolecularGraph g;
  g.n = static_cast<int>(m.atoms.size());
  g.adjacency = Eigen::MatrixXd::Zero(g.n, g.n);
  g.bonds = m.bonds;
  g.neighbors.assign(g.n, {});
  g.elements.reserve(g.n);
  g.formal_charge.reserve(g.n);
  for (const auto& a : m.atoms) {
    g.elements.push_back(a.element);
    g.formal_charge.push_back(a.formal_charge);
  }
  for (const auto& b : m.bonds) {
    g.adjacency(b.a, b.b) = 1.0;
    g.adjacency(b.b, b.a) = 1.0;
    g.bond_order.emplace(key(b.a, b.b), b.order);
    g.neighbors[b.a].push_back(b.b);
    g.neighbors[b.b].push_back(b.a);
  }
  for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());

  g.degree.assign(g.n, 0);
  g.h_count.assign(g.n, 0);
  g.implicit_valence.assign(g.n, 0);
  for (int v = 0; v < g.n; ++v) {
    g.degree[v] = static_cast<int>(g.neighbors[v].size());
    double order_sum = 0.0;
    for (int u : g.neighbors[v]) {
      if (g.elements[u] == "H") ++g.h_count[v];
      switch (g.order(v, u)) {
        case BondOrder::kSingle: order_sum += 1.0; break;
        case BondOrder::kDouble: order_sum += 2.0; break;
        case BondOrder::kTriple: order_sum += 3.0; break;
        case BondOrder::kAromatic: order_sum += 1.5; break;
      }
    }
    const int dv = default_valence(g.elements[v]);
    g.implicit_valence[v] =
        std::max(0, dv - static_cast<int>(std::llround(order_sum)));
  }

  g.rings = sssr(g.n, g.bonds);
  perceive_aromaticity(g);
  perceive_hybridization(g);
  return g;
}

}  // namespace tiergraph
