// Acceptance suite: one line per criterion, nonzero exit when any fails.
//
//   1. group-table exactness on the sample-molecule fixtures via the CLI
//   2. QM9 corpus statistics (skipped when the dataset is absent)
//   3. pooling oracle against naive summation
//   4. finite-difference gradient checks (GAE, MLP, kind weights)
//   5. GAE overfit sanity on benzene
//   6. predictor learnability on a synthetic group-count target
//   7. weight-scaling law and compensated-prediction invariance
//   8. SSSR oracle on random connected graphs
//   9. grid-search argmin and cache-hit correctness

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "fixture_table.hpp"
#include "tiergraph/featurize.hpp"
#include "tiergraph/grouping.hpp"
#include "tiergraph/predict.hpp"
#include "tiergraph/sdf.hpp"
#include "tiergraph/tiered_gae.hpp"
#include "tiergraph/weight_search.hpp"

using json = nlohmann::json;
using namespace tiergraph;
namespace ts = tiergraph::testsupport;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Status { kPass, kFail, kSkip } status = kFail;
  std::string detail;
};

Outcome pass(std::string d) { return {Outcome::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::kFail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::kSkip, std::move(d)}; }

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<MoleculeTensors> fixture_tensors() {
  std::vector<MoleculeTensors> out;
  for (const auto& item : read_sdf_file(ts::fixtures_sdf()))
    out.push_back(make_tensors(*item.molecule, bindingdb_scheme()));
  return out;
}

// ---- criterion 1 ---------------------------------------------------------

Outcome group_table_exactness() {
  const fs::path out = fs::temp_directory_path() / "tg_acceptance_groups.jsonl";
  const std::string cmd = std::string(TIERGRAPH_CLI_PATH) + " groups " +
                          ts::fixtures_sdf() + " > " + out.string() + " 2>/dev/null";
  const double t0 = now_seconds();
  if (std::system(cmd.c_str()) != 0) return fail("cmd_groups exited nonzero");
  const double elapsed = now_seconds() - t0;

  std::ifstream in(out);
  std::map<std::string, json> by_cid;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) {
      json j = json::parse(line);
      by_cid[j["cid"].get<std::string>()] = j;
    }

  int matched = 0;
  for (const auto& row : ts::fixture_table()) {
    auto it = by_cid.find(row.cid);
    if (it == by_cid.end()) return fail("missing output for cid " + row.cid);
    auto sets = [](const json& arr) {
      std::vector<std::vector<int>> v;
      for (const auto& g : arr) v.push_back(g.get<std::vector<int>>());
      for (auto& s : v) std::sort(s.begin(), s.end());
      std::sort(v.begin(), v.end());
      return v;
    };
    const bool ok = sets(it->second["fgs"]) == row.fgs &&
                    sets(it->second["rgs"]) == row.rgs &&
                    it->second["ccg"].get<std::vector<int>>() == row.ccg;
    if (!ok) return fail("group mismatch on " + row.name + " (" + row.cid + ")");
    ++matched;
  }
  if (elapsed >= 1.0) return fail("runtime " + std::to_string(elapsed) + " s >= 1 s");
  std::ostringstream os;
  os << matched << "/" << ts::fixture_table().size() << " molecules exact, "
     << elapsed << " s";
  return pass(os.str());
}

// ---- criterion 2 ---------------------------------------------------------

Outcome qm9_statistics() {
  std::string path = ts::data_dir() + "/gdb9.sdf";
  if (const char* env = std::getenv("TIERGRAPH_QM9_SDF")) path = env;
  if (!fs::exists(path))
    return skip("QM9 SDF not present (set TIERGRAPH_QM9_SDF); criteria 1,3-9 still gate");

  const double t0 = now_seconds();
  SdfReader reader(path);
  std::vector<std::size_t> counts;
  while (auto item = reader.next()) {
    if (!item->ok()) continue;
    counts.push_back(build_group_set(build_graph(*item->molecule)).size());
  }
  const GroupStats st = group_stats(counts);
  const double elapsed = now_seconds() - t0;
  std::ostringstream os;
  os << counts.size() << " molecules, mean " << st.mean << ", min " << st.min << ", max "
     << st.max << ", " << elapsed << " s";
  if (st.mean < 4.74 || st.mean > 4.84 || st.min != 1 || st.max != 11 || elapsed >= 300.0)
    return fail(os.str());
  return pass(os.str());
}

// ---- criterion 3 ---------------------------------------------------------

Outcome pooling_oracle() {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> nd(1, 20), gd(1, 6), dd(1, 8);
    const int n = nd(rng), g = gd(rng), d = dd(rng);
    Matrix z(n, d);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = dist(rng);
    Matrix m = Matrix::Zero(n, g);
    std::uniform_int_distribution<int> pick(0, g - 1);
    for (int v = 0; v < n; ++v) m(v, pick(rng)) = 1.0;  // cover every row
    std::uniform_int_distribution<int> extra(0, 3);
    for (int k = extra(rng); k > 0; --k) m(pick(rng) % n, pick(rng)) = 1.0;

    const Matrix pooled = diff_group_pool(z, m);
    Matrix naive = Matrix::Zero(g, d);
    for (int i = 0; i < g; ++i)
      for (int v = 0; v < n; ++v)
        if (m(v, i) != 0.0) naive.row(i) += z.row(v);
    if (((pooled - naive).cwiseAbs().maxCoeff()) > 1e-12)
      return fail("pooled/naive disagreement at trial " + std::to_string(trial));
  }

  // hand-computable three-group weighted case
  Matrix z2(3, 2);
  z2 << 1.0, 2.0, 10.0, 20.0, 100.0, 200.0;
  Matrix m2(3, 1);
  m2 << 1.0, 0.5, 0.1;
  const Matrix x3 = diff_group_pool(z2, m2);
  Matrix hand(1, 2);
  hand << 1.0 + 5.0 + 10.0, 2.0 + 10.0 + 20.0;
  if ((x3 - hand).cwiseAbs().maxCoeff() > 1e-12) return fail("weighted 3-group case");
  return pass("100 random (Z,M) pairs within 1e-12; weighted case exact");
}

// ---- criterion 4 ---------------------------------------------------------

Outcome gradient_checks() {
  std::vector<MoleculeTensors> small;  // all molecules <= 12 atoms
  for (const auto& item : read_sdf_file(ts::fixtures_sdf())) {
    if (item.molecule->atoms.size() <= 12) {
      const auto t = make_tensors(*item.molecule, qm9_scheme());
      small.push_back(t);
    }
    if (small.size() == 3) break;
  }
  double worst = 0.0;
  for (unsigned seed : {101u, 102u, 103u}) {
    // (a) GAE loss wrt all encoder params
    TierConfig config;
    config.hidden_dim = 6;
    config.embed_dim = 3;
    config.seed = seed;
    GaeParams params = init_gae_params(gae_input_dim(qm9_scheme()), config, "qm9");
    auto gae_loss = [&](Tape& t) {
      Value total = t.constant(Matrix::Zero(1, 1));
      for (const auto& mol : small) {
        Value s1 = t.constant(normalized_adjacency(mol.a1));
        Value h = t.relu(t.matmul(t.matmul(s1, t.constant(mol.x)), t.leaf(params.tier1[0])));
        Value z1 = t.matmul(t.matmul(s1, h), t.leaf(params.tier1[1]));
        Value logits1 = t.matmul(z1, t.transpose(z1));
        Matrix mask1 = Matrix::Ones(mol.a1.rows(), mol.a1.cols());
        mask1.diagonal().setZero();
        Value loss = t.bce_with_logits(logits1, t.constant(mol.a1), mask1);
        Value x2 = t.matmul(t.transpose(t.constant(mol.m1)), z1);
        const CoarseGraph cg = coarsen_adjacency(mol.a1, mol.m1);
        Value s2 = t.constant(normalized_adjacency(cg.a2));
        Value h2 = t.relu(t.matmul(t.matmul(s2, x2), t.leaf(params.tier2[0])));
        Value z2 = t.matmul(t.matmul(s2, h2), t.leaf(params.tier2[1]));
        Value logits2 = t.matmul(z2, t.transpose(z2));
        Matrix mask2 = Matrix::Ones(cg.a2.rows(), cg.a2.cols());
        mask2.diagonal().setZero();
        total = t.add(total, t.add(loss, t.bce_with_logits(logits2, t.constant(cg.a2), mask2)));
      }
      return total;
    };
    worst = std::max(worst, grad_check(gae_loss, params.all(), 1e-5));

    // (b) predictor loss wrt MLP params and (c) wrt kind weights
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    PredictorConfig pc;
    pc.input_dim = 4;
    pc.hidden1 = 6;
    pc.hidden2 = 6;
    pc.targets = {0};
    pc.seed = seed;
    PredictorParams pp = init_predictor(pc, 1);
    std::vector<Matrix> z2s;
    std::vector<std::vector<GroupKind>> kinds;
    for (int i = 0; i < 4; ++i) {
      Matrix z(3, 4);
      for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = dist(rng);
      z2s.push_back(z);
      kinds.push_back({GroupKind::kFg, GroupKind::kRg, GroupKind::kCcg});
    }
    auto pred_loss = [&](Tape& t) {
      Value total = t.constant(Matrix::Zero(1, 1));
      for (std::size_t i = 0; i < z2s.size(); ++i) {
        std::array<Matrix, 3> sums{Matrix::Zero(1, 4), Matrix::Zero(1, 4),
                                   Matrix::Zero(1, 4)};
        for (Eigen::Index g = 0; g < z2s[i].rows(); ++g)
          sums[static_cast<int>(kinds[i][g])] += z2s[i].row(g);
        Value x = t.scale_by(t.constant(sums[0]), t.leaf(pp.kind_weights[0]));
        x = t.add(x, t.scale_by(t.constant(sums[1]), t.leaf(pp.kind_weights[1])));
        x = t.add(x, t.scale_by(t.constant(sums[2]), t.leaf(pp.kind_weights[2])));
        Value h = t.relu(t.add(t.matmul(x, t.leaf(pp.mlp[0])), t.leaf(pp.mlp[1])));
        h = t.relu(t.add(t.matmul(h, t.leaf(pp.mlp[2])), t.leaf(pp.mlp[3])));
        Value pred = t.add(t.matmul(h, t.leaf(pp.mlp[4])), t.leaf(pp.mlp[5]));
        total = t.add(total, t.mse(pred, t.constant(Matrix::Constant(1, 1, 0.4 * i))));
      }
      return total;
    };
    worst = std::max(worst, grad_check(pred_loss, pp.mlp_params(), 1e-5));
    worst = std::max(worst, grad_check(pred_loss, pp.kind_params(), 1e-5));
  }
  std::ostringstream os;
  os << "max relative error " << worst << " over 3 seeds";
  return worst <= 1e-4 ? pass(os.str()) : fail(os.str());
}

// ---- criterion 5 ---------------------------------------------------------

Outcome gae_overfit() {
  Molecule benzene;
  for (const auto& item : read_sdf_file(ts::fixtures_sdf()))
    if (item.molecule->cid_or("?") == "11309472") benzene = *item.molecule;
  const std::vector<MoleculeTensors> dataset{make_tensors(benzene, qm9_scheme())};
  TierConfig config;  // defaults: hidden 32, embed 16, lr 1e-3
  config.epochs = 500;
  config.seed = 42;
  GaeParams params = init_gae_params(gae_input_dim(qm9_scheme()), config, "qm9");
  const double t0 = now_seconds();
  train_tiered_gae(params, dataset, config);
  const double elapsed = now_seconds() - t0;
  const GaeEval ev = evaluate_gae(params, dataset);
  std::ostringstream os;
  os << "tier-1 BCE " << ev.tier1_bce << " after 500 epochs, " << elapsed << " s";
  if (ev.tier1_bce >= 0.1) return fail(os.str());
  if (elapsed >= 10.0) return fail(os.str() + " (>= 10 s)");
  return pass(os.str());
}

// ---- criterion 6 ---------------------------------------------------------

Outcome predictor_learnability() {
  const auto base = fixture_tensors();
  TierConfig config;
  config.seed = 7;
  GaeParams gae = init_gae_params(gae_input_dim(bindingdb_scheme()), config, "bindingdb");

  // 32 fixture-derived molecules with the synthetic target 0.3 * group count
  std::vector<PredictExample> examples;
  TargetTable targets;
  const double t0 = now_seconds();
  const auto embs = embed_dataset(gae, base, GroupWeightConfig{});
  for (int i = 0; i < 32; ++i) {
    const auto& mol = base[i % base.size()];
    PredictExample ex;
    ex.key = "m" + std::to_string(i);
    ex.x3 = embs[i % base.size()].x3;
    examples.push_back(std::move(ex));
    std::array<double, kTargetCount> row{};
    row[0] = 0.3 * static_cast<double>(mol.kinds.size());
    targets.rows[examples.back().key] = row;
    targets.keys.push_back(examples.back().key);
  }
  double mean = 0.0, var = 0.0;
  for (const auto& ex : examples) mean += targets.row(ex.key)[0];
  mean /= 32.0;
  for (const auto& ex : examples) {
    const double d = targets.row(ex.key)[0] - mean;
    var += d * d;
  }
  const double std_dev = std::sqrt(var / 32.0);

  PredictorConfig pc;
  pc.input_dim = 16;
  pc.targets = {0};
  pc.epochs = 2000;
  pc.seed = 3;
  pc.learning_rate = 3e-3;
  pc.val_fraction = 0.0;  // overfit mode trains on all 32
  PredictorParams pp = init_predictor(pc, 1);
  const TrainMetrics m = train_predictor(pp, examples, targets, pc);
  const double elapsed = now_seconds() - t0;
  std::ostringstream os;
  os << "train MAE " << m.train_mae[0] << " vs 5% of std " << 0.05 * std_dev << ", "
     << elapsed << " s";
  if (m.train_mae[0] >= 0.05 * std_dev) return fail(os.str());
  if (elapsed >= 60.0) return fail(os.str() + " (>= 60 s)");
  return pass(os.str());
}

// ---- criterion 7 ---------------------------------------------------------

Outcome weight_scaling_law() {
  const auto dataset = fixture_tensors();
  TierConfig config;
  config.seed = 19;
  const GaeParams gae = init_gae_params(gae_input_dim(bindingdb_scheme()), config, "bindingdb");
  const auto base = embed_dataset(gae, dataset, GroupWeightConfig{});

  PredictorConfig pc;
  pc.input_dim = 16;
  pc.targets = {0};
  pc.seed = 5;
  PredictorParams pp = init_predictor(pc, 1);

  for (double c : {0.5, 2.0, 10.0}) {
    GroupWeightConfig wc;
    wc.w_fg = 1.0 * c;
    wc.w_rg = 0.5 * c;
    wc.w_ccg = 0.1 * c;
    const auto scaled = embed_dataset(gae, dataset, wc);
    PredictorParams comp = init_predictor(pc, 1);
    comp.mlp[0].value = pp.mlp[0].value / c;
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double rel = (scaled[i].x3 - c * base[i].x3).cwiseAbs().maxCoeff() /
                         std::max(1e-30, (c * base[i].x3).cwiseAbs().maxCoeff());
      if (rel > 1e-12)
        return fail("X3 scaling off by " + std::to_string(rel) + " at c=" +
                    std::to_string(c));
      const Eigen::VectorXd a = predict_graph(base[i].x3.transpose(), pp);
      const Eigen::VectorXd b = predict_graph(scaled[i].x3.transpose(), comp);
      if ((a - b).cwiseAbs().maxCoeff() > 1e-12)
        return fail("compensated prediction differs at c=" + std::to_string(c));
    }
  }
  return pass("X3 scales exactly for c in {0.5, 2, 10}; W1/c compensation holds");
}

// ---- criterion 8 ---------------------------------------------------------

int shortest_cycle_through(int n, const std::vector<Bond>& bonds, int skip_index) {
  std::vector<std::vector<int>> adj(n);
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    if (static_cast<int>(i) == skip_index) continue;
    adj[bonds[i].a].push_back(bonds[i].b);
    adj[bonds[i].b].push_back(bonds[i].a);
  }
  std::vector<int> dist(n, -1);
  std::deque<int> q{bonds[skip_index].a};
  dist[bonds[skip_index].a] = 0;
  while (!q.empty()) {
    const int v = q.front();
    q.pop_front();
    for (int u : adj[v])
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        q.push_back(u);
      }
  }
  const int d = dist[bonds[skip_index].b];
  return d < 0 ? 0 : d + 1;
}

Outcome sssr_oracle() {
  std::mt19937 rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> nd(3, 12);
    const int n = nd(rng);
    std::vector<Bond> bonds;
    std::set<std::pair<int, int>> seen;
    for (int v = 1; v < n; ++v) {
      std::uniform_int_distribution<int> pd(0, v - 1);
      const int p = pd(rng);
      bonds.push_back({p, v, BondOrder::kSingle});
      seen.insert({p, v});
    }
    std::uniform_int_distribution<int> extra_d(0, n);
    for (int k = extra_d(rng); k > 0; --k) {
      std::uniform_int_distribution<int> vd(0, n - 1);
      int a = vd(rng), b = vd(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (seen.insert({a, b}).second) bonds.push_back({a, b, BondOrder::kSingle});
    }
    const auto rings = sssr(n, bonds);
    const int expected = static_cast<int>(bonds.size()) - n + 1;
    if (static_cast<int>(rings.size()) != expected)
      return fail("cycle count " + std::to_string(rings.size()) + " != " +
                  std::to_string(expected) + " at trial " + std::to_string(trial));

    std::set<std::pair<int, int>> covered;
    for (const auto& walk : rings) {
      bool minimal = false, uncovered = false;
      std::vector<std::pair<int, int>> walk_edges;
      for (std::size_t i = 0; i < walk.size(); ++i) {
        const int a = walk[i], b = walk[(i + 1) % walk.size()];
        walk_edges.push_back({std::min(a, b), std::max(a, b)});
      }
      for (std::size_t bi = 0; bi < bonds.size(); ++bi) {
        const auto key = std::make_pair(std::min(bonds[bi].a, bonds[bi].b),
                                        std::max(bonds[bi].a, bonds[bi].b));
        if (std::find(walk_edges.begin(), walk_edges.end(), key) == walk_edges.end())
          continue;
        if (covered.count(key)) continue;
        uncovered = true;
        if (shortest_cycle_through(n, bonds, static_cast<int>(bi)) ==
            static_cast<int>(walk.size()))
          minimal = true;
      }
      if (!uncovered || !minimal)
        return fail("non-minimal basis cycle at trial " + std::to_string(trial));
      covered.insert(walk_edges.begin(), walk_edges.end());
    }
  }
  return pass("50 random connected graphs: count = bonds - atoms + 1, all cycles minimal");
}

// ---- criterion 9 ---------------------------------------------------------

Outcome search_correctness() {
  const auto dataset = fixture_tensors();
  TierConfig config;
  config.hidden_dim = 16;
  config.embed_dim = 8;
  config.seed = 23;
  const GaeParams gae = init_gae_params(gae_input_dim(bindingdb_scheme()), config, "bindingdb");
  const TargetTable targets = load_targets(ts::fixture_targets_csv(), TargetKeying::kByCid);

  PredictorConfig pc;
  pc.input_dim = 8;
  pc.hidden1 = 16;
  pc.hidden2 = 16;
  pc.epochs = 30;
  pc.seed = 13;

  const fs::path dir = fs::temp_directory_path() / "tg_acceptance_cache";
  fs::remove_all(dir);
  EmbeddingCache cache(dir.string());

  SearchSpec spec;
  spec.grid_axes = {std::vector<double>{0.5, 1.0}, std::vector<double>{0.25, 0.5},
                    std::vector<double>{0.1, 0.2}};
  spec.budget = 8;
  const SearchResult first = run_search(spec, dataset, gae, targets, pc, &cache);
  if (first.trials.size() != 8)
    return fail("expected 8 trials, got " + std::to_string(first.trials.size()));
  for (const auto& t : first.trials)
    if (!t.ok()) return fail("trial " + std::to_string(t.index) + ": " + t.error);
  double min_mae = first.trials[0].val_mae;
  for (const auto& t : first.trials) min_mae = std::min(min_mae, t.val_mae);
  if (first.best().val_mae != min_mae) return fail("argmin violated");

  const SearchResult second = run_search(spec, dataset, gae, targets, pc, &cache);
  for (std::size_t i = 0; i < second.trials.size(); ++i) {
    if (!second.trials[i].cache_hit)
      return fail("trial " + std::to_string(i) + " missed the cache on rerun");
    if (second.trials[i].val_mae != first.trials[i].val_mae)
      return fail("val MAE differs between cached and fresh runs");
  }
  // cached X3 equals freshly pooled X3 bit for bit
  GroupWeightConfig wc;
  wc.w_fg = 0.5;
  wc.w_rg = 0.25;
  wc.w_ccg = 0.1;
  const auto fresh = embed_dataset(gae, dataset, wc);
  const auto cached =
      cache.load(EmbeddingCache::key_for({0.5, 0.25, 0.1}, digest_params(gae)),
                 {0.5, 0.25, 0.1});
  for (std::size_t i = 0; i < fresh.size(); ++i)
    if (cached[i].x3 != fresh[i].x3) return fail("cached X3 differs from fresh X3");
  return pass("8/8 trials, argmin correct, cache hits bit-identical");
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "group-table exactness", group_table_exactness},
      {2, "QM9 corpus statistics", qm9_statistics},
      {3, "pooling oracle", pooling_oracle},
      {4, "gradient checks", gradient_checks},
      {5, "GAE overfit sanity", gae_overfit},
      {6, "predictor learnability", predictor_learnability},
      {7, "weight-scaling law", weight_scaling_law},
      {8, "SSSR oracle", sssr_oracle},
      {9, "search correctness", search_correctness},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const double t0 = now_seconds();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double elapsed = now_seconds() - t0;
    const char* tag = o.status == Outcome::kPass ? "PASS"
                      : o.status == Outcome::kSkip ? "SKIP"
                                                   : "FAIL";
    std::printf("[%s] criterion %d (%s): %s [%.2f s]\n", tag, c.number, c.name,
                o.detail.c_str(), elapsed);
    if (o.status == Outcome::kFail) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
