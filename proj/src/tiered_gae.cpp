#include "tiergraph/tiered_gae.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace tiergraph {
namespace {

Matrix offdiag_mask(Eigen::Index n) {
  Matrix m = Matrix::Ones(n, n);
  m.diagonal().setZero();
  return m;
}

Matrix glorot(std::mt19937& rng, int rows, int cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

// Forward pass without a tape, shared by embedding export and evaluation.
Matrix gcn_encode_plain(const Matrix& x, const Matrix& s, const std::vector<Param>& ws) {
  Matrix h = x;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    h = s * h * ws[i].value;
    if (i + 1 < ws.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

Value gcn_encode(Tape& tape, Value h, Value s, std::vector<Param>& ws) {
  for (std::size_t i = 0; i < ws.size(); ++i) {
    Value w = tape.leaf(ws[i]);
    h = tape.matmul(tape.matmul(s, h), w);
    if (i + 1 < ws.size()) h = tape.relu(h);
  }
  return h;
}

// Mean BCE(sigmoid(logits), target) over the masked entries, evaluated in the
// numerically exact log1p form.
double mean_bce_logits(const Matrix& logits, const Matrix& target, const Matrix& mask) {
  const double wsum = mask.sum();
  if (wsum == 0.0) return 0.0;
  const auto l = logits.array();
  return (mask.array() *
          (l.max(0.0) - l * target.array() + (1.0 + (-l.abs()).exp()).log()))
             .sum() /
         wsum;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Per-atom-index positional columns in [-0.5, 0.5), identical across runs
// and across molecules.
Matrix positional_block(int n) {
  Matrix r(n, kPositionalColumns);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < kPositionalColumns; ++j) {
      const std::uint64_t h =
          splitmix64(static_cast<std::uint64_t>(i) * kPositionalColumns + j + 1);
      r(i, j) = 8.0 * (static_cast<double>(h >> 11) / 9007199254740992.0) - 4.0;
    }
  return r;
}

}  // namespace

MoleculeTensors make_tensors(const Molecule& m, const FeatureScheme& scheme) {
  const MolecularGraph g = build_graph(m);
  const FeatureMatrix fm = featurize_molecule(g, scheme);
  const GroupSet gs = build_group_set(g);
  const TieredMembership tm = build_membership(gs, g.n, GroupWeightConfig{});
  MoleculeTensors t;
  t.cid = m.cid_or(m.title);
  t.x.resize(g.n, fm.X.cols() + kPositionalColumns);
  t.x << fm.X, positional_block(g.n);
  t.a1 = g.adjacency;
  t.m1 = tm.m1;
  for (const auto& grp : gs.groups) t.kinds.push_back(grp.kind);
  t.e = fm.E;
  t.bonds = g.bonds;
  return t;
}

Matrix normalized_adjacency(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeMismatch("adjacency must be square");
  const Eigen::Index n = a.rows();
  Matrix ahat = a + Matrix::Identity(n, n);
  Eigen::VectorXd d = ahat.rowwise().sum();
  Eigen::VectorXd dinv = d.array().rsqrt();
  return dinv.asDiagonal() * ahat * dinv.asDiagonal();
}

CoarseGraph coarsen_adjacency(const Matrix& a1, const Matrix& m1) {
  return coarsen_adjacency(a1, m1, {}, Matrix());
}

CoarseGraph coarsen_adjacency(const Matrix& a1, const Matrix& m1,
                              const std::vector<Bond>& bonds, const Matrix& e) {
  if (a1.rows() != m1.rows()) throw ShapeMismatch("coarsen_adjacency");
  const int ng = static_cast<int>(m1.cols());
  CoarseGraph cg;
  cg.groups = ng;
  cg.bond_dim = static_cast<int>(e.cols());

  const Matrix lifted = m1.transpose() * a1 * m1;   // bond-crossing counts
  const Matrix overlap = m1.transpose() * m1;       // shared-atom counts
  cg.a2 = Matrix::Zero(ng, ng);
  for (int i = 0; i < ng; ++i)
    for (int j = 0; j < ng; ++j)
      if (i != j && (lifted(i, j) > 0.0 || overlap(i, j) > 0.0)) cg.a2(i, j) = 1.0;

  cg.e2 = Matrix::Zero(ng * ng, std::max(1, cg.bond_dim));
  if (cg.bond_dim > 0 && !bonds.empty()) {
    Matrix counts = Matrix::Zero(ng, ng);
    for (std::size_t k = 0; k < bonds.size(); ++k) {
      const int a = bonds[k].a, b = bonds[k].b;
      for (int i = 0; i < ng; ++i)
        for (int j = 0; j < ng; ++j) {
          if (i == j) continue;
          if ((m1(a, i) > 0.0 && m1(b, j) > 0.0) || (m1(b, i) > 0.0 && m1(a, j) > 0.0)) {
            cg.e2.row(i * ng + j) += e.row(static_cast<Eigen::Index>(k));
            counts(i, j) += 1.0;
          }
        }
    }
    for (int i = 0; i < ng; ++i)
      for (int j = 0; j < ng; ++j)
        if (counts(i, j) > 0.0) cg.e2.row(i * ng + j) /= counts(i, j);
  }
  return cg;
}

Matrix inner_product_decode(const Matrix& z) {
  return (1.0 / (1.0 + (-(z * z.transpose()).array()).exp())).matrix();
}

std::vector<Param*> GaeParams::all() {
  std::vector<Param*> out;
  for (auto& p : tier1) out.push_back(&p);
  for (auto& p : tier2) out.push_back(&p);
  return out;
}

GaeParams init_gae_params(int input_dim, const TierConfig& config,
                          const std::string& scheme_id) {
  std::mt19937 rng(config.seed);
  GaeParams p;
  p.input_dim = input_dim;
  p.hidden_dim = config.hidden_dim;
  p.embed_dim = config.embed_dim;
  p.scheme_id = scheme_id;
  auto make_tier = [&](const std::string& prefix, int in_dim) {
    std::vector<Param> ws;
    int d = in_dim;
    for (int l = 0; l < config.gcn_layers; ++l) {
      const int out = l + 1 == config.gcn_layers ? config.embed_dim : config.hidden_dim;
      ws.emplace_back(prefix + ".gcn" + std::to_string(l), glorot(rng, d, out));
      d = out;
    }
    return ws;
  };
  p.tier1 = make_tier("tier1", input_dim);
  p.tier2 = make_tier("tier2", config.embed_dim);
  return p;
}

Value gcn_layer(Tape& tape, Value h, Value s_norm, Param& w, bool linear) {
  Value out = tape.matmul(tape.matmul(s_norm, h), tape.leaf(w));
  return linear ? out : tape.relu(out);
}

namespace {

Value molecule_loss(Tape& tape, GaeParams& params, const MoleculeTensors& mol) {
  const Matrix s1 = normalized_adjacency(mol.a1);
  Value z1 = gcn_encode(tape, tape.constant(mol.x), tape.constant(s1), params.tier1);
  Value logits1 = tape.matmul(z1, tape.transpose(z1));
  Value l1 = tape.bce_with_logits(logits1, tape.constant(mol.a1), offdiag_mask(mol.a1.rows()));

  Value x2 = tape.matmul(tape.transpose(tape.constant(mol.m1)), z1);
  const CoarseGraph cg = coarsen_adjacency(mol.a1, mol.m1);
  const Matrix s2 = normalized_adjacency(cg.a2);
  Value z2 = gcn_encode(tape, x2, tape.constant(s2), params.tier2);
  Value logits2 = tape.matmul(z2, tape.transpose(z2));
  Value l2 = tape.bce_with_logits(logits2, tape.constant(cg.a2), offdiag_mask(cg.a2.rows()));
  return tape.add(l1, l2);
}

}  // namespace

GaeTrainResult train_tiered_gae(GaeParams& params,
                                const std::vector<MoleculeTensors>& dataset,
                                const TierConfig& config) {
  if (dataset.empty()) throw EmptyDataset("no molecules to train on");
  for (const auto& mol : dataset)
    if (mol.x.cols() != params.input_dim)
      throw SchemeMismatch("feature dim " + std::to_string(mol.x.cols()) +
                           " does not match params input dim " +
                           std::to_string(params.input_dim));

  GaeTrainResult result;
  AdamOptimizer opt(config.learning_rate);
  const auto all = params.all();
  const std::size_t bs = std::max(1, config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < dataset.size(); start += bs) {
      const std::size_t end = std::min(dataset.size(), start + bs);
      for (Param* p : all) p->zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        Tape tape;
        Value loss = molecule_loss(tape, params, dataset[i]);
        Value scaled = tape.scale(loss, 1.0 / static_cast<double>(end - start));
        epoch_loss += loss.scalar();
        tape.backward(scaled);
      }
      opt.step(all);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return result;
}

TieredEmbeddings embed_molecule(const GaeParams& params, const MoleculeTensors& mol,
                                const GroupWeightConfig& weights) {
  if (mol.x.cols() != params.input_dim)
    throw SchemeMismatch("feature dim " + std::to_string(mol.x.cols()) +
                         " does not match params input dim " +
                         std::to_string(params.input_dim));
  weights.validate();
  TieredEmbeddings emb;
  emb.cid = mol.cid;
  const Matrix s1 = normalized_adjacency(mol.a1);
  emb.z1 = gcn_encode_plain(mol.x, s1, params.tier1);
  emb.x2 = diff_group_pool(emb.z1, mol.m1);
  const CoarseGraph cg = coarsen_adjacency(mol.a1, mol.m1);
  const Matrix s2 = normalized_adjacency(cg.a2);
  emb.z2 = gcn_encode_plain(emb.x2, s2, params.tier2);
  Eigen::VectorXd m2(emb.z2.rows());
  for (Eigen::Index i = 0; i < m2.size(); ++i)
    m2[i] = weights.mode == GroupWeightConfig::Mode::kPerGroup
                ? (*weights.per_group)[i]
                : weights.kind_weight(mol.kinds[i]);
  emb.x3 = diff_group_pool(emb.z2, Matrix(m2));
  return emb;
}

std::vector<TieredEmbeddings> embed_dataset(const GaeParams& params,
                                            const std::vector<MoleculeTensors>& dataset,
                                            const GroupWeightConfig& weights) {
  std::vector<TieredEmbeddings> out;
  out.reserve(dataset.size());
  for (const auto& mol : dataset) out.push_back(embed_molecule(params, mol, weights));
  return out;
}

GaeEval evaluate_gae(const GaeParams& params, const std::vector<MoleculeTensors>& dataset) {
  if (dataset.empty()) throw EmptyDataset("no molecules to evaluate");
  GaeEval ev;
  for (const auto& mol : dataset) {
    const Matrix s1 = normalized_adjacency(mol.a1);
    const Matrix z1 = gcn_encode_plain(mol.x, s1, params.tier1);
    ev.tier1_bce += mean_bce_logits(z1 * z1.transpose(), mol.a1, offdiag_mask(mol.a1.rows()));
    const Matrix x2 = diff_group_pool(z1, mol.m1);
    const CoarseGraph cg = coarsen_adjacency(mol.a1, mol.m1);
    const Matrix z2 = gcn_encode_plain(x2, normalized_adjacency(cg.a2), params.tier2);
    ev.tier2_bce += mean_bce_logits(z2 * z2.transpose(), cg.a2, offdiag_mask(cg.a2.rows()));
  }
  ev.tier1_bce /= static_cast<double>(dataset.size());
  ev.tier2_bce /= static_cast<double>(dataset.size());
  return ev;
}

// ---- persistence -------------------------------------------------------

namespace {

void write_matrix_values(std::string& out, const Matrix& m) {
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      out += ' ';
      out += buf;
    }
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::map<std::string, std::string> header_kv(const std::vector<std::string>& toks,
                                             std::size_t from) {
  std::map<std::string, std::string> kv;
  for (std::size_t i = from; i < toks.size(); ++i) {
    const auto eq = toks[i].find('=');
    if (eq != std::string::npos) kv[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
  }
  return kv;
}

}  // namespace

void write_params(const std::string& path, const GaeParams& params) {
  std::ofstream out(path);
  if (!out.is_open()) throw IoError("cannot write '" + path + "'");
  out << "#tiergraph-params v1 scheme=" << params.scheme_id
      << " input_dim=" << params.input_dim << " hidden_dim=" << params.hidden_dim
      << " embed_dim=" << params.embed_dim << "\n";
  auto dump = [&](const Param& p) {
    std::string line = p.name + "\t" + std::to_string(p.value.rows()) + "\t" +
                       std::to_string(p.value.cols()) + "\t";
    std::string vals;
    write_matrix_values(vals, p.value);
    out << line << (vals.empty() ? vals : vals.substr(1)) << "\n";
  };
  for (const auto& p : params.tier1) dump(p);
  for (const auto& p : params.tier2) dump(p);
}

GaeParams read_params(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw IoError("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw StoreFormatError("empty params file");
  auto toks = split_ws(header);
  if (toks.size() < 2 || toks[0] != "#tiergraph-params" || toks[1] != "v1")
    throw StoreFormatError("bad params header: '" + header + "'");
  const auto kv = header_kv(toks, 2);
  GaeParams params;
  params.scheme_id = kv.count("scheme") ? kv.at("scheme") : "qm9";
  params.input_dim = kv.count("input_dim") ? std::stoi(kv.at("input_dim")) : 0;
  params.hidden_dim = kv.count("hidden_dim") ? std::stoi(kv.at("hidden_dim")) : 0;
  params.embed_dim = kv.count("embed_dim") ? std::stoi(kv.at("embed_dim")) : 0;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string name;
    long rows = 0, cols = 0;
    is >> name >> rows >> cols;
    if (!is || rows <= 0 || cols <= 0)
      throw StoreFormatError("bad params line: '" + line + "'");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        if (!(is >> m(r, c))) throw StoreFormatError("short params line: '" + name + "'");
    Param p(name, std::move(m));
    if (name.rfind("tier1.", 0) == 0)
      params.tier1.push_back(std::move(p));
    else if (name.rfind("tier2.", 0) == 0)
      params.tier2.push_back(std::move(p));
    else
      throw StoreFormatError("unknown layer '" + name + "'");
  }
  return params;
}

void write_embeddings(const std::string& path, const std::string& scheme_id,
                      const std::array<double, 3>& weights,
                      const std::vector<TieredEmbeddings>& entries) {
  std::ofstream out(path);
  if (!out.is_open()) throw IoError("cannot write '" + path + "'");
  const int dim = entries.empty() ? 0 : static_cast<int>(entries.front().z1.cols());
  out << "#tiergraph-embeddings v1 scheme=" << scheme_id << " dim=" << dim
      << " weights=" << format_double(weights[0]) << "," << format_double(weights[1])
      << "," << format_double(weights[2]) << "\n";
  char buf[64];
  auto dump = [&](const std::string& cid, int tier, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      out << cid << '\t' << tier << '\t' << r << '\t';
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
        if (c) out << ' ';
        out << buf;
      }
      out << '\n';
    }
  };
  for (const auto& e : entries) {
    dump(e.cid, 1, e.z1);
    dump(e.cid, 2, e.z2);
    dump(e.cid, 3, e.x3);
  }
}

EmbeddingStore read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw IoError("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in, header)) throw StoreFormatError("empty embedding file");
  auto toks = split_ws(header);
  if (toks.size() < 2 || toks[0] != "#tiergraph-embeddings" || toks[1] != "v1")
    throw StoreFormatError("bad embeddings header: '" + header + "'");
  const auto kv = header_kv(toks, 2);
  EmbeddingStore store;
  if (kv.count("scheme")) store.scheme_id = kv.at("scheme");
  if (kv.count("dim")) store.dim = std::stoi(kv.at("dim"));
  if (kv.count("weights")) {
    const std::string& w = kv.at("weights");
    std::istringstream is(w);
    char comma;
    if (!(is >> store.weights[0] >> comma >> store.weights[1] >> comma >> store.weights[2]))
      throw StoreFormatError("bad weights field: '" + w + "'");
  }

  struct Rows {
    std::vector<std::vector<double>> by_tier[3];
  };
  std::map<std::string, Rows> acc;
  std::vector<std::string> order;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string cid;
    int tier = 0;
    long row = 0;
    if (!(std::getline(is, cid, '\t') && is >> tier >> row) || tier < 1 || tier > 3)
      throw StoreFormatError("bad embedding line: '" + line + "'");
    std::vector<double> vals;
    double v;
    while (is >> v) vals.push_back(v);
    if (static_cast<int>(vals.size()) != store.dim)
      throw StoreFormatError("embedding row width mismatch for cid " + cid);
    if (!acc.count(cid)) order.push_back(cid);
    auto& rows = acc[cid].by_tier[tier - 1];
    if (static_cast<long>(rows.size()) != row)
      throw StoreFormatError("out-of-order embedding rows for cid " + cid);
    rows.push_back(std::move(vals));
  }
  for (const auto& cid : order) {
    const Rows& r = acc[cid];
    TieredEmbeddings e;
    e.cid = cid;
    auto to_matrix = [&](const std::vector<std::vector<double>>& rows) {
      Matrix m(rows.size(), store.dim);
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < store.dim; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][j];
      return m;
    };
    e.z1 = to_matrix(r.by_tier[0]);
    e.z2 = to_matrix(r.by_tier[1]);
    e.x3 = to_matrix(r.by_tier[2]);
    store.entries.push_back(std::move(e));
  }
  return store;
}

}  // namespace tiergraph
