#pragma once

#include <string>
#include <vector>

#include "tiergraph/autodiff.hpp"
#include "tiergraph/featurize.hpp"
#include "tiergraph/grouping.hpp"

namespace tiergraph {

struct SchemeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StoreFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TierConfig {
  int hidden_dim = 32;
  int embed_dim = 16;
  int gcn_layers = 2;
  double learning_rate = 1e-2;
  int epochs = 200;
  int batch_size = 32;
  unsigned seed = 0;
};

// Extra encoder-input columns holding a fixed pseudo-random value per atom
// index. Atoms related by a graph automorphism carry identical chemical
// features, and a purely equivariant encoder then cannot give them distinct
// embeddings, which caps adjacency reconstruction (benzene saturates at
// BCE = ln 2). The positional block breaks those ties deterministically.
inline constexpr int kPositionalColumns = 8;

inline int gae_input_dim(const FeatureScheme& scheme) {
  return scheme.atom_dim + kPositionalColumns;
}

// Everything the autoencoder needs for one molecule.
struct MoleculeTensors {
  std::string cid;
  Matrix x;   // n x atom_dim node features
  Matrix a1;  // n x n adjacency
  Matrix m1;  // n x groups membership
  std::vector<GroupKind> kinds;
  Matrix e;   // bonds x bond_dim edge features
  std::vector<Bond> bonds;
};

MoleculeTensors make_tensors(const Molecule& m, const FeatureScheme& scheme);

struct CoarseGraph {
  Matrix a2;  // groups x groups, 0/1, zero diagonal
  Matrix e2;  // (groups*groups) x bond_dim coarsened edge features
  int groups = 0;
  int bond_dim = 0;

  Eigen::Block<const Matrix, 1> e2_at(int i, int j) const {
    return e2.block<1, Eigen::Dynamic>(i * groups + j, 0, 1, bond_dim);
  }
};

// Symmetric renormalized propagation matrix D^-1/2 (A+I) D^-1/2.
Matrix normalized_adjacency(const Matrix& a);

// Pooled coarse graph: groups are adjacent when a bond crosses them or they
// share an atom; coarse edge features average the crossing bond features.
CoarseGraph coarsen_adjacency(const Matrix& a1, const Matrix& m1);
CoarseGraph coarsen_adjacency(const Matrix& a1, const Matrix& m1,
                              const std::vector<Bond>& bonds, const Matrix& e);

// DiffGroupPool: X(k+1) = M(k)^T Z(k).
template <typename DerivedZ, typename DerivedM>
Matrix diff_group_pool(const Eigen::MatrixBase<DerivedZ>& z,
                       const Eigen::MatrixBase<DerivedM>& m) {
  if (z.rows() != m.rows()) throw ShapeMismatch("diff_group_pool");
  return m.transpose() * z;
}

Matrix inner_product_decode(const Matrix& z);  // sigmoid(Z Z^T)

struct GaeParams {
  int input_dim = 0;
  int hidden_dim = 0;
  int embed_dim = 0;
  std::string scheme_id;
  std::vector<Param> tier1;
  std::vector<Param> tier2;

  std::vector<Param*> all();
};

GaeParams init_gae_params(int input_dim, const TierConfig& config,
                          const std::string& scheme_id);

// One GCN propagation step on the tape: act(S H W); the last layer is linear.
Value gcn_layer(Tape& tape, Value h, Value s_norm, Param& w, bool linear);

struct GaeTrainResult {
  std::vector<double> loss_trace;  // mean total loss per epoch
};

// Minimizes masked-off-diagonal BCE of tier-1 and tier-2 adjacency
// reconstruction, Adam updates with gradient accumulation per batch.
GaeTrainResult train_tiered_gae(GaeParams& params,
                                const std::vector<MoleculeTensors>& dataset,
                                const TierConfig& config);

struct TieredEmbeddings {
  std::string cid;
  Matrix z1;  // atoms x d
  Matrix x2;  // groups x d, equals M1^T Z1
  Matrix z2;  // groups x d
  Matrix x3;  // 1 x d, equals M2^T Z2
};

TieredEmbeddings embed_molecule(const GaeParams& params, const MoleculeTensors& mol,
                                const GroupWeightConfig& weights);
std::vector<TieredEmbeddings> embed_dataset(const GaeParams& params,
                                            const std::vector<MoleculeTensors>& dataset,
                                            const GroupWeightConfig& weights);

struct GaeEval {
  double tier1_bce = 0.0;
  double tier2_bce = 0.0;
};
GaeEval evaluate_gae(const GaeParams& params, const std::vector<MoleculeTensors>& dataset);

// ---- persistence -------------------------------------------------------

void write_params(const std::string& path, const GaeParams& params);
GaeParams read_params(const std::string& path);

struct EmbeddingStore {
  std::string scheme_id;
  int dim = 0;
  std::array<double, 3> weights{1.0, 0.5, 0.1};  // fg, rg, ccg
  std::vector<TieredEmbeddings> entries;          // x2 is not persisted
};

void write_embeddings(const std::string& path, const std::string& scheme_id,
                      const std::array<double, 3>& weights,
                      const std::vector<TieredEmbeddings>& entries);
EmbeddingStore read_embeddings(const std::string& path);

// Shortest round-trip decimal text for a double ("0.5", not "0.50000...").
std::string format_double(double v);

}  // namespace tiergraph
