#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tiergraph/autodiff.hpp"
#include "tiergraph/grouping.hpp"
#include "tiergraph/targets.hpp"
#include "tiergraph/tiered_gae.hpp"

namespace tiergraph {

struct KeyMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConstantTarget : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class WeightMode { kFixed, kTrainableByKind };

struct PredictorConfig {
  int input_dim = 16;
  int hidden1 = 64;  // exactly two hidden layers
  int hidden2 = 64;
  std::vector<int> targets;  // indices into the 12-target list; empty = all
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  unsigned seed = 0;
  double val_fraction = 0.1;
  WeightMode weight_mode = WeightMode::kFixed;
  std::array<double, 3> initial_weights{1.0, 0.5, 0.1};  // fg, rg, ccg

  std::vector<int> selected_targets() const;
};

// Per-target standardization fitted on the training split.
struct TargetStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  Eigen::VectorXd standardize(const Eigen::VectorXd& y) const;
  Eigen::VectorXd destandardize(const Eigen::VectorXd& y_std) const;
};

struct PredictorParams {
  int input_dim = 0, hidden1 = 0, hidden2 = 0, output_dim = 0;
  std::vector<Param> mlp;           // w1 b1 w2 b2 w3 b3
  std::vector<Param> kind_weights;  // three 1x1 params: fg, rg, ccg
  TargetStats stats;
  std::vector<int> targets;

  std::vector<Param*> mlp_params();
  std::vector<Param*> kind_params();
  std::array<double, 3> kind_values() const;
};

PredictorParams init_predictor(const PredictorConfig& config, int output_dim);

// One stored molecule for prediction: X3 for FIXED mode, Z2 + kinds for
// TRAINABLE_BY_KIND pooling inside the tape.
struct PredictExample {
  std::string key;
  Matrix x3;  // 1 x d
  Matrix z2;  // groups x d (may be empty in FIXED mode)
  std::vector<GroupKind> kinds;
};

std::vector<PredictExample> examples_from_store(const EmbeddingStore& store);

// De-standardized multi-target prediction for one graph embedding.
Eigen::VectorXd predict_graph(const Eigen::VectorXd& x3, const PredictorParams& params);

struct TrainMetrics {
  std::vector<double> loss_trace;
  Eigen::VectorXd train_mae;  // native units, per selected target
  Eigen::VectorXd val_mae;    // empty when no validation split
  std::vector<std::string> train_keys;
  std::vector<std::string> val_keys;
  std::array<double, 3> final_weights{1.0, 0.5, 0.1};
};

TrainMetrics train_predictor(PredictorParams& params,
                             const std::vector<PredictExample>& dataset,
                             const TargetTable& targets, const PredictorConfig& config);

Eigen::VectorXd evaluate(const PredictorParams& params,
                         const std::vector<PredictExample>& dataset,
                         const TargetTable& targets);

}  // namespace tiergraph
