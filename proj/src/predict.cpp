#include "tiergraph/predict.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace tiergraph {
namespace {

// Kind-summed Z2 rows: pooled[k] = sum of group embeddings of kind k, so that
// X3 = w_fg*pooled[0] + w_rg*pooled[1] + w_ccg*pooled[2].
std::array<Matrix, 3> kind_sums(const PredictExample& ex, int dim) {
  std::array<Matrix, 3> sums{Matrix::Zero(1, dim), Matrix::Zero(1, dim),
                             Matrix::Zero(1, dim)};
  for (Eigen::Index i = 0; i < ex.z2.rows(); ++i)
    sums[static_cast<int>(ex.kinds[i])] += ex.z2.row(i);
  return sums;
}

Value mlp_forward(Tape& tape, Value x, std::vector<Param>& mlp) {
  Value h = tape.relu(tape.add(tape.matmul(x, tape.leaf(mlp[0])), tape.leaf(mlp[1])));
  h = tape.relu(tape.add(tape.matmul(h, tape.leaf(mlp[2])), tape.leaf(mlp[3])));
  return tape.add(tape.matmul(h, tape.leaf(mlp[4])), tape.leaf(mlp[5]));
}

Eigen::RowVectorXd mlp_forward_plain(const Eigen::RowVectorXd& x,
                                     const std::vector<Param>& mlp) {
  Eigen::RowVectorXd h = (x * mlp[0].value + mlp[1].value).cwiseMax(0.0);
  h = (h * mlp[2].value + mlp[3].value).cwiseMax(0.0);
  return h * mlp[4].value + mlp[5].value;
}

Matrix glorot(std::mt19937& rng, int rows, int cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

Eigen::VectorXd selected_row(const std::array<double, kTargetCount>& row,
                             const std::vector<int>& sel) {
  Eigen::VectorXd y(sel.size());
  for (std::size_t i = 0; i < sel.size(); ++i) y[static_cast<Eigen::Index>(i)] = row[sel[i]];
  return y;
}

}  // namespace

std::vector<int> PredictorConfig::selected_targets() const {
  if (!targets.empty()) return targets;
  std::vector<int> all(kTargetCount);
  std::iota(all.begin(), all.end(), 0);
  return all;
}

Eigen::VectorXd TargetStats::standardize(const Eigen::VectorXd& y) const {
  return (y - mean).cwiseQuotient(stddev);
}

Eigen::VectorXd TargetStats::destandardize(const Eigen::VectorXd& y_std) const {
  return y_std.cwiseProduct(stddev) + mean;
}

std::vector<Param*> PredictorParams::mlp_params() {
  std::vector<Param*> out;
  for (auto& p : mlp) out.push_back(&p);
  return out;
}

std::vector<Param*> PredictorParams::kind_params() {
  std::vector<Param*> out;
  for (auto& p : kind_weights) out.push_back(&p);
  return out;
}

std::array<double, 3> PredictorParams::kind_values() const {
  return {kind_weights[0].value(0, 0), kind_weights[1].value(0, 0),
          kind_weights[2].value(0, 0)};
}

PredictorParams init_predictor(const PredictorConfig& config, int output_dim) {
  std::mt19937 rng(config.seed);
  PredictorParams p;
  p.input_dim = config.input_dim;
  p.hidden1 = config.hidden1;
  p.hidden2 = config.hidden2;
  p.output_dim = output_dim;
  p.targets = config.selected_targets();
  p.mlp.emplace_back("mlp.w1", glorot(rng, config.input_dim, config.hidden1));
  p.mlp.emplace_back("mlp.b1", Matrix::Zero(1, config.hidden1));
  p.mlp.emplace_back("mlp.w2", glorot(rng, config.hidden1, config.hidden2));
  p.mlp.emplace_back("mlp.b2", Matrix::Zero(1, config.hidden2));
  p.mlp.emplace_back("mlp.w3", glorot(rng, config.hidden2, output_dim));
  p.mlp.emplace_back("mlp.b3", Matrix::Zero(1, output_dim));
  p.kind_weights.emplace_back("weight.fg",
                              Matrix::Constant(1, 1, config.initial_weights[0]));
  p.kind_weights.emplace_back("weight.rg",
                              Matrix::Constant(1, 1, config.initial_weights[1]));
  p.kind_weights.emplace_back("weight.ccg",
                              Matrix::Constant(1, 1, config.initial_weights[2]));
  p.stats.mean = Eigen::VectorXd::Zero(output_dim);
  p.stats.stddev = Eigen::VectorXd::Ones(output_dim);
  return p;
}

std::vector<PredictExample> examples_from_store(const EmbeddingStore& store) {
  std::vector<PredictExample> out;
  out.reserve(store.entries.size());
  for (const auto& e : store.entries) {
    PredictExample ex;
    ex.key = e.cid;
    ex.x3 = e.x3;
    ex.z2 = e.z2;
    out.push_back(std::move(ex));
  }
  return out;
}

Eigen::VectorXd predict_graph(const Eigen::VectorXd& x3, const PredictorParams& params) {
  if (x3.size() != params.input_dim)
    throw ShapeMismatch("embedding dim " + std::to_string(x3.size()) +
                        " does not match predictor input " +
                        std::to_string(params.input_dim));
  const Eigen::RowVectorXd y = mlp_forward_plain(x3.transpose(), params.mlp);
  return params.stats.destandardize(y.transpose());
}

TrainMetrics train_predictor(PredictorParams& params,
                             const std::vector<PredictExample>& dataset,
                             const TargetTable& targets, const PredictorConfig& config) {
  if (dataset.empty()) throw EmptyDataset("no examples to train on");
  const std::vector<int> sel = params.targets;
  const bool trainable = config.weight_mode == WeightMode::kTrainableByKind;

  // gather targets, fail fast on missing keys
  std::vector<Eigen::VectorXd> y_native;
  y_native.reserve(dataset.size());
  for (const auto& ex : dataset) {
    if (!targets.has(ex.key)) throw KeyMismatch("no target row for key '" + ex.key + "'");
    y_native.push_back(selected_row(targets.row(ex.key), sel));
  }

  // seeded shuffle split
  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937 rng(config.seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t val_n = dataset.size() > 1
                          ? std::max<std::size_t>(
                                1, static_cast<std::size_t>(
                                       std::llround(config.val_fraction *
                                                    static_cast<double>(dataset.size()))))
                          : 0;
  if (config.val_fraction <= 0.0) val_n = 0;
  std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + val_n);
  std::vector<std::size_t> train_idx(idx.begin() + val_n, idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  // standardization from the training split
  const Eigen::Index nt = static_cast<Eigen::Index>(sel.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(nt);
  for (auto i : train_idx) mean += y_native[i];
  mean /= static_cast<double>(train_idx.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(nt);
  for (auto i : train_idx) var += (y_native[i] - mean).cwiseAbs2();
  var /= static_cast<double>(train_idx.size());
  for (Eigen::Index t = 0; t < nt; ++t)
    if (var[t] <= 0.0)
      throw ConstantTarget("target '" + std::string(kTargetColumns[sel[t]]) +
                           "' is constant on the training split");
  params.stats.mean = mean;
  params.stats.stddev = var.cwiseSqrt();

  std::vector<Param*> learned = params.mlp_params();
  if (trainable)
    for (Param* p : params.kind_params()) learned.push_back(p);

  const int dim = params.input_dim;
  auto example_loss = [&](Tape& tape, std::size_t i) {
    Value x;
    if (trainable) {
      const auto sums = kind_sums(dataset[i], dim);
      Value acc = tape.scale_by(tape.constant(sums[0]), tape.leaf(params.kind_weights[0]));
      acc = tape.add(acc, tape.scale_by(tape.constant(sums[1]),
                                        tape.leaf(params.kind_weights[1])));
      acc = tape.add(acc, tape.scale_by(tape.constant(sums[2]),
                                        tape.leaf(params.kind_weights[2])));
      x = acc;
    } else {
      x = tape.constant(dataset[i].x3);
    }
    Value pred = mlp_forward(tape, x, params.mlp);
    const Eigen::VectorXd ys = params.stats.standardize(y_native[i]);
    return tape.mse(pred, tape.constant(ys.transpose()));
  };

  TrainMetrics metrics;
  AdamOptimizer opt(config.learning_rate);
  const std::size_t bs = std::max(1, config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += bs) {
      const std::size_t end = std::min(train_idx.size(), start + bs);
      for (Param* p : learned) p->zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        Tape tape;
        Value loss = example_loss(tape, train_idx[k]);
        epoch_loss += loss.scalar();
        tape.backward(tape.scale(loss, 1.0 / static_cast<double>(end - start)));
      }
      opt.step(learned);
    }
    metrics.loss_trace.push_back(epoch_loss / static_cast<double>(train_idx.size()));
  }

  auto mae_over = [&](const std::vector<std::size_t>& subset) {
    Eigen::VectorXd mae = Eigen::VectorXd::Zero(nt);
    for (auto i : subset) {
      Eigen::VectorXd x3;
      if (trainable) {
        const auto sums = kind_sums(dataset[i], dim);
        const auto w = params.kind_values();
        x3 = (w[0] * sums[0] + w[1] * sums[1] + w[2] * sums[2]).transpose();
      } else {
        x3 = dataset[i].x3.transpose();
      }
      mae += (predict_graph(x3, params) - y_native[i]).cwiseAbs();
    }
    return Eigen::VectorXd(mae / static_cast<double>(subset.size()));
  };
  metrics.train_mae = mae_over(train_idx);
  if (!val_idx.empty()) metrics.val_mae = mae_over(val_idx);
  for (auto i : train_idx) metrics.train_keys.push_back(dataset[i].key);
  for (auto i : val_idx) metrics.val_keys.push_back(dataset[i].key);
  metrics.final_weights = params.kind_values();
  return metrics;
}

Eigen::VectorXd evaluate(const PredictorParams& params,
                         const std::vector<PredictExample>& dataset,
                         const TargetTable& targets) {
  if (dataset.empty()) throw EmptyDataset("no examples to evaluate");
  Eigen::VectorXd mae = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.targets.size()));
  for (const auto& ex : dataset) {
    if (!targets.has(ex.key)) throw KeyMismatch("no target row for key '" + ex.key + "'");
    const Eigen::VectorXd y = selected_row(targets.row(ex.key), params.targets);
    mae += (predict_graph(ex.x3.transpose(), params) - y).cwiseAbs();
  }
  return mae / static_cast<double>(dataset.size());
}

}  // namespace tiergraph
