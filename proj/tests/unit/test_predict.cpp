#include <doctest.h>

#include <fstream>
#include <random>

#include "fixture_table.hpp"
#include "tiergraph/predict.hpp"

using namespace tiergraph;
namespace ts = tiergraph::testsupport;

namespace {

// Deterministic synthetic dataset: random embeddings keyed "m<i>".
std::vector<PredictExample> synthetic_examples(int count, int dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<PredictExample> out;
  for (int i = 0; i < count; ++i) {
    PredictExample ex;
    ex.key = "m" + std::to_string(i);
    ex.x3.resize(1, dim);
    for (int j = 0; j < dim; ++j) ex.x3(0, j) = d(rng);
    out.push_back(std::move(ex));
  }
  return out;
}

TargetTable table_for(const std::vector<PredictExample>& exs,
                      const std::function<double(int)>& fn) {
  TargetTable t;
  for (std::size_t i = 0; i < exs.size(); ++i) {
    std::array<double, kTargetCount> row{};
    for (int j = 0; j < kTargetCount; ++j)
      row[j] = fn(static_cast<int>(i)) + 0.05 * j;
    t.rows[exs[i].key] = row;
    t.keys.push_back(exs[i].key);
  }
  return t;
}

}  // namespace

TEST_CASE("predict_graph: zero MLP outputs the training mean") {
  PredictorConfig config;
  config.input_dim = 4;
  config.targets = {0, 2};
  PredictorParams params = init_predictor(config, 2);
  for (auto& p : params.mlp) p.value.setZero();
  params.stats.mean = (Eigen::VectorXd(2) << 3.5, -1.25).finished();
  params.stats.stddev = (Eigen::VectorXd(2) << 2.0, 0.5).finished();
  const Eigen::VectorXd y = predict_graph(Eigen::VectorXd::Zero(4), params);
  REQUIRE(y.size() == 2);
  CHECK(y[0] == doctest::Approx(3.5));
  CHECK(y[1] == doctest::Approx(-1.25));
}

TEST_CASE("predict_graph: hand-computed scalar pipeline") {
  PredictorConfig config;
  config.input_dim = 1;
  config.hidden1 = 1;
  config.hidden2 = 1;
  config.targets = {0};
  PredictorParams params = init_predictor(config, 1);
  params.mlp[0].value = Matrix::Constant(1, 1, 2.0);  // w1
  params.mlp[1].value = Matrix::Constant(1, 1, 1.0);  // b1
  params.mlp[2].value = Matrix::Constant(1, 1, 3.0);  // w2
  params.mlp[3].value = Matrix::Constant(1, 1, 0.0);  // b2
  params.mlp[4].value = Matrix::Constant(1, 1, 1.0);  // w3
  params.mlp[5].value = Matrix::Constant(1, 1, 0.5);  // b3
  const Eigen::VectorXd y =
      predict_graph(Eigen::VectorXd::Constant(1, 1.0), params);
  // relu(2*1+1)=3 -> relu(3*3)=9 -> 9+0.5
  CHECK(y[0] == doctest::Approx(9.5).epsilon(1e-12));
}

TEST_CASE("train_predictor: learnable synthetic target") {
  auto exs = synthetic_examples(24, 6, 41);
  const TargetTable t = table_for(exs, [&](int i) {
    return 2.0 * exs[i].x3(0, 0) - 0.7 * exs[i].x3(0, 3);
  });
  PredictorConfig config;
  config.input_dim = 6;
  config.targets = {0};
  config.epochs = 400;
  config.seed = 2;
  PredictorParams params = init_predictor(config, 1);
  const TrainMetrics m = train_predictor(params, exs, t, config);
  CHECK(m.loss_trace.back() < m.loss_trace.front());
  CHECK(m.train_mae[0] < 0.2);
  CHECK(m.val_mae.size() == 1);
  CHECK(m.train_keys.size() + m.val_keys.size() == exs.size());
}

TEST_CASE("train_predictor: trainable weights stay put at lr=0") {
  auto exs = synthetic_examples(6, 4, 7);
  for (auto& ex : exs) {
    ex.z2 = Matrix::Ones(2, 4);
    ex.kinds = {GroupKind::kFg, GroupKind::kCcg};
    ex.x3 = Matrix::Zero(1, 4);
  }
  const TargetTable t = table_for(exs, [](int i) { return 0.1 * i; });
  PredictorConfig config;
  config.input_dim = 4;
  config.targets = {0};
  config.epochs = 10;
  config.learning_rate = 0.0;
  config.weight_mode = WeightMode::kTrainableByKind;
  PredictorParams params = init_predictor(config, 1);
  train_predictor(params, exs, t, config);
  CHECK(params.kind_values() == std::array<double, 3>{1.0, 0.5, 0.1});
}

TEST_CASE("gradient of the loss w.r.t. kind weights passes grad_check") {
  std::mt19937 rng(15);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<PredictExample> batch;
  for (int i = 0; i < 4; ++i) {
    PredictExample ex;
    ex.key = "m" + std::to_string(i);
    ex.z2.resize(3, 5);
    for (Eigen::Index k = 0; k < ex.z2.size(); ++k) ex.z2.data()[k] = d(rng);
    ex.kinds = {GroupKind::kFg, GroupKind::kRg, GroupKind::kCcg};
    batch.push_back(std::move(ex));
  }
  PredictorConfig config;
  config.input_dim = 5;
  config.hidden1 = 8;
  config.hidden2 = 8;
  config.targets = {0};
  config.seed = 3;
  PredictorParams params = init_predictor(config, 1);

  auto f = [&](Tape& t) {
    Value total = t.constant(Matrix::Zero(1, 1));
    for (const auto& ex : batch) {
      std::array<Matrix, 3> sums{Matrix::Zero(1, 5), Matrix::Zero(1, 5),
                                 Matrix::Zero(1, 5)};
      for (Eigen::Index g = 0; g < ex.z2.rows(); ++g)
        sums[static_cast<int>(ex.kinds[g])] += ex.z2.row(g);
      Value x = t.scale_by(t.constant(sums[0]), t.leaf(params.kind_weights[0]));
      x = t.add(x, t.scale_by(t.constant(sums[1]), t.leaf(params.kind_weights[1])));
      x = t.add(x, t.scale_by(t.constant(sums[2]), t.leaf(params.kind_weights[2])));
      Value h = t.relu(t.add(t.matmul(x, t.leaf(params.mlp[0])), t.leaf(params.mlp[1])));
      h = t.relu(t.add(t.matmul(h, t.leaf(params.mlp[2])), t.leaf(params.mlp[3])));
      Value pred = t.add(t.matmul(h, t.leaf(params.mlp[4])), t.leaf(params.mlp[5]));
      total = t.add(total, t.mse(pred, t.constant(Matrix::Constant(1, 1, 0.3))));
    }
    return total;
  };
  CHECK(grad_check(f, params.kind_params(), 1e-5) <= 1e-4);
}

TEST_CASE("trainable pooling at (1,0.5,0.1) reproduces FIXED-mode forwards") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  PredictorConfig config;
  config.input_dim = 6;
  config.targets = {0};
  config.seed = 19;
  PredictorParams params = init_predictor(config, 1);

  for (int rep = 0; rep < 10; ++rep) {
    Matrix z2(4, 6);
    for (Eigen::Index i = 0; i < z2.size(); ++i) z2.data()[i] = d(rng);
    const std::vector<GroupKind> kinds{GroupKind::kFg, GroupKind::kFg, GroupKind::kRg,
                                       GroupKind::kCcg};
    Eigen::VectorXd m2(4);
    for (int i = 0; i < 4; ++i)
      m2[i] = GroupWeightConfig{}.kind_weight(kinds[static_cast<std::size_t>(i)]);
    const Matrix x3_fixed = diff_group_pool(z2, Matrix(m2));

    // trainable-mode pooling with the same constants
    Matrix x3_trainable = Matrix::Zero(1, 6);
    std::array<Matrix, 3> sums{Matrix::Zero(1, 6), Matrix::Zero(1, 6), Matrix::Zero(1, 6)};
    for (int g = 0; g < 4; ++g) sums[static_cast<int>(kinds[g])] += z2.row(g);
    x3_trainable = 1.0 * sums[0] + 0.5 * sums[1] + 0.1 * sums[2];

    const Eigen::VectorXd a = predict_graph(x3_fixed.transpose(), params);
    const Eigen::VectorXd b = predict_graph(x3_trainable.transpose(), params);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("FIXED-mode invariance under compensated weight scaling") {
  auto exs = synthetic_examples(5, 6, 99);
  PredictorConfig config;
  config.input_dim = 6;
  config.targets = {0};
  config.seed = 4;
  PredictorParams params = init_predictor(config, 1);
  for (double c : {0.5, 2.0, 10.0}) {
    PredictorParams scaled = init_predictor(config, 1);
    scaled.mlp[0].value = params.mlp[0].value / c;
    for (const auto& ex : exs) {
      const Eigen::VectorXd a = predict_graph(ex.x3.transpose(), params);
      const Eigen::VectorXd b = predict_graph(Eigen::VectorXd(c * ex.x3.transpose()), scaled);
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("evaluate: exact predictions, constant predictor, single row") {
  auto exs = synthetic_examples(8, 3, 5);
  const TargetTable t = table_for(exs, [](int i) { return 1.0 + 0.5 * i; });
  PredictorConfig config;
  config.input_dim = 3;
  config.targets = {0};
  PredictorParams params = init_predictor(config, 1);
  for (auto& p : params.mlp) p.value.setZero();

  // constant predictor at the dataset mean -> MAE equals mean absolute deviation
  double mean = 0.0;
  for (std::size_t i = 0; i < exs.size(); ++i) mean += t.row(exs[i].key)[0];
  mean /= static_cast<double>(exs.size());
  params.stats.mean = Eigen::VectorXd::Constant(1, mean);
  params.stats.stddev = Eigen::VectorXd::Ones(1);
  double mad = 0.0;
  for (std::size_t i = 0; i < exs.size(); ++i)
    mad += std::abs(t.row(exs[i].key)[0] - mean);
  mad /= static_cast<double>(exs.size());
  const Eigen::VectorXd mae = evaluate(params, exs, t);
  CHECK(mae[0] == doctest::Approx(mad).epsilon(1e-12));

  // all rows equal to the prediction -> MAE 0
  TargetTable exact;
  for (const auto& ex : exs) {
    std::array<double, kTargetCount> row{};
    row[0] = mean;
    exact.rows[ex.key] = row;
    exact.keys.push_back(ex.key);
  }
  CHECK(evaluate(params, exs, exact)[0] == doctest::Approx(0.0));

  // single-row evaluation
  const std::vector<PredictExample> one{exs[0]};
  const double expect = std::abs(t.row(exs[0].key)[0] - mean);
  CHECK(evaluate(params, one, t)[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("standardize/destandardize round-trips") {
  TargetStats st;
  st.mean = (Eigen::VectorXd(3) << 1.0, -2.0, 100.0).finished();
  st.stddev = (Eigen::VectorXd(3) << 0.1, 10.0, 3.0).finished();
  const Eigen::VectorXd y = (Eigen::VectorXd(3) << 0.5, 7.25, 98.0).finished();
  CHECK((st.destandardize(st.standardize(y)) - y).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("training is reproducible under a fixed seed") {
  auto exs = synthetic_examples(12, 5, 8);
  const TargetTable t = table_for(exs, [](int i) { return 0.3 * i; });
  PredictorConfig config;
  config.input_dim = 5;
  config.targets = {1};
  config.epochs = 60;
  config.seed = 21;
  auto run = [&]() {
    PredictorParams params = init_predictor(config, 1);
    return train_predictor(params, exs, t, config);
  };
  const TrainMetrics a = run();
  const TrainMetrics b = run();
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(a.train_mae == b.train_mae);
  CHECK(a.val_mae == b.val_mae);
  CHECK(a.val_keys == b.val_keys);
}

TEST_CASE("error paths: KeyMismatch and ConstantTarget") {
  auto exs = synthetic_examples(4, 3, 6);
  PredictorConfig config;
  config.input_dim = 3;
  config.targets = {0};
  config.epochs = 1;
  PredictorParams params = init_predictor(config, 1);

  TargetTable missing = table_for(exs, [](int i) { return 1.0 * i; });
  missing.rows.erase(exs[1].key);
  CHECK_THROWS_AS(train_predictor(params, exs, missing, config), KeyMismatch);

  const TargetTable constant = table_for(exs, [](int) { return 5.0; });
  PredictorParams p2 = init_predictor(config, 1);
  CHECK_THROWS_AS(train_predictor(p2, exs, constant, config), ConstantTarget);
}
