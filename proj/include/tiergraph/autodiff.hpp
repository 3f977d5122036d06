#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace tiergraph {

using Matrix = Eigen::MatrixXd;

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonFiniteValue : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotAScalar : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A named trainable tensor. Gradients accumulate across backward passes until
// zeroed by the optimizer step.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

class Tape;

// Handle to a node on a tape; cheap to copy, valid until the tape is cleared.
class Value {
 public:
  Value() = default;
  const Matrix& matrix() const;
  Eigen::Index rows() const { return matrix().rows(); }
  Eigen::Index cols() const { return matrix().cols(); }
  double scalar() const;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Single-threaded record of forward ops; every op checks its output for
// non-finite values. backward() populates Param::grad and clears the tape.
class Tape {
 public:
  Value constant(Matrix v);
  Value leaf(Param& p);
  void backward(Value loss);
  void clear();
  std::size_t size() const { return nodes_.size(); }

  // ops
  Value matmul(Value a, Value b);
  Value transpose(Value a);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value hadamard(Value a, Value b);
  Value scale(Value a, double c);
  Value scale_by(Value a, Value s);  // s is 1x1
  Value relu(Value a);
  Value sigmoid(Value a);
  Value row_sum(Value a);  // n x m -> n x 1
  Value sum(Value a);      // -> 1x1
  Value mse(Value pred, Value target);
  // Mean binary cross-entropy over entries where mask is nonzero (all entries
  // when mask is empty). Probabilities are clamped away from {0,1}; the
  // gradient is zero inside the clamped region.
  Value bce(Value probs, Value targets, const Matrix& mask = Matrix());
  // Numerically exact BCE(sigmoid(logits), targets); preferred whenever the
  // logits are available since it never saturates.
  Value bce_with_logits(Value logits, Value targets, const Matrix& mask = Matrix());

 private:
  friend class Value;
  struct Node {
    Matrix value;
    Matrix grad;
    Param* bound = nullptr;
    std::function<void(Tape&, const Node&)> backprop;
  };
  Value push(Matrix v, std::function<void(Tape&, const Node&)> back, Param* bound = nullptr);
  Node& node(Value v) { return nodes_[v.id_]; }
  const Matrix& value_of(int id) const { return nodes_[id].value; }
  Matrix& grad_of(int id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic|+|numeric|)
// with central differences of width eps.
double grad_check(const std::function<Value(Tape&)>& f, const std::vector<Param*>& params,
                  double eps = 1e-5);

void sgd_step(const std::vector<Param*>& params, double lr);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params);

 private:
  struct Moments {
    Matrix m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::unordered_map<Param*, Moments> state_;
};

}  // namespace tiergraph
