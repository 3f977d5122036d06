#include "tiergraph/autodiff.hpp"

#include <cmath>

namespace tiergraph {
namespace {

constexpr double kProbEps = 1e-12;

void check_finite(const Matrix& m, const char* op) {
  if (!m.allFinite())
    throw NonFiniteValue(std::string("non-finite value produced by ") + op);
}

}  // namespace

const Matrix& Value::matrix() const { return tape_->value_of(id_); }

double Value::scalar() const {
  const Matrix& m = matrix();
  if (m.rows() != 1 || m.cols() != 1) throw NotAScalar("value is not 1x1");
  return m(0, 0);
}

Value Tape::push(Matrix v, std::function<void(Tape&, const Node&)> back, Param* bound) {
  Node n;
  n.value = std::move(v);
  n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  n.bound = bound;
  n.backprop = std::move(back);
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::constant(Matrix v) {
  check_finite(v, "constant");
  return push(std::move(v), nullptr);
}

Value Tape::leaf(Param& p) {
  check_finite(p.value, "leaf");
  return push(p.value, nullptr, &p);
}

void Tape::backward(Value loss) {
  if (loss.tape_ != this) throw std::logic_error("loss from another tape");
  Node& l = node(loss);
  if (l.value.rows() != 1 || l.value.cols() != 1)
    throw NotAScalar("backward requires a 1x1 loss");
  l.grad(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backprop) n.backprop(*this, n);
    if (n.bound) n.bound->grad += n.grad;
  }
  clear();
}

void Tape::clear() { nodes_.clear(); }

Value Tape::matmul(Value a, Value b) {
  const Matrix& A = value_of(a.id_);
  const Matrix& B = value_of(b.id_);
  if (A.cols() != B.rows())
    throw ShapeMismatch("matmul " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                        " * " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  Matrix C = A * B;
  check_finite(C, "matmul");
  const int ia = a.id_, ib = b.id_;
  return push(std::move(C), [ia, ib](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad * t.value_of(ib).transpose();
    t.grad_of(ib) += t.value_of(ia).transpose() * n.grad;
  });
}

Value Tape::transpose(Value a) {
  Matrix C = value_of(a.id_).transpose();
  const int ia = a.id_;
  return push(std::move(C), [ia](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad.transpose();
  });
}

Value Tape::add(Value a, Value b) {
  const Matrix& A = value_of(a.id_);
  const Matrix& B = value_of(b.id_);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw ShapeMismatch("add");
  Matrix C = A + B;
  check_finite(C, "add");
  const int ia = a.id_, ib = b.id_;
  return push(std::move(C), [ia, ib](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad;
    t.grad_of(ib) += n.grad;
  });
}

Value Tape::sub(Value a, Value b) {
  const Matrix& A = value_of(a.id_);
  const Matrix& B = value_of(b.id_);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw ShapeMismatch("sub");
  Matrix C = A - B;
  check_finite(C, "sub");
  const int ia = a.id_, ib = b.id_;
  return push(std::move(C), [ia, ib](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad;
    t.grad_of(ib) -= n.grad;
  });
}

Value Tape::hadamard(Value a, Value b) {
  const Matrix& A = value_of(a.id_);
  const Matrix& B = value_of(b.id_);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw ShapeMismatch("hadamard");
  Matrix C = A.cwiseProduct(B);
  check_finite(C, "hadamard");
  const int ia = a.id_, ib = b.id_;
  return push(std::move(C), [ia, ib](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad.cwiseProduct(t.value_of(ib));
    t.grad_of(ib) += n.grad.cwiseProduct(t.value_of(ia));
  });
}

Value Tape::scale(Value a, double c) {
  Matrix C = value_of(a.id_) * c;
  check_finite(C, "scale");
  const int ia = a.id_;
  return push(std::move(C), [ia, c](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad * c;
  });
}

Value Tape::scale_by(Value a, Value s) {
  const Matrix& S = value_of(s.id_);
  if (S.rows() != 1 || S.cols() != 1) throw NotAScalar("scale_by expects a 1x1 factor");
  Matrix C = value_of(a.id_) * S(0, 0);
  check_finite(C, "scale_by");
  const int ia = a.id_, is = s.id_;
  return push(std::move(C), [ia, is](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad * t.value_of(is)(0, 0);
    t.grad_of(is)(0, 0) += n.grad.cwiseProduct(t.value_of(ia)).sum();
  });
}

Value Tape::relu(Value a) {
  Matrix C = value_of(a.id_).cwiseMax(0.0);
  const int ia = a.id_;
  return push(std::move(C), [ia](Tape& t, const Node& n) {
    t.grad_of(ia) +=
        n.grad.cwiseProduct((t.value_of(ia).array() > 0.0).cast<double>().matrix());
  });
}

Value Tape::sigmoid(Value a) {
  Matrix C = (1.0 / (1.0 + (-value_of(a.id_).array()).exp())).matrix();
  check_finite(C, "sigmoid");
  const int ia = a.id_;
  return push(std::move(C), [ia](Tape& t, const Node& n) {
    const auto y = n.value.array();
    t.grad_of(ia) += n.grad.cwiseProduct((y * (1.0 - y)).matrix());
  });
}

Value Tape::row_sum(Value a) {
  Matrix C = value_of(a.id_).rowwise().sum();
  check_finite(C, "row_sum");
  const int ia = a.id_;
  return push(std::move(C), [ia](Tape& t, const Node& n) {
    t.grad_of(ia) += n.grad * Matrix::Ones(1, t.value_of(ia).cols());
  });
}

Value Tape::sum(Value a) {
  Matrix C(1, 1);
  C(0, 0) = value_of(a.id_).sum();
  check_finite(C, "sum");
  const int ia = a.id_;
  return push(std::move(C), [ia](Tape& t, const Node& n) {
    const Matrix& A = t.value_of(ia);
    t.grad_of(ia) += Matrix::Constant(A.rows(), A.cols(), n.grad(0, 0));
  });
}

Value Tape::mse(Value pred, Value target) {
  const Matrix& P = value_of(pred.id_);
  const Matrix& Y = value_of(target.id_);
  if (P.rows() != Y.rows() || P.cols() != Y.cols()) throw ShapeMismatch("mse");
  const double n = static_cast<double>(P.size());
  Matrix C(1, 1);
  C(0, 0) = (P - Y).squaredNorm() / n;
  check_finite(C, "mse");
  const int ip = pred.id_, iy = target.id_;
  return push(std::move(C), [ip, iy, n](Tape& t, const Node& nd) {
    const Matrix diff = (t.value_of(ip) - t.value_of(iy)) * (2.0 / n * nd.grad(0, 0));
    t.grad_of(ip) += diff;
    t.grad_of(iy) -= diff;
  });
}

Value Tape::bce(Value probs, Value targets, const Matrix& mask) {
  const Matrix& P = value_of(probs.id_);
  const Matrix& Y = value_of(targets.id_);
  if (P.rows() != Y.rows() || P.cols() != Y.cols()) throw ShapeMismatch("bce");
  Matrix W = mask.size() == 0 ? Matrix::Ones(P.rows(), P.cols()) : mask;
  if (W.rows() != P.rows() || W.cols() != P.cols()) throw ShapeMismatch("bce mask");
  const double wsum = W.sum();
  Matrix C(1, 1);
  if (wsum == 0.0) {
    C(0, 0) = 0.0;
    return push(std::move(C), nullptr);
  }
  const auto p = P.array().min(1.0 - kProbEps).max(kProbEps);
  C(0, 0) = -(W.array() * (Y.array() * p.log() + (1.0 - Y.array()) * (1.0 - p).log())).sum() /
            wsum;
  check_finite(C, "bce");
  const int ip = probs.id_, iy = targets.id_;
  return push(std::move(C), [ip, iy, W, wsum](Tape& t, const Node& nd) {
    const auto raw = t.value_of(ip).array();
    const auto p = raw.min(1.0 - kProbEps).max(kProbEps);
    // the clamp makes the loss flat outside [eps, 1-eps]
    const auto interior =
        (raw > kProbEps && raw < 1.0 - kProbEps).cast<double>();
    const auto y = t.value_of(iy).array();
    const double g = nd.grad(0, 0) / wsum;
    t.grad_of(ip) +=
        (W.array() * interior * (-y / p + (1.0 - y) / (1.0 - p)) * g).matrix();
    t.grad_of(iy) += (W.array() * ((1.0 - p).log() - p.log()) * g).matrix();
  });
}

Value Tape::bce_with_logits(Value logits, Value targets, const Matrix& mask) {
  const Matrix& L = value_of(logits.id_);
  const Matrix& Y = value_of(targets.id_);
  if (L.rows() != Y.rows() || L.cols() != Y.cols()) throw ShapeMismatch("bce_with_logits");
  Matrix W = mask.size() == 0 ? Matrix::Ones(L.rows(), L.cols()) : mask;
  if (W.rows() != L.rows() || W.cols() != L.cols())
    throw ShapeMismatch("bce_with_logits mask");
  const double wsum = W.sum();
  Matrix C(1, 1);
  if (wsum == 0.0) {
    C(0, 0) = 0.0;
    return push(std::move(C), nullptr);
  }
  // max(l, 0) - l y + log(1 + exp(-|l|))
  const auto l = L.array();
  C(0, 0) = (W.array() *
             (l.max(0.0) - l * Y.array() + (1.0 + (-l.abs()).exp()).log()))
                .sum() /
            wsum;
  check_finite(C, "bce_with_logits");
  const int il = logits.id_, iy = targets.id_;
  return push(std::move(C), [il, iy, W, wsum](Tape& t, const Node& nd) {
    const auto l = t.value_of(il).array();
    const auto y = t.value_of(iy).array();
    const double g = nd.grad(0, 0) / wsum;
    const auto sig = 1.0 / (1.0 + (-l).exp());
    t.grad_of(il) += (W.array() * (sig - y) * g).matrix();
    t.grad_of(iy) += (W.array() * (-l) * g).matrix();
  });
}

double grad_check(const std::function<Value(Tape&)>& f, const std::vector<Param*>& params,
                  double eps) {
  // analytic gradients
  std::vector<Matrix> saved_grads;
  for (Param* p : params) {
    saved_grads.push_back(p->grad);
    p->zero_grad();
  }
  {
    Tape tape;
    tape.backward(f(tape));
  }
  std::vector<Matrix> analytic;
  for (Param* p : params) analytic.push_back(p->grad);

  double max_err = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param* p = params[k];
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + eps;
      double up;
      {
        Tape tape;
        Value l = f(tape);
        up = l.scalar();
        tape.clear();
      }
      p->value.data()[i] = orig - eps;
      double down;
      {
        Tape tape;
        Value l = f(tape);
        down = l.scalar();
        tape.clear();
      }
      p->value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k].data()[i];
      const double err = std::abs(a - numeric) /
                         std::max(1e-8, std::abs(a) + std::abs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->grad = saved_grads[k];
  return max_err;
}

void sgd_step(const std::vector<Param*>& params, double lr) {
  for (Param* p : params) {
    p->value -= lr * p->grad;
    check_finite(p->value, "sgd_step");
  }
}

void AdamOptimizer::step(const std::vector<Param*>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Param* p : params) {
    auto [it, fresh] = state_.try_emplace(p);
    if (fresh) {
      it->second.m = Matrix::Zero(p->value.rows(), p->value.cols());
      it->second.v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    Moments& mo = it->second;
    mo.m = beta1_ * mo.m + (1.0 - beta1_) * p->grad;
    mo.v = beta2_ * mo.v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
    const Matrix mhat = mo.m / bc1;
    const Matrix vhat = mo.v / bc2;
    p->value -=
        lr_ * mhat.cwiseQuotient(vhat.cwiseSqrt() + Matrix::Constant(
                                                        vhat.rows(), vhat.cols(), eps_));
    check_finite(p->value, "adam_step");
  }
}

}  // namespace tiergraph
