#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

// Minimal reverse-mode automatic differentiation over dense double matrices.
// A Tape records every op in creation order; backward() replays it in reverse.

namespace actgen::ag {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix m);
  // Each Parameter maps to a single leaf per tape; gradients land in Parameter::grad.
  Var param(Parameter& p);

  Var make(Matrix value, Backward backward);

  const Matrix& value(int id) const;
  // Lazily zero-initialized gradient buffer.
  Matrix& grad(int id);

  /// Seeds d(loss)=1 for a 1x1 loss and accumulates into every reachable Parameter.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Parameter* param = nullptr;
    Backward backward;
  };
  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
Var gelu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);
Var minimum(Var a, Var b);  // ties route gradient to a
Var clamp(Var a, double lo, double hi);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var softmax_rows(Var a, bool causal = false);
// Row-wise log-softmax. Columns with allowed[c] == false are excluded (value -inf).
Var log_softmax_rows(Var a, const std::vector<bool>* allowed = nullptr);
Var gather_cols(Var a, std::span<const int> col_per_row);  // (rows x 1)
Var rows(Var a, Index start, Index count);
Var cols(Var a, Index start, Index count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var embedding(Var table, std::span<const int> ids);
Var sum(Var a);
Var mean(Var a);

}  // namespace actgen::ag
