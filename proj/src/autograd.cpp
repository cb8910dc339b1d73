#include "actgen/autograd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace actgen::ag {

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix m) {
  Node n;
  n.value = std::move(m);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.external = &p.value;
  n.param = record_ ? &p : nullptr;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return {this, id};
}

Var Tape::make(Matrix value, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (record_) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) {
    const Matrix& v = n.external != nullptr ? *n.external : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("backward expects a 1x1 loss");
  grad(loss.id)(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  return t.make(a.value() * b.value(), [a = a.id, b = b.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.grad(a).noalias() += g * t.value(b).transpose();
    t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = *a.tape;
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  return t.make(a.value() * b.value().transpose(), [a = a.id, b = b.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.grad(a).noalias() += g * t.value(b);
    t.grad(b).noalias() += g.transpose() * t.value(a);
  });
}

Var add(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "add");
  return a.tape->make(a.value() + b.value(), [a = a.id, b = b.id](Tape& t, int self) {
    t.grad(a) += t.grad(self);
    t.grad(b) += t.grad(self);
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "sub");
  return a.tape->make(a.value() - b.value(), [a = a.id, b = b.id](Tape& t, int self) {
    t.grad(a) += t.grad(self);
    t.grad(b) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "mul");
  return a.tape->make(a.value().cwiseProduct(b.value()), [a = a.id, b = b.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.grad(a) += g.cwiseProduct(t.value(b));
    t.grad(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Var a, double s) {
  return a.tape->make(a.value() * s, [a = a.id, s](Tape& t, int self) { t.grad(a) += t.grad(self) * s; });
}

Var add_scalar(Var a, double s) {
  return a.tape->make(a.value().array() + s, [a = a.id](Tape& t, int self) { t.grad(a) += t.grad(self); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape->make(std::move(out), [a = a.id, r = row.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    t.grad(a) += g;
    t.grad(r) += g.colwise().sum();
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
  return a.tape->make(std::move(out), [a = a.id](Tape& t, int self) {
    const Matrix& x = t.value(a);
    const Matrix& g = t.grad(self);
    Matrix d = x.unaryExpr([](double v) {
      const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    });
    t.grad(a) += g.cwiseProduct(d);
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.tape->make(std::move(out), [a = a.id](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.grad(a) += t.grad(self).cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  return a.tape->make(std::move(out), [a = a.id](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.grad(a) += t.grad(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  return a.tape->make(std::move(out), [a = a.id](Tape& t, int self) {
    t.grad(a) += t.grad(self).cwiseProduct(t.value(self));
  });
}

Var square(Var a) {
  return a.tape->make(a.value().array().square().matrix(), [a = a.id](Tape& t, int self) {
    t.grad(a) += 2.0 * t.grad(self).cwiseProduct(t.value(a));
  });
}

Var minimum(Var a, Var b) {
  check_same_shape(a.value(), b.value(), "minimum");
  Matrix out = a.value().cwiseMin(b.value());
  return a.tape->make(std::move(out), [a = a.id, b = b.id](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& va = t.value(a);
    const Matrix& vb = t.value(b);
    Matrix& ga = t.grad(a);
    Matrix& gb = t.grad(b);
    for (Index i = 0; i < g.size(); ++i) {
      if (va(i) <= vb(i)) {
        ga(i) += g(i);
      } else {
        gb(i) += g(i);
      }
    }
  });
}

Var clamp(Var a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape->make(std::move(out), [a = a.id, lo, hi](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(a);
    Matrix& ga = t.grad(a);
    for (Index i = 0; i < g.size(); ++i) {
      if (x(i) >= lo && x(i) <= hi) ga(i) += g(i);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& xv = x.value();
  const Index n = xv.rows();
  const Index d = xv.cols();
  if (gain.cols() != d || bias.cols() != d) throw std::invalid_argument("layer_norm: shape mismatch");
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = xhat;
  out.array().rowwise() *= gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return x.tape->make(std::move(out), [x = x.id, g = gain.id, b = bias.id, xhat = std::move(xhat),
                                       inv_std = std::move(inv_std)](Tape& t, int self) {
    const Matrix& dy = t.grad(self);
    const Matrix& gv = t.value(g);
    t.grad(g) += dy.cwiseProduct(xhat).colwise().sum();
    t.grad(b) += dy.colwise().sum();
    Matrix dxhat = dy;
    dxhat.array().rowwise() *= gv.row(0).array();
    Matrix& dx = t.grad(x);
    for (Index i = 0; i < dxhat.rows(); ++i) {
      const double m1 = dxhat.row(i).mean();
      const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
      dx.row(i).array() += inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
    }
  });
}

Var softmax_rows(Var a, bool causal) {
  const Matrix& x = a.value();
  Matrix p = Matrix::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Index width = causal ? std::min<Index>(i + 1, x.cols()) : x.cols();
    const double mx = x.row(i).head(width).maxCoeff();
    double z = 0.0;
    for (Index j = 0; j < width; ++j) {
      p(i, j) = std::exp(x(i, j) - mx);
      z += p(i, j);
    }
    p.row(i).head(width) /= z;
  }
  return a.tape->make(std::move(p), [a = a.id](Tape& t, int self) {
    const Matrix& p = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix gp = g.cwiseProduct(p);
    Eigen::VectorXd s = gp.rowwise().sum();
    Matrix dx = gp;
    dx -= (p.array().colwise() * s.array()).matrix();
    t.grad(a) += dx;
  });
}

Var log_softmax_rows(Var a, const std::vector<bool>* allowed) {
  const Matrix& x = a.value();
  if (allowed != nullptr && static_cast<Index>(allowed->size()) != x.cols()) {
    throw std::invalid_argument("log_softmax_rows: mask width mismatch");
  }
  const double neg_inf = -std::numeric_limits<double>::infinity();
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double mx = neg_inf;
    for (Index j = 0; j < x.cols(); ++j) {
      if (allowed == nullptr || (*allowed)[static_cast<std::size_t>(j)]) mx = std::max(mx, x(i, j));
    }
    double z = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (allowed == nullptr || (*allowed)[static_cast<std::size_t>(j)]) z += std::exp(x(i, j) - mx);
    }
    const double lz = mx + std::log(z);
    for (Index j = 0; j < x.cols(); ++j) {
      const bool ok = allowed == nullptr || (*allowed)[static_cast<std::size_t>(j)];
      out(i, j) = ok ? x(i, j) - lz : neg_inf;
    }
  }
  return a.tape->make(std::move(out), [a = a.id](Tape& t, int self) {
    const Matrix& lp = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& dx = t.grad(a);
    for (Index i = 0; i < lp.rows(); ++i) {
      double gs = 0.0;
      for (Index j = 0; j < lp.cols(); ++j) {
        if (std::isfinite(lp(i, j))) gs += g(i, j);
      }
      for (Index j = 0; j < lp.cols(); ++j) {
        if (std::isfinite(lp(i, j))) dx(i, j) += g(i, j) - std::exp(lp(i, j)) * gs;
      }
    }
  });
}

Var gather_cols(Var a, std::span<const int> col_per_row) {
  const Matrix& x = a.value();
  if (static_cast<Index>(col_per_row.size()) != x.rows()) throw std::invalid_argument("gather_cols: row mismatch");
  Matrix out(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const int c = col_per_row[static_cast<std::size_t>(i)];
    if (c < 0 || c >= x.cols()) throw std::out_of_range("gather_cols: column out of range");
    out(i, 0) = x(i, c);
  }
  std::vector<int> idx(col_per_row.begin(), col_per_row.end());
  return a.tape->make(std::move(out), [a = a.id, idx = std::move(idx)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& dx = t.grad(a);
    for (Index i = 0; i < g.rows(); ++i) dx(i, idx[static_cast<std::size_t>(i)]) += g(i, 0);
  });
}

Var rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("rows: range");
  return a.tape->make(a.value().middleRows(start, count), [a = a.id, start, count](Tape& t, int self) {
    t.grad(a).middleRows(start, count) += t.grad(self);
  });
}

Var cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("cols: range");
  return a.tape->make(a.value().middleCols(start, count), [a = a.id, start, count](Tape& t, int self) {
    t.grad(a).middleCols(start, count) += t.grad(self);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  Tape& t = *parts.front().tape;
  Index total = 0;
  const Index width = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != width) throw std::invalid_argument("concat_rows: width mismatch");
    total += p.rows();
  }
  Matrix out(total, width);
  std::vector<int> ids;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    ids.push_back(p.id);
  }
  return t.make(std::move(out), [ids = std::move(ids)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Index at = 0;
    for (int id : ids) {
      const Index r = t.value(id).rows();
      t.grad(id) += g.middleRows(at, r);
      at += r;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Tape& t = *parts.front().tape;
  Index total = 0;
  const Index height = parts.front().rows();
  for (const auto& p : parts) {
    if (p.rows() != height) throw std::invalid_argument("concat_cols: height mismatch");
    total += p.cols();
  }
  Matrix out(height, total);
  std::vector<int> ids;
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    ids.push_back(p.id);
  }
  return t.make(std::move(out), [ids = std::move(ids)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Index at = 0;
    for (int id : ids) {
      const Index c = t.value(id).cols();
      t.grad(id) += g.middleCols(at, c);
      at += c;
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  const Matrix& w = table.value();
  Matrix out(static_cast<Index>(ids.size()), w.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= w.rows()) throw std::out_of_range("embedding: id out of range");
    out.row(static_cast<Index>(i)) = w.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape->make(std::move(out), [w = table.id, idx = std::move(idx)](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    Matrix& dw = t.grad(w);
    for (std::size_t i = 0; i < idx.size(); ++i) dw.row(idx[i]) += g.row(static_cast<Index>(i));
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->make(std::move(out), [a = a.id](Tape& t, int self) {
    t.grad(a).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.tape->make(std::move(out), [a = a.id, n](Tape& t, int self) {
    t.grad(a).array() += t.grad(self)(0, 0) / n;
  });
}

}  // namespace actgen::ag
