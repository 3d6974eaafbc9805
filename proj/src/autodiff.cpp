#include "catgen/autodiff.hpp"

#include "catgen/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace catgen::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

const Matrix& Gradients::of(const Parameter& p) const {
  auto it = grads_.find(&p);
  if (it == grads_.end()) throw std::out_of_range("parameter not on tape: " + p.name);
  return it->second;
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
  Node n;
  n.external = &p.value;
  n.requires_grad = enable_grad_ && p.trainable;
  n.param = n.requires_grad ? &p : nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (&v.tape() != this) throw std::logic_error("autodiff: mixing values from different tapes");
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& grad) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = grad;
    n.has_grad = true;
  } else {
    n.grad += grad;
  }
}

Gradients Tape::backward(Var loss) {
  if (&loss.tape() != this) throw std::logic_error("autodiff: loss belongs to another tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw std::logic_error("autodiff: loss must be a 1x1 value");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(loss.id(), Matrix::Ones(1, 1));

  Gradients out;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, value(i), n.grad);
    if (n.param != nullptr) {
      auto [it, inserted] = out.grads_.try_emplace(n.param, n.grad);
      if (!inserted) it->second += n.grad;
    }
  }
  // Parameters recorded on the tape but unreachable from the loss get zeros.
  for (const auto& n : nodes_) {
    if (n.param != nullptr) out.grads_.try_emplace(n.param, Matrix::Zero(n.param->value.rows(), n.param->value.cols()));
  }
  return out;
}

double Tape::max_abs_value() const {
  double m = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Matrix& v = value(i);
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  }
  return m;
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string("autodiff ") + op + ": shape mismatch (" + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("autodiff matmul: inner dimensions differ");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("autodiff matmul_nt: inner dimensions differ");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() * b.value().transpose(), {a, b},
                         [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
                           if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib));
                           if (t.requires_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
                         });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ib)) t.accumulate(ib, -g);
  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("autodiff add_row: bad row shape");
  const auto ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [ia, ir](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {a, b},
                         [ia, ib](Tape& t, const Matrix&, const Matrix& g) {
                           if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                           if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                         });
}

Var scale(Var a, double s) {
  const auto ia = a.id();
  return a.tape().record(a.value() * s, {a}, [ia, s](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(ia, g * s);
  });
}

namespace {
constexpr double kGeluC = 0.044715;
const double kGeluK = std::sqrt(2.0 / std::numbers::pi);
}  // namespace

Var gelu(Var a) {
  const auto ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluK * (x + kGeluC * x * x * x)));
  });
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Matrix&, const Matrix& g) {
    Matrix d = t.value(ia).unaryExpr([](double x) {
      const double th = std::tanh(kGeluK * (x + kGeluC * x * x * x));
      return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluK * (1.0 + 3.0 * kGeluC * x * x);
    });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

Var exp(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().array().exp().matrix(), {a}, [ia](Tape& t, const Matrix& out, const Matrix& g) {
    t.accumulate(ia, g.cwiseProduct(out));
  });
}

Var clamp(Var a, double lo, double hi) {
  const auto ia = a.id();
  return a.tape().record(a.value().cwiseMax(lo).cwiseMin(hi), {a},
                         [ia, lo, hi](Tape& t, const Matrix&, const Matrix& g) {
                           const Matrix& x = t.value(ia);
                           Matrix d = ((x.array() > lo) && (x.array() < hi)).cast<double>().matrix();
                           t.accumulate(ia, g.cwiseProduct(d));
                         });
}

Var square(Var a) {
  const auto ia = a.id();
  return a.tape().record(a.value().array().square().matrix(), {a}, [ia](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(ia, 2.0 * g.cwiseProduct(t.value(ia)));
  });
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  const Eigen::Index n = a.rows();
  const Eigen::Index d = a.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw std::invalid_argument("autodiff layer_norm: gain/bias must be 1 x width rows");
  }
  const Matrix& x = a.value();
  Matrix normed(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normed.row(r) = (x.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (normed.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  const auto ia = a.id(), ig = gain.id(), ib = bias.id();
  return a.tape().record(
      std::move(out), {a, gain, bias},
      [ia, ig, ib, normed = std::move(normed), inv_std = std::move(inv_std)](Tape& t, const Matrix&, const Matrix& g) {
        if (t.requires_grad(ig)) t.accumulate(ig, g.cwiseProduct(normed).colwise().sum());
        if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
        if (!t.requires_grad(ia)) return;
        const Matrix dn = (g.array().rowwise() * t.value(ig).row(0).array()).matrix();
        Matrix dx(dn.rows(), dn.cols());
        for (Eigen::Index r = 0; r < dn.rows(); ++r) {
          const double m1 = dn.row(r).mean();
          const double m2 = dn.row(r).cwiseProduct(normed.row(r)).mean();
          dx.row(r) = inv_std(r) * (dn.row(r).array() - m1 - normed.row(r).array() * m2);
        }
        t.accumulate(ia, dx);
      });
}

Var masked_softmax(Var logits, const BoolMatrix& blocked) {
  const Matrix& x = logits.value();
  if (blocked.rows() != x.rows() || blocked.cols() != x.cols()) {
    throw std::invalid_argument("autodiff masked_softmax: mask shape mismatch");
  }
  Matrix p = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!blocked(r, c)) mx = std::max(mx, x(r, c));
    }
    if (!std::isfinite(mx)) throw NumericError("attention row " + std::to_string(r) + " has no open entry");
    double total = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (!blocked(r, c)) {
        p(r, c) = std::exp(x(r, c) - mx);
        total += p(r, c);
      }
    }
    p.row(r) /= total;
  }
  const auto il = logits.id();
  return logits.tape().record(std::move(p), {logits}, [il](Tape& t, const Matrix& out, const Matrix& g) {
    // dx = p * (g - sum(p * g)) per row; blocked entries have p == 0.
    const Eigen::VectorXd inner = out.cwiseProduct(g).rowwise().sum();
    Matrix dx = out.cwiseProduct(g.colwise() - inner);
    t.accumulate(il, dx);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::invalid_argument("autodiff slice_rows: range");
  const auto ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return a.tape().record(a.value().middleRows(start, count), {a},
                         [ia, start, count, rows, cols](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix full = Matrix::Zero(rows, cols);
                           full.middleRows(start, count) = g;
                           t.accumulate(ia, full);
                         });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("autodiff slice_cols: range");
  const auto ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return a.tape().record(a.value().middleCols(start, count), {a},
                         [ia, start, count, rows, cols](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix full = Matrix::Zero(rows, cols);
                           full.middleCols(start, count) = g;
                           t.accumulate(ia, full);
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff concat_rows: no parts");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("autodiff concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> pieces;  // (id, rows)
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    pieces.emplace_back(p.id(), p.rows());
    at += p.rows();
  }
  return parts[0].tape().record(std::move(out), parts, [pieces](Tape& t, const Matrix&, const Matrix& g) {
    Eigen::Index offset = 0;
    for (const auto& [id, n] : pieces) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleRows(offset, n));
      offset += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff concat_cols: no parts");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("autodiff concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> pieces;
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    pieces.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return parts[0].tape().record(std::move(out), parts, [pieces](Tape& t, const Matrix&, const Matrix& g) {
    Eigen::Index offset = 0;
    for (const auto& [id, n] : pieces) {
      if (t.requires_grad(id)) t.accumulate(id, g.middleCols(offset, n));
      offset += n;
    }
  });
}

Var gather_rows(Var a, std::vector<Eigen::Index> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), a.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= a.rows()) throw std::invalid_argument("autodiff gather_rows: index range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(indices[k]);
  }
  const auto ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return a.tape().record(std::move(out), {a},
                         [ia, rows, cols, indices = std::move(indices)](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix full = Matrix::Zero(rows, cols);
                           for (std::size_t k = 0; k < indices.size(); ++k) {
                             full.row(indices[k]) += g.row(static_cast<Eigen::Index>(k));
                           }
                           t.accumulate(ia, full);
                         });
}

Var sum(Var a) {
  const auto ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a}, [ia, rows, cols](Tape& t, const Matrix&, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(rows, cols, g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mse(Var a, Var b) { return mean(square(sub(a, b))); }

}  // namespace catgen::ad
