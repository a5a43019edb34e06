#include "gridagent/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace gridagent {

const Mat& Var::value() const { return tape_->value(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(Param& p) {
  auto it = param_ids_.find(&p);
  if (it != param_ids_.end()) return Var(this, it->second);
  nodes_.push_back(Node{Mat(), {}, record_ && p.trainable, &p, {}});
  const int id = static_cast<int>(nodes_.size() - 1);
  param_ids_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::push(Mat value, std::initializer_list<Var> parents, Backward back) {
  bool needs = false;
  if (record_) {
    for (const auto& p : parents) needs = needs || p.needs_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(back) : Backward{}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::push(Mat value, const std::vector<Var>& parents, Backward back) {
  bool needs = false;
  if (record_) {
    for (const auto& p : parents) needs = needs || p.needs_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(back) : Backward{}});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(const Var& v, const Mat& grad) {
  Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = grad;
  } else {
    n.grad += grad;
  }
}

void Tape::backward(const Var& root) {
  if (root.tape() != this) throw std::logic_error("backward on a foreign tape");
  if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("backward needs a 1x1 root");
  if (!needs_grad(root.id())) return;
  nodes_[static_cast<std::size_t>(root.id())].grad = Mat::Ones(1, 1);
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param) {
      if (n.param->grad.size() == 0) n.param->grad = Mat::Zero(n.param->value.rows(), n.param->value.cols());
      n.param->grad += n.grad;
    } else if (n.back) {
      n.back(n.grad);
    }
    n.grad.resize(0, 0);
  }
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

namespace ad {

namespace {

void same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::logic_error("vars from different tapes");
}

void check_shape(bool ok, const char* op) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + op);
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  same_tape(a, b);
  check_shape(a.cols() == b.rows(), "matmul");
  Tape* t = a.tape();
  Mat out = a.value() * b.value();
  return t->push(std::move(out), {a, b}, [t, a, b](const Mat& g) {
    if (a.needs_grad()) t->accumulate(a, g * b.value().transpose());
    if (b.needs_grad()) t->accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  same_tape(a, b);
  check_shape(a.cols() == b.cols(), "matmul_nt");
  Tape* t = a.tape();
  Mat out = a.value() * b.value().transpose();
  return t->push(std::move(out), {a, b}, [t, a, b](const Mat& g) {
    if (a.needs_grad()) t->accumulate(a, g * b.value());
    if (b.needs_grad()) t->accumulate(b, g.transpose() * a.value());
  });
}

Var add(const Var& a, const Var& b) {
  same_tape(a, b);
  check_shape(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape* t = a.tape();
  Mat out = a.value() + b.value();
  return t->push(std::move(out), {a, b}, [t, a, b](const Mat& g) {
    t->accumulate(a, g);
    t->accumulate(b, g);
  });
}

Var add_row(const Var& a, const Var& row) {
  same_tape(a, row);
  check_shape(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Tape* t = a.tape();
  Mat out = a.value();
  out.rowwise() += row.value().row(0);
  return t->push(std::move(out), {a, row}, [t, a, row](const Mat& g) {
    t->accumulate(a, g);
    if (row.needs_grad()) t->accumulate(row, g.colwise().sum());
  });
}

Var scale(const Var& a, double s) {
  Tape* t = a.tape();
  return t->push(a.value() * s, {a}, [t, a, s](const Mat& g) { t->accumulate(a, g * s); });
}

Var lincomb(const std::vector<Var>& xs, const std::vector<double>& coeffs) {
  check_shape(!xs.empty() && xs.size() == coeffs.size(), "lincomb");
  Tape* t = xs.front().tape();
  Mat out = xs.front().value() * coeffs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    same_tape(xs[0], xs[i]);
    out += xs[i].value() * coeffs[i];
  }
  return t->push(std::move(out), xs, [t, xs, coeffs](const Mat& g) {
    for (std::size_t i = 0; i < xs.size(); ++i) t->accumulate(xs[i], g * coeffs[i]);
  });
}

Var softmax_rows(const Var& a) {
  Tape* t = a.tape();
  Mat y = gridagent::softmax_rows(a.value());
  const bool needs = t->recording() && a.needs_grad();
  return t->push(y, {a}, [t, a, y = needs ? y : Mat()](const Mat& g) {
    Mat dot = (g.array() * y.array()).rowwise().sum();
    Mat ga = y.array() * (g.colwise() - dot.col(0)).array();
    t->accumulate(a, ga);
  });
}

Var gelu(const Var& a) {
  Tape* t = a.tape();
  const Mat& x = a.value();
  Mat y = x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
  return t->push(std::move(y), {a}, [t, a](const Mat& g) {
    Mat d = a.value().unaryExpr([](double v) {
      return 0.5 * (1.0 + std::erf(v * M_SQRT1_2)) + v * std::exp(-0.5 * v * v) * 0.3989422804014327;
    });
    t->accumulate(a, (g.array() * d.array()).matrix());
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  same_tape(x, gamma);
  same_tape(x, beta);
  check_shape(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 && beta.cols() == x.cols(),
              "layer_norm");
  Tape* t = x.tape();
  const Eigen::Index n = x.cols();
  Mat xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.value().row(r).mean();
    const auto centered = (x.value().row(r).array() - mu).eval();
    const double var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = centered * inv_std(r);
  }
  Mat y = xhat.array().rowwise() * gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  return t->push(std::move(y), {x, gamma, beta}, [t, x, gamma, beta, xhat, inv_std, n](const Mat& g) {
    if (gamma.needs_grad()) t->accumulate(gamma, (g.array() * xhat.array()).colwise().sum().matrix());
    if (beta.needs_grad()) t->accumulate(beta, g.colwise().sum());
    if (!x.needs_grad()) return;
    Mat gx_hat = g.array().rowwise() * gamma.value().row(0).array();
    Mat gx(g.rows(), n);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double m1 = gx_hat.row(r).mean();
      const double m2 = (gx_hat.row(r).array() * xhat.row(r).array()).mean();
      gx.row(r) = inv_std(r) * (gx_hat.row(r).array() - m1 - xhat.row(r).array() * m2);
    }
    t->accumulate(x, gx);
  });
}

Var gather_rows(const Var& table, const std::vector<int>& ids) {
  Tape* t = table.tape();
  Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw std::out_of_range("gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  return t->push(std::move(out), {table}, [t, table, ids](const Mat& g) {
    Mat gt = Mat::Zero(table.rows(), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
    t->accumulate(table, gt);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  check_shape(!parts.empty(), "concat_rows");
  Tape* t = parts.front().tape();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    check_shape(p.cols() == parts.front().cols(), "concat_rows");
    rows += p.rows();
  }
  Mat out(rows, parts.front().cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t->push(std::move(out), parts, [t, parts](const Mat& g) {
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      if (p.needs_grad()) t->accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  check_shape(!parts.empty(), "concat_cols");
  Tape* t = parts.front().tape();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p);
    check_shape(p.rows() == parts.front().rows(), "concat_cols");
    cols += p.cols();
  }
  Mat out(parts.front().rows(), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t->push(std::move(out), parts, [t, parts](const Mat& g) {
    Eigen::Index c = 0;
    for (const auto& p : parts) {
      if (p.needs_grad()) t->accumulate(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows");
  Tape* t = a.tape();
  Mat out = a.value().middleRows(start, count);
  return t->push(std::move(out), {a}, [t, a, start, count](const Mat& g) {
    Mat ga = Mat::Zero(a.rows(), a.cols());
    ga.middleRows(start, count) = g;
    t->accumulate(a, ga);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  check_shape(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols");
  Tape* t = a.tape();
  Mat out = a.value().middleCols(start, count);
  return t->push(std::move(out), {a}, [t, a, start, count](const Mat& g) {
    Mat ga = Mat::Zero(a.rows(), a.cols());
    ga.middleCols(start, count) = g;
    t->accumulate(a, ga);
  });
}

Var pool_rows(const Var& a, Eigen::Index out_rows) {
  const Eigen::Index n = a.rows();
  check_shape(out_rows >= 1 && out_rows <= n, "pool_rows");
  Tape* t = a.tape();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> spans;
  Mat out(out_rows, a.cols());
  for (Eigen::Index j = 0; j < out_rows; ++j) {
    const Eigen::Index lo = (j * n) / out_rows;
    const Eigen::Index hi = ((j + 1) * n + out_rows - 1) / out_rows;
    spans.emplace_back(lo, hi);
    out.row(j) = a.value().middleRows(lo, hi - lo).colwise().mean();
  }
  return t->push(std::move(out), {a}, [t, a, spans](const Mat& g) {
    Mat ga = Mat::Zero(a.rows(), a.cols());
    for (std::size_t j = 0; j < spans.size(); ++j) {
      const auto [lo, hi] = spans[j];
      const double w = 1.0 / static_cast<double>(hi - lo);
      for (Eigen::Index r = lo; r < hi; ++r) ga.row(r) += w * g.row(static_cast<Eigen::Index>(j));
    }
    t->accumulate(a, ga);
  });
}

Var dot_const(const Var& a, const Mat& w) {
  check_shape(a.rows() == w.rows() && a.cols() == w.cols(), "dot_const");
  Tape* t = a.tape();
  Mat out(1, 1);
  out(0, 0) = (a.value().array() * w.array()).sum();
  return t->push(std::move(out), {a}, [t, a, w](const Mat& g) { t->accumulate(a, w * g(0, 0)); });
}

Var cross_entropy_sum(const Var& logits, const std::vector<int>& targets, double smoothing) {
  check_shape(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy_sum");
  Tape* t = logits.tape();
  const Eigen::Index A = logits.cols();
  const Mat p = gridagent::softmax_rows(logits.value());
  Mat q = Mat::Constant(logits.rows(), A, smoothing / static_cast<double>(A));
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = targets[static_cast<std::size_t>(r)];
    if (y < 0 || y >= A) throw std::out_of_range("cross_entropy target out of range");
    q(r, y) += 1.0 - smoothing;
    const double m = logits.value().row(r).maxCoeff();
    const double lse = m + std::log((logits.value().row(r).array() - m).exp().sum());
    loss += (q.row(r).array() * (lse - logits.value().row(r).array())).sum();
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  return t->push(std::move(out), {logits}, [t, logits, p, q](const Mat& g) { t->accumulate(logits, (p - q) * g(0, 0)); });
}

Var kl_sum(const Var& logits, const Mat& target_probs) {
  check_shape(logits.rows() == target_probs.rows() && logits.cols() == target_probs.cols(), "kl_sum");
  Tape* t = logits.tape();
  const Mat p = gridagent::softmax_rows(logits.value());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.value().row(r).maxCoeff();
    const double lse = m + std::log((logits.value().row(r).array() - m).exp().sum());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double q = target_probs(r, c);
      if (q > 0.0) loss += q * (std::log(q) - (logits.value()(r, c) - lse));
    }
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  return t->push(std::move(out), {logits}, [t, logits, p, target_probs](const Mat& g) {
    t->accumulate(logits, (p - target_probs) * g(0, 0));
  });
}

Var attention(const Var& q, const Var& k, const Var& v) {
  const double s = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return matmul(softmax_rows(scale(matmul_nt(q, k), s)), v);
}

}  // namespace ad

}  // namespace gridagent
