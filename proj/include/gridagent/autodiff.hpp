#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace gridagent {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool valid() const { return tape_ != nullptr; }
  bool needs_grad() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape. Nodes are appended in evaluation order; backward walks
// them in reverse. Parameter leaves add their gradient straight into Param::grad.
// A tape built with record=false keeps values only, for inference.
class Tape {
 public:
  using Backward = std::function<void(const Mat& grad)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Mat value);
  // One leaf per parameter per tape; the leaf reads the parameter in place.
  Var param(Param& p);
  // Adds an op node; `back` runs only if some parent needs a gradient.
  Var push(Mat value, std::initializer_list<Var> parents, Backward back);
  Var push(Mat value, const std::vector<Var>& parents, Backward back);

  const Mat& value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.param ? n.param->value : n.value;
  }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  void accumulate(const Var& v, const Mat& grad);

  // Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
  void backward(const Var& root);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Param* param = nullptr;
    Backward back;
  };
  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Param*, int> param_ids_;
};

namespace ad {

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
// Adds a 1 x n row to every row of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
// sum_i coeffs[i] * xs[i]; all terms share a shape.
Var lincomb(const std::vector<Var>& xs, const std::vector<double>& coeffs);
Var softmax_rows(const Var& a);
Var gelu(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var gather_rows(const Var& table, const std::vector<int>& ids);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
// Adaptive average pooling of rows into `out_rows` contiguous groups.
Var pool_rows(const Var& a, Eigen::Index out_rows);
// Scalar sum(a .* w) for a constant w; handy for test losses.
Var dot_const(const Var& a, const Mat& w);
// Sum over rows of -log softmax(logits)[target], with optional label smoothing.
Var cross_entropy_sum(const Var& logits, const std::vector<int>& targets, double smoothing = 0.0);
// Sum over rows of KL(p || softmax(logits)) for constant target distributions p.
Var kl_sum(const Var& logits, const Mat& target_probs);

// softmax(q k^T / sqrt(d)) v, single head.
Var attention(const Var& q, const Var& k, const Var& v);

}  // namespace ad

// Row-wise softmax on plain matrices (for inference-side consumers).
Mat softmax_rows(const Mat& logits);

}  // namespace gridagent
