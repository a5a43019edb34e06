#include "gridagent/stats.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gridagent {

double mean(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

double sign_test_p(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

SignTest paired_sign_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sign test needs paired samples");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) {
      ++t.wins;
    } else if (a[i] < b[i]) {
      ++t.losses;
    } else {
      ++t.ties;
    }
  }
  t.p_value = sign_test_p(t.wins, t.losses);
  return t;
}

void LinearProbe::fit(const Mat& x, const std::vector<int>& labels, int classes, int iterations, double lr, double l2) {
  const auto n = x.rows();
  if (n == 0 || static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("probe needs labelled rows");
  mu_ = x.colwise().mean();
  sigma_ = ((x.rowwise() - mu_).array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < sigma_.size(); ++j) {
    if (sigma_(j) < 1e-12) sigma_(j) = 1.0;
  }
  const Mat z = ((x.rowwise() - mu_).array().rowwise() / sigma_.array()).matrix();
  Mat y = Mat::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  w_ = Mat::Zero(x.cols(), classes);
  b_ = Eigen::RowVectorXd::Zero(classes);
  for (int it = 0; it < iterations; ++it) {
    Mat logits = z * w_;
    logits.rowwise() += b_;
    const Mat g = (softmax_rows(logits) - y) / static_cast<double>(n);
    w_ -= lr * (z.transpose() * g + l2 * w_);
    b_ -= lr * g.colwise().sum();
  }
}

std::vector<int> LinearProbe::predict(const Mat& x) const {
  Mat logits = ((x.rowwise() - mu_).array().rowwise() / sigma_.array()).matrix() * w_;
  logits.rowwise() += b_;
  std::vector<int> out;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

double probe_accuracy(const Mat& x, const std::vector<int>& labels, int classes, int folds) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<int> fold(n);
  std::vector<int> seen(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < n; ++i) fold[i] = seen[static_cast<std::size_t>(labels[i])]++ % folds;
  int correct = 0;
  int total = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
    if (te.empty() || tr.empty()) continue;
    Mat xtr(static_cast<Eigen::Index>(tr.size()), x.cols());
    std::vector<int> ytr;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      xtr.row(static_cast<Eigen::Index>(i)) = x.row(tr[i]);
      ytr.push_back(labels[static_cast<std::size_t>(tr[i])]);
    }
    Mat xte(static_cast<Eigen::Index>(te.size()), x.cols());
    for (std::size_t i = 0; i < te.size(); ++i) xte.row(static_cast<Eigen::Index>(i)) = x.row(te[i]);
    LinearProbe probe;
    probe.fit(xtr, ytr, classes);
    const auto pred = probe.predict(xte);
    for (std::size_t i = 0; i < te.size(); ++i) {
      correct += pred[i] == labels[static_cast<std::size_t>(te[i])];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

}  // namespace gridagent
