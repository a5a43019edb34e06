#pragma once

#include <vector>

#include "gridagent/autodiff.hpp"

namespace gridagent {

double mean(const std::vector<double>& xs);
double stddev(const std::vector<double>& xs);  // population

// P(X >= wins) for X ~ Binomial(wins + losses, 1/2); ties are dropped before calling.
double sign_test_p(int wins, int losses);

struct SignTest {
  int wins = 0;
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;
};
// One-sided test that `a` beats `b` on paired samples.
SignTest paired_sign_test(const std::vector<double>& a, const std::vector<double>& b);

// Multinomial logistic regression on standardized features, full-batch
// gradient descent with a small L2 penalty.
class LinearProbe {
 public:
  void fit(const Mat& x, const std::vector<int>& labels, int classes, int iterations = 500, double lr = 0.5,
           double l2 = 1e-3);
  std::vector<int> predict(const Mat& x) const;

 private:
  Eigen::RowVectorXd mu_;
  Eigen::RowVectorXd sigma_;
  Mat w_;
  Eigen::RowVectorXd b_;
};

// k-fold cross-validated accuracy; folds are assigned round-robin within each class.
double probe_accuracy(const Mat& x, const std::vector<int>& labels, int classes, int folds = 5);

}  // namespace gridagent
