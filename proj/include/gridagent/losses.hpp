#pragma once

#include <vector>

#include "gridagent/autodiff.hpp"
#include "gridagent/config.hpp"

namespace gridagent {

struct LossConfig {
  double lambda_bc = 1.0;
  double lambda_kl = 0.5;
  double label_smoothing = 0.0;

  void validate() const;
};

// Mean over timesteps (rows) of the smoothed negative log-likelihood.
Var bc_loss(const Var& logits, const std::vector<int>& actions, double label_smoothing = 0.0);
// Mean over rows of KL(softmax(teacher) || softmax(student)); the teacher is a constant.
Var kl_loss(const Var& student_logits, const Mat& teacher_logits);
// lambda_bc * bc + lambda_kl * kl. `teacher_logits` may be null only when lambda_kl == 0.
Var total_loss(const Var& student_logits, const std::vector<int>& actions, const Mat* teacher_logits,
               const LossConfig& cfg);

double bc_loss_value(const Mat& logits, const std::vector<int>& actions, double label_smoothing = 0.0);
double kl_loss_value(const Mat& student_logits, const Mat& teacher_logits);

}  // namespace gridagent
