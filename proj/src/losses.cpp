#include "gridagent/losses.hpp"

namespace gridagent {

void LossConfig::validate() const {
  if (lambda_bc < 0.0 || lambda_kl < 0.0) throw ConfigError("loss weights must be non-negative");
  if (!(lambda_bc + lambda_kl > 0.0)) throw ConfigError("lambda_bc + lambda_kl must be positive");
  if (label_smoothing < 0.0 || label_smoothing > 0.2) throw ConfigError("label_smoothing must lie in [0, 0.2]");
}

Var bc_loss(const Var& logits, const std::vector<int>& actions, double label_smoothing) {
  if (logits.rows() == 0) throw Error("bc_loss on an empty sequence");
  return ad::scale(ad::cross_entropy_sum(logits, actions, label_smoothing), 1.0 / static_cast<double>(logits.rows()));
}

Var kl_loss(const Var& student_logits, const Mat& teacher_logits) {
  if (student_logits.rows() == 0) throw Error("kl_loss on an empty sequence");
  return ad::scale(ad::kl_sum(student_logits, softmax_rows(teacher_logits)),
                   1.0 / static_cast<double>(student_logits.rows()));
}

Var total_loss(const Var& student_logits, const std::vector<int>& actions, const Mat* teacher_logits,
               const LossConfig& cfg) {
  cfg.validate();
  if (cfg.lambda_kl > 0.0 && !teacher_logits) throw Error("lambda_kl > 0 needs teacher logits");
  std::vector<Var> terms;
  std::vector<double> weights;
  if (cfg.lambda_bc > 0.0) {
    terms.push_back(bc_loss(student_logits, actions, cfg.label_smoothing));
    weights.push_back(cfg.lambda_bc);
  }
  if (cfg.lambda_kl > 0.0) {
    terms.push_back(kl_loss(student_logits, *teacher_logits));
    weights.push_back(cfg.lambda_kl);
  }
  if (terms.size() == 1 && weights[0] == 1.0) return terms[0];
  return ad::lincomb(terms, weights);
}

double bc_loss_value(const Mat& logits, const std::vector<int>& actions, double label_smoothing) {
  Tape t(false);
  return bc_loss(t.constant(logits), actions, label_smoothing).scalar();
}

double kl_loss_value(const Mat& student_logits, const Mat& teacher_logits) {
  Tape t(false);
  return kl_loss(t.constant(student_logits), teacher_logits).scalar();
}

}  // namespace gridagent
