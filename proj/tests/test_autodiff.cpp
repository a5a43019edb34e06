#include "doctest.h"

#include "numeric_checks.hpp"

using namespace gridagent;

namespace {

// Finite-difference check of a scalar built from one input leaf.
double op_check(const Mat& init, const std::function<Var(Tape&, const Var&)>& f) {
  ParamStore store;
  store.add("x", init);
  Rng rng = make_rng(5, 5);
  Mat w;
  {
    Tape t(false);
    const Var y = f(t, t.param(store.get("x")));
    w = normal_mat(y.rows(), y.cols(), 1.0, rng);
  }
  auto build = [&](Tape& t) { return ad::dot_const(f(t, t.param(store.get("x"))), w); };
  return oracle::check_gradients(
             store, [&] { Tape t(false); return build(t).scalar(); },
             [&] { Tape t; t.backward(build(t)); })
      .worst_rel;
}

Mat rnd(int r, int c, std::uint64_t seed) {
  Rng rng = make_rng(seed, 1);
  return normal_mat(r, c, 1.0, rng);
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("elementwise and shape ops pass finite differences") {
  const Mat b = rnd(4, 3, 2);
  CHECK(op_check(rnd(5, 4, 1), [&](Tape& t, const Var& x) { return ad::matmul(x, t.constant(b)); }) < 1e-4);
  CHECK(op_check(rnd(5, 3, 1), [&](Tape& t, const Var& x) { return ad::matmul_nt(x, t.constant(rnd(2, 3, 4))); }) < 1e-4);
  CHECK(op_check(rnd(5, 4, 1), [](Tape&, const Var& x) { return ad::softmax_rows(x); }) < 1e-4);
  CHECK(op_check(rnd(5, 4, 1), [](Tape&, const Var& x) { return ad::gelu(x); }) < 1e-4);
  CHECK(op_check(rnd(9, 4, 1), [](Tape&, const Var& x) { return ad::pool_rows(x, 4); }) < 1e-4);
  CHECK(op_check(rnd(6, 4, 1), [](Tape&, const Var& x) { return ad::gather_rows(x, {0, 2, 2, 5}); }) < 1e-4);
  CHECK(op_check(rnd(6, 4, 1), [](Tape&, const Var& x) { return ad::slice_cols(ad::slice_rows(x, 1, 3), 1, 2); }) < 1e-4);
  CHECK(op_check(rnd(3, 4, 1), [](Tape&, const Var& x) { return ad::concat_rows({ad::concat_cols({x, x}), ad::concat_cols({x, ad::scale(x, 3.0)})}); }) < 1e-4);
  CHECK(op_check(rnd(3, 4, 1), [](Tape&, const Var& x) { return ad::lincomb({x, ad::scale(x, 2.0)}, {0.25, -1.5}); }) < 1e-4);
  CHECK(op_check(rnd(3, 4, 1), [](Tape&, const Var& x) { return ad::add_row(x, ad::slice_rows(x, 0, 1)); }) < 1e-4);
  CHECK(op_check(rnd(4, 6, 1), [](Tape& t, const Var& x) {
          return ad::layer_norm(x, t.constant(rnd(1, 6, 8)), t.constant(rnd(1, 6, 9)));
        }) < 1e-4);
  CHECK(op_check(rnd(4, 6, 1), [](Tape&, const Var& x) { return ad::attention(x, ad::scale(x, 0.5), x); }) < 1e-4);
}

TEST_CASE("every attention site passes gradient and loop-oracle checks") {
  for (const char* site : {"enc.cp", "enc.ha", "enc.fu"}) {
    const auto r = checks::attention_site(site, 3);
    CAPTURE(site);
    CAPTURE(r.where);
    CHECK(r.worst_rel < 1e-4);
    CHECK(r.oracle_abs < 1e-6);
  }
}

TEST_CASE("losses match closed forms and pass finite differences") {
  const auto r = checks::losses(4);
  CHECK(r.worst_rel < 1e-4);
  CHECK(r.oracle_abs < 1e-10);
}

TEST_CASE("KL of identical distributions is zero and cross-entropy of a certain prediction is near zero") {
  Mat logits = rnd(3, 14, 6);
  CHECK(kl_loss_value(logits, logits) == doctest::Approx(0.0).epsilon(1e-12));
  Mat sharp = Mat::Constant(1, 14, -50.0);
  sharp(0, 4) = 50.0;
  CHECK(bc_loss_value(sharp, {4}) < 1e-12);
  CHECK(bc_loss_value(Mat::Zero(1, 14), {4}) == doctest::Approx(std::log(14.0)));
}

TEST_CASE("end-to-end policy passes gradient and loop-oracle checks") {
  for (bool blind : {false, true}) {
    const auto r = checks::end_to_end(21, blind, 5, 40);
    CAPTURE(blind);
    CAPTURE(r.where);
    CHECK(r.worst_rel < 1e-4);
    CHECK(r.oracle_abs < 1e-6);
  }
}

TEST_CASE("inference tapes record no gradients") {
  ParamStore store;
  store.add("x", rnd(2, 2, 1));
  Tape t(false);
  const Var y = ad::matmul(t.param(store.get("x")), t.param(store.get("x")));
  CHECK_FALSE(y.needs_grad());
}

TEST_CASE("non-finite logits raise NumericError") {
  Model model(checks::tiny_config(), Vocab::build(InstructionPool::default_pool()), false);
  model.params().get("head.b2").value(0, 0) = std::nan("");
  Tape t(false);
  EncoderState s = model.initial_state();
  const auto obs = checks::random_observations(1, 1, 1);
  CHECK_THROWS_AS(model.step(t, s, model.goal_tokens("x"), obs[0], model.start_action()), NumericError);
}

}
