#include "doctest.h"

#include "encoder_checks.hpp"

using namespace gridagent;

TEST_SUITE("encoder_stack") {

TEST_CASE("1000-step fuzz: shapes, bank bound, merge weights, identity at init, oracle bank") {
  for (bool no_merge : {false, true}) {
    const auto r = checks::encoder_fuzz(1000, 5, no_merge);
    CAPTURE(no_merge);
    CHECK(r.shapes_ok);
    CHECK(r.bank_bounded);
    CHECK(r.weights_ok);
    CHECK(r.identity_at_init);
    CHECK(r.matches_oracle_bank);
  }
}

TEST_CASE("merge picks the most similar adjacent pair, lowest index on ties") {
  Mat a = Mat::Zero(1, 2), b = Mat::Zero(1, 2), c = Mat::Zero(1, 2);
  a << 1, 0;
  b << 0, 1;
  c << 0, 2;
  CHECK(most_similar_pair({a, b, c}) == 1);
  CHECK(most_similar_pair({a, a, a}) == 0);
  CHECK(mean_row_cosine(Mat::Zero(1, 2), a) == 0.0);
}

TEST_CASE("weighted merge averages by absorbed counts") {
  Tape t(false);
  MemoryBank bank(2, true);
  Mat x(1, 2);
  x << 1, 0;
  bank.insert(t.constant(x));
  bank.insert(t.constant(x));
  Mat y(1, 2);
  y << 0, 1;
  bank.insert(t.constant(y));  // merges the identical pair (0, 1)
  REQUIRE(bank.size() == 2);
  CHECK(bank.weights() == std::vector<int>{2, 1});
  Mat z(1, 2);
  z << 0.5, 0.5;
  bank.insert(t.constant(z));
  // z is closer to y than y is to x, so (1, 2) merges with weights 1 and 1.
  CHECK(bank.weights() == std::vector<int>{2, 2});
  CHECK(bank.entries()[1].value()(0, 0) == doctest::Approx(0.25));
  CHECK(bank.total_weight() == 4);
}

TEST_CASE("disabled bank drops the oldest entry") {
  Tape t(false);
  MemoryBank bank(2, false);
  for (int i = 0; i < 4; ++i) bank.insert(t.constant(Mat::Constant(1, 2, i)));
  CHECK(bank.size() == 2);
  CHECK(bank.entries()[0].value()(0, 0) == 2.0);
}

TEST_CASE("ablation flags bypass their stages") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.n_b = 2;
  ParamStore store;
  Rng rng = make_rng(1, 1);
  add_encoder_params(store, cfg, rng);
  checks::randomize(store, 2);
  Tape t(false);
  const Var v = t.constant(normal_mat(9, 8, 1.0, rng));
  auto off = cfg;
  off.disable_cp = true;
  CHECK(causal_perceive(store, off, v, 3).value() == v.value());
  CHECK(causal_perceive(store, cfg, v, 3).value() != v.value());
  MemoryBank bank;
  const Var q = t.param(store.get("enc.query"));
  CHECK(history_attend(store, cfg, q, bank).value() == q.value());  // empty bank
  bank.insert(q);
  off = cfg;
  off.disable_ha = true;
  CHECK(history_attend(store, off, q, bank).value() == q.value());
  CHECK(history_attend(store, cfg, q, bank).value() != q.value());
  CHECK_THROWS(causal_perceive(store, cfg, v, cfg.num_actions + 1));
}

}
