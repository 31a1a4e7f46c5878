#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "planest/nn.hpp"
#include "support/oracles.hpp"

using namespace planest;
namespace ts = planest::testsupport;

TEST_SUITE_BEGIN("nn");

namespace {

MatD random_mat(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
  MatD m(r, c);
  for (auto& v : m.d) v = (2.0 * unit_uniform(rng) - 1.0) * scale;
  return m;
}

}  // namespace

TEST_CASE("identity affine passes the input through") {
  Tape<float> t;
  MatF w(3, 3), b(1, 3), x(2, 3);
  for (int i = 0; i < 3; ++i) w(i, i) = 1.0f;
  x.d = {1, -2, 3, 0.5f, 0, -0.25f};
  auto y = t.affine(t.param(w), t.param(b), t.input(x));
  CHECK(t.value(y).d == x.d);
}

TEST_CASE("relu clamps elementwise") {
  Tape<float> t;
  MatF x(1, 4);
  x.d = {-1.0f, 2.0f, 0.0f, -0.5f};
  auto y = t.relu(t.input(x));
  CHECK(t.value(y).d == std::vector<float>{0.0f, 2.0f, 0.0f, 0.0f});
}

TEST_CASE("affine forward matches the scalar oracle") {
  std::mt19937_64 rng(4);
  for (int round = 0; round < 10; ++round) {
    MatD w = random_mat(rng, 5, 7), b = random_mat(rng, 1, 5),
         x = random_mat(rng, 3, 7);
    Tape<double> t;
    auto y = t.affine(t.param(w), t.param(b), t.input(x));
    MatD expect = ts::naive_affine(w, b, x);
    for (size_t i = 0; i < expect.size(); ++i)
      CHECK(t.value(y).d[i] == doctest::Approx(expect.d[i]).epsilon(1e-9));
  }
}

TEST_CASE("affine rejects mismatched shapes") {
  Tape<float> t;
  auto w = t.param(MatF(4, 3)), b = t.param(MatF(1, 4)), x = t.input(MatF(2, 5));
  CHECK_THROWS_AS(t.affine(w, b, x), model_error);
}

TEST_CASE("pooling basics") {
  Tape<float> t;
  MatF a(1, 3), b(1, 3);
  a.d = {1, -2, 5};
  b.d = {0, 4, 5};
  auto ai = t.input(a), bi = t.input(b);
  CHECK(t.value(t.pmin(ai, ai)).d == a.d);
  const auto& mx = t.value(t.pmax(ai, bi));
  for (int c = 0; c < 3; ++c) {
    CHECK(mx(0, c) >= a(0, c));
    CHECK(mx(0, c) >= b(0, c));
  }
}

TEST_CASE("non-finite values abort the forward pass") {
  Tape<float> t;
  MatF a(1, 1), b(1, 1);
  a.d = {1.0f};
  b.d = {0.0f};
  CHECK_THROWS_AS(t.div(t.input(a), t.input(b)), model_error);
}

TEST_CASE("cell with zero parameters and states yields zeros") {
  Tape<float> t;
  int h = 4, e = 6;
  CellParamIds<float> p{t.param(MatF(h, h + e)), t.param(MatF(1, h)),
                        t.param(MatF(h, h + e)), t.param(MatF(1, h)),
                        t.param(MatF(h, h + e)), t.param(MatF(1, h)),
                        t.param(MatF(h, h + e)), t.param(MatF(1, h))};
  auto [g, r] = lstm_cell(t, p, t.zeros(1, e), t.zeros(1, h), t.zeros(1, h));
  for (float v : t.value(g).d) CHECK(v == 0.0f);   // 0.5*0 + 0.5*tanh(0)
  for (float v : t.value(r).d) CHECK(v == 0.0f);   // 0.5*tanh(0)
}

TEST_CASE("long memory passes through when the forget gate saturates") {
  Tape<float> t;
  int h = 3, e = 2;
  MatF keep(1, h), drop(1, h);
  for (int i = 0; i < h; ++i) {
    keep(0, i) = 40.0f;   // sigmoid -> 1
    drop(0, i) = -40.0f;  // sigmoid -> 0
  }
  CellParamIds<float> p{t.param(MatF(h, h + e)), t.param(keep),
                        t.param(MatF(h, h + e)), t.param(drop),
                        t.param(MatF(h, h + e)), t.param(MatF(1, h)),
                        t.param(MatF(h, h + e)), t.param(MatF(1, h))};
  MatF g_prev(1, h);
  g_prev.d = {0.25f, -1.5f, 3.0f};
  auto [g, r] = lstm_cell(t, p, t.zeros(1, e), t.input(g_prev), t.zeros(1, h));
  CHECK(t.value(g).d == g_prev.d);
}

TEST_CASE("cell matches the scalar oracle and stays in range") {
  std::mt19937_64 rng(11);
  int h = 5, e = 4, n = 3;
  for (int round = 0; round < 10; ++round) {
    ts::ScalarCellParams sp{random_mat(rng, h, h + e), random_mat(rng, 1, h),
                            random_mat(rng, h, h + e), random_mat(rng, 1, h),
                            random_mat(rng, h, h + e), random_mat(rng, 1, h),
                            random_mat(rng, h, h + e), random_mat(rng, 1, h)};
    MatD x = random_mat(rng, n, e, 2.0), g0 = random_mat(rng, n, h, 2.0),
         r0 = random_mat(rng, n, h);
    auto [eg, er] = ts::scalar_cell(sp, x, g0, r0);

    Tape<double> t;
    CellParamIds<double> p{t.param(sp.Wf),  t.param(sp.bf),  t.param(sp.Wk1),
                           t.param(sp.bk1), t.param(sp.Wr),  t.param(sp.br),
                           t.param(sp.Wk2), t.param(sp.bk2)};
    uint64_t count = 0;
    auto [g, r] = lstm_cell(t, p, t.input(x), t.input(g0), t.input(r0),
                            &count);
    CHECK(count == 1);
    for (size_t i = 0; i < eg.size(); ++i) {
      CHECK(t.value(g).d[i] == doctest::Approx(eg.d[i]).epsilon(1e-9));
      CHECK(t.value(r).d[i] == doctest::Approx(er.d[i]).epsilon(1e-9));
      CHECK(std::abs(t.value(r).d[i]) < 1.0);
    }
  }
}

TEST_CASE("adam leaves parameters alone on zero gradients and zero rate") {
  MatF p(2, 2);
  p.d = {1, 2, 3, 4};
  MatF zero_g(2, 2);
  AdamState st;
  adam_step({&p}, {&zero_g}, st, {});
  CHECK(p.d == std::vector<float>{1, 2, 3, 4});

  MatF g(2, 2);
  g.d = {1, 1, 1, 1};
  AdamConfig cfg;
  cfg.lr = 0.0f;
  AdamState st2;
  adam_step({&p}, {&g}, st2, cfg);
  CHECK(p.d == std::vector<float>{1, 2, 3, 4});
}

TEST_CASE("adam approaches a signed fixed-size step under constant gradient") {
  // With g constant, bias-corrected m -> g and v -> g^2, so the update tends
  // to lr * sign(g).
  MatF p(1, 2);
  p.d = {0.0f, 0.0f};
  MatF g(1, 2);
  g.d = {0.37f, -12.0f};
  AdamConfig cfg;
  AdamState st;
  std::vector<float> prev = p.d;
  for (int i = 0; i < 200; ++i) {
    prev = p.d;
    adam_step({&p}, {&g}, st, cfg);
  }
  CHECK(prev[0] - p.d[0] == doctest::Approx(cfg.lr).epsilon(1e-3));
  CHECK(prev[1] - p.d[1] == doctest::Approx(-cfg.lr).epsilon(1e-3));
}

TEST_CASE("gradient check on a quadratic is exact to tolerance") {
  std::mt19937_64 rng(5);
  MatD theta = random_mat(rng, 3, 4);
  auto build = [](Tape<double>& t,
                  const std::vector<Tape<double>::Id>& ids) {
    return t.mean_all(t.mul(ids[0], ids[0]));
  };
  GradCheckOptions opt;
  opt.h = 1e-4;
  auto report = grad_check(build, {theta}, opt);
  CHECK(report.checked == 12);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("unused parameters receive zero gradient") {
  std::mt19937_64 rng(6);
  MatD used = random_mat(rng, 2, 2), unused = random_mat(rng, 2, 2);
  Tape<double> t;
  auto u = t.param(used);
  auto v = t.param(unused);
  auto loss = t.mean_all(t.mul(u, u));
  t.backward(loss);
  for (double g : t.gradient(v).d) CHECK(g == 0.0);
}

TEST_CASE("every op kind passes a randomized gradient check") {
  std::mt19937_64 rng(7);
  struct Case {
    const char* name;
    GraphBuilder build;
    std::vector<MatD> params;
  };
  std::vector<Case> cases;
  cases.push_back({"affine+relu",
                   [](Tape<double>& t, const std::vector<Tape<double>::Id>& p) {
                     return t.mean_all(t.relu(t.affine(p[0], p[1], p[2])));
                   },
                   {random_mat(rng, 4, 3), random_mat(rng, 1, 4),
                    random_mat(rng, 2, 3)}});
  cases.push_back({"sigmoid*tanh",
                   [](Tape<double>& t, const std::vector<Tape<double>::Id>& p) {
                     return t.mean_all(t.mul(t.sigmoid(p[0]), t.tanh_(p[1])));
                   },
                   {random_mat(rng, 2, 3), random_mat(rng, 2, 3)}});
  cases.push_back({"div",
                   [](Tape<double>& t, const std::vector<Tape<double>::Id>& p) {
                     return t.mean_all(
                         t.div(p[0], t.scale_shift(t.sigmoid(p[1]), 1.0, 0.5)));
                   },
                   {random_mat(rng, 2, 3), random_mat(rng, 2, 3)}});
  cases.push_back({"minmax",
                   [](Tape<double>& t, const std::vector<Tape<double>::Id>& p) {
                     return t.mean_all(
                         t.sub(t.pmax(p[0], p[1]), t.pmin(p[0], p[1])));
                   },
                   {random_mat(rng, 2, 3), random_mat(rng, 2, 3)}});
  cases.push_back(
      {"concat+gather",
       [](Tape<double>& t, const std::vector<Tape<double>::Id>& p) {
         std::array<Tape<double>::Id, 2> parts{p[0], p[1]};
         auto cat = t.concat_cols(parts);
         auto rows = t.gather_rows(cat, {1, -1, 0, 1});
         std::array<Tape<double>::Id, 2> stack{rows, rows};
         return t.mean_all(t.concat_rows(stack));
       },
       {random_mat(rng, 2, 3), random_mat(rng, 2, 3)}});

  for (const auto& c : cases) {
    GradCheckOptions opt;
    opt.h = 1e-5;
    auto report = grad_check(c.build, c.params, opt);
    INFO(c.name);
    CHECK(report.checked > 0);
    CHECK(report.max_rel_err < 1e-3);
  }
}

TEST_CASE("parameter blocks survive a write/read cycle and detect damage") {
  std::mt19937_64 rng(8);
  ParamStore store;
  store.add_weight("w1", 4, 6, rng);
  store.add_bias("b1", 4);
  store.add_weight("w2", 2, 4, rng);

  std::ostringstream out;
  store.write(out);
  std::string blob = out.str();

  std::istringstream in(blob);
  ParamStore back = ParamStore::read(in);
  REQUIRE(back.entries.size() == store.entries.size());
  for (size_t i = 0; i < store.entries.size(); ++i) {
    CHECK(back.entries[i].first == store.entries[i].first);
    CHECK(back.entries[i].second == store.entries[i].second);
  }

  blob[blob.size() / 2] ^= 0x40;  // flip a bit in the payload
  std::istringstream bad(blob);
  CHECK_THROWS_AS(ParamStore::read(bad), model_error);
}

TEST_SUITE_END();
