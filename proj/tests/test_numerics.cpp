#include <doctest.h>

#include <cmath>
#include <vector>

#include "cnenet/error.hpp"
#include "cnenet/tape.hpp"
#include "oracles.hpp"

using namespace cne;

namespace {

NdArray random_array(Shape shape, Rng& rng, double scale = 1.0) {
  NdArray a(std::move(shape));
  for (auto& v : a.data()) v = scale * rng.normal();
  return a;
}

}  // namespace

TEST_CASE("NdArray validates shapes") {
  CHECK_THROWS_AS(NdArray(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(NdArray(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  NdArray a(Shape{2, 3}, 1.5);
  CHECK(a.size() == 6);
  CHECK_FALSE(a.has_grad());
  a.grad()[0] = 1.0;
  CHECK(a.has_grad());
  CHECK(a.grad().size() == a.size());
}

TEST_CASE("matmul identity cases") {
  const auto a = NdArray::matrix({{1, 2}, {3, 4}});
  const auto i2 = NdArray::matrix({{1, 0}, {0, 1}});
  CHECK(matmul(a, i2) == a);

  Rng rng(3);
  const auto b = random_array({3, 5}, rng);
  const auto i3 = NdArray::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  CHECK(matmul(i3, b) == b);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const NdArray a(Shape{2, 3}), b(Shape{4, 2});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[4x2]") != std::string::npos);
  }
}

TEST_CASE("matmul backward matches finite differences") {
  Rng rng(11);
  NdArray a = random_array({4, 5}, rng), b = random_array({5, 3}, rng), w = random_array({4, 3}, rng);
  auto loss = [&](Tape& t) {
    Var c = matmul(t, t.parameter(a), t.parameter(b));
    // weighted sum of the product makes every output entry matter
    std::vector<Var> terms;
    for (std::size_t r = 0; r < 4; ++r) {
      Var row = slice_rows(t, c, r, 1);
      Var wr = t.constant(NdArray::matrix(3, 1, {w.at(r, 0), w.at(r, 1), w.at(r, 2)}));
      terms.push_back(matmul(t, row, wr));
    }
    return sum(t, terms);
  };
  NdArray* params[] = {&a, &b};
  const auto r = grad_check(loss, params);
  CHECK(r.max_relative_error < 1e-4);
  CHECK(r.entries == 20 + 15);
}

TEST_CASE("softmax basics") {
  const auto u = softmax(NdArray::vector({0, 0, 0}));
  for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const auto big = softmax(NdArray::vector({1000, 0}));
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(1.0));
  CHECK(big[1] < 1e-300);

  CHECK_THROWS_AS(softmax(NdArray::vector({1.0, NAN})), NumericError);
  CHECK_THROWS_AS(softmax(NdArray::vector({INFINITY, 0})), NumericError);
}

TEST_CASE("softmax rows sum to one and masked columns get zero") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_array({3, 7}, rng, 10.0);
    const std::vector<std::uint8_t> mask{1, 1, 0, 1, 0, 1, 1};
    const auto p = softmax(x, mask);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        if (!mask[c]) CHECK(p.at(r, c) == 0.0);
        CHECK(p.at(r, c) >= 0.0);
        s += p.at(r, c);
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("softmax backward matches finite differences") {
  Rng rng(7);
  NdArray x = random_array({1, 6}, rng);
  const auto w = random_array({6, 1}, rng);
  auto loss = [&](Tape& t) { return matmul(t, softmax_rows(t, t.parameter(x)), t.constant(w)); };
  NdArray* params[] = {&x};
  CHECK(grad_check(loss, params).max_relative_error < 1e-4);
}

TEST_CASE("cross entropy values") {
  const auto y0 = NdArray::vector({1, 0, 0});
  CHECK(cross_entropy(NdArray::vector({1, 0, 0}), y0) == doctest::Approx(0.0));
  const auto uniform = NdArray::vector({1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(cross_entropy(uniform, NdArray::vector({0, 1, 0})) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  // Clamped rather than infinite.
  CHECK(cross_entropy(NdArray::vector({0, 1, 0}), y0) == doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy(uniform, NdArray::vector({1, 1, 0})), DataError);
  CHECK_THROWS_AS(cross_entropy(uniform, NdArray::vector({0.5, 0.5, 0})), DataError);
}

TEST_CASE("cross entropy gradient w.r.t. logits is p - y") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    NdArray z = random_array({1, 5}, rng);
    const std::size_t target = rng.below(5);
    Tape t;
    Var zv = t.parameter(z);
    Var p = softmax_rows(t, zv);
    Var l = cross_entropy(t, p, target);
    t.backward(l);
    const auto probs = t.value(p);
    for (std::size_t k = 0; k < 5; ++k) {
      const double expect = probs[k] - (k == target ? 1.0 : 0.0);
      CHECK(std::abs(z.grad()[k] - expect) < 1e-6);
    }
  }
}

TEST_CASE("grad_check on a linear model with squared loss") {
  Rng rng(17);
  NdArray w = random_array({4, 3}, rng);
  const auto x = random_array({1, 4}, rng);
  auto loss = [&](Tape& t) { return sum_squares(t, matmul(t, t.constant(x), t.parameter(w))); };
  NdArray* params[] = {&w};
  CHECK(grad_check(loss, params).max_relative_error < 1e-6);
}

TEST_CASE("grad_check on a single attention head over 5x8 states") {
  Rng rng(19);
  NdArray states = random_array({5, 8}, rng, 0.5);
  NdArray wq = random_array({8, 8}, rng, 0.3), wk = random_array({8, 8}, rng, 0.3), wv = random_array({8, 8}, rng, 0.3);
  const auto probe = random_array({8, 1}, rng);
  auto loss = [&](Tape& t) {
    Var h = t.parameter(states);
    Var q = matmul(t, h, t.parameter(wq));
    Var k = matmul(t, h, t.parameter(wk));
    Var v = matmul(t, h, t.parameter(wv));
    Var a = softmax_rows(t, scale(t, matmul_bt(t, q, k), 1.0 / std::sqrt(8.0)));
    Var o = matmul(t, a, v);
    return sum_squares(t, matmul(t, o, t.constant(probe)));
  };
  NdArray* params[] = {&states, &wq, &wk, &wv};
  CHECK(grad_check(loss, params).max_relative_error < 1e-4);
}

TEST_CASE("every differentiable primitive passes grad_check") {
  Rng rng(23);
  NdArray a = random_array({3, 4}, rng), b = random_array({3, 4}, rng);
  NdArray bias = random_array({4}, rng), gain = random_array({4}, rng), shift = random_array({4}, rng);
  const auto w = random_array({4, 1}, rng);
  auto check = [&](const LossBuilder& f, std::vector<NdArray*> ps) {
    const auto r = grad_check(f, ps);
    CHECK(r.max_relative_error < 1e-3);
  };
  auto reduce = [&](Tape& t, Var x) { return sum_squares(t, matmul(t, x, t.constant(w))); };
  check([&](Tape& t) { return reduce(t, add(t, t.parameter(a), t.parameter(b))); }, {&a, &b});
  check([&](Tape& t) { return reduce(t, add_bias(t, t.parameter(a), t.parameter(bias))); }, {&a, &bias});
  check([&](Tape& t) { return reduce(t, gelu(t, t.parameter(a))); }, {&a});
  check([&](Tape& t) { return reduce(t, scale(t, t.parameter(a), -1.7)); }, {&a});
  check([&](Tape& t) { return reduce(t, layer_norm(t, t.parameter(a), t.parameter(gain), t.parameter(shift))); },
        {&a, &gain, &shift});
  const std::vector<std::size_t> rows{2, 0, 2};
  check([&](Tape& t) { return reduce(t, gather_rows(t, t.parameter(a), rows)); }, {&a});
  check([&](Tape& t) { return reduce(t, slice_rows(t, t.parameter(a), 1, 2)); }, {&a});
  check(
      [&](Tape& t) {
        Var l = slice_cols(t, t.parameter(a), 0, 2);
        Var r = slice_cols(t, t.parameter(b), 2, 2);
        const Var parts[] = {l, r};
        return reduce(t, concat_cols(t, parts));
      },
      {&a, &b});
  check([&](Tape& t) { return sum_squares(t, matmul_bt(t, t.parameter(a), t.parameter(b))); }, {&a, &b});
}

TEST_CASE("unreachable parameters receive exactly zero gradient") {
  Rng rng(29);
  NdArray used = random_array({2, 2}, rng), unused = random_array({2, 2}, rng);
  Tape t;
  Var u = t.parameter(used);
  t.parameter(unused);
  t.backward(sum_squares(t, u));
  CHECK(used.grad()[0] != 0.0);
  for (double g : unused.grad()) CHECK(g == 0.0);
}

TEST_CASE("grad_check rejects a non-finite loss") {
  NdArray x(Shape{1, 2}, 1.0);
  auto loss = [&](Tape& t) { return t.push(NdArray(Shape{1}, NAN), nullptr); };
  NdArray* params[] = {&x};
  CHECK_THROWS_AS(grad_check(loss, params), NumericError);
}

TEST_CASE("dropout is the identity at rate zero and deterministic per seed") {
  Rng rng(31);
  const auto x = random_array({4, 6}, rng);
  Tape t;
  Rng r0(1);
  CHECK(t.value(dropout(t, t.constant(x), 0.0, r0)) == x);
  Rng r1(9), r2(9);
  CHECK(t.value(dropout(t, t.constant(x), 0.3, r1)) == t.value(dropout(t, t.constant(x), 0.3, r2)));
}

TEST_CASE("layer norm output has zero mean and unit variance per row") {
  Rng rng(37);
  const auto x = random_array({5, 16}, rng, 3.0);
  Tape t;
  Var y = layer_norm(t, t.constant(x), t.constant(NdArray(Shape{16}, 1.0)), t.constant(NdArray(Shape{16}, 0.0)));
  const auto& v = t.value(y);
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (double e : v.row(r)) mean += e / 16.0;
    for (double e : v.row(r)) var += (e - mean) * (e - mean) / 16.0;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}
