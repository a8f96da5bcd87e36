#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <vector>

#include "granger/rng.hpp"
#include "granger/tensor.hpp"
#include "oracles.hpp"

using granger::Rng;
using granger::Shape;
using granger::Tape;
using granger::Tensor;

namespace {

Tensor rand_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0,
                   bool requires_grad = true) {
  std::vector<double> v(granger::shape_size(s));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_vector(std::move(s), std::move(v), requires_grad);
}

// Gradchecks d(sum(build() * w))/d(leaves) with a fixed random weighting so
// every output element contributes a distinct gradient signal.
double op_gradcheck(const std::function<Tensor()>& build,
                    std::vector<Tensor> leaves, const Shape& out_shape,
                    Rng& rng) {
  Tensor w = rand_tensor(out_shape, rng, -1.0, 1.0, false);
  auto fwd = [build, w]() {
    Tape tape;
    Tensor loss = granger::sum(granger::mul(build(), w));
    tape.backward(loss);
    return loss.item();
  };
  return oracle::gradcheck(fwd, std::move(leaves));
}

}  // namespace

TEST_CASE("elementwise closed forms") {
  Tensor z = Tensor::scalar(0.0);
  CHECK(granger::sigmoid(z).item() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(granger::softplus(z).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor a = Tensor::from_vector({2}, {1.0, 2.0});
  Tensor b = Tensor::from_vector({2}, {3.0, 4.0});
  Tensor s = granger::add(a, b);
  CHECK(s.at({0}) == 4.0);
  CHECK(s.at({1}) == 6.0);

  Tensor g = granger::gelu(Tensor::scalar(0.0));
  CHECK(g.item() == 0.0);
}

TEST_CASE("elementwise dispatcher routes every kind") {
  Tensor a = Tensor::from_vector({2}, {0.25, 1.5});
  Tensor b = Tensor::from_vector({2}, {2.0, 3.0});
  using granger::OpKind;
  CHECK(granger::elementwise(OpKind::kAdd, a, &b).at({0}) == 2.25);
  CHECK(granger::elementwise(OpKind::kSub, a, &b).at({1}) == -1.5);
  CHECK(granger::elementwise(OpKind::kMul, a, &b).at({0}) == 0.5);
  CHECK(granger::elementwise(OpKind::kDiv, a, &b).at({1}) == 0.5);
  CHECK(granger::elementwise(OpKind::kNeg, a).at({0}) == -0.25);
  CHECK(granger::elementwise(OpKind::kExp, a).at({0}) ==
        doctest::Approx(std::exp(0.25)));
  CHECK(granger::elementwise(OpKind::kLog, a).at({1}) ==
        doctest::Approx(std::log(1.5)));
  CHECK(granger::elementwise(OpKind::kSquare, a).at({1}) == 2.25);
  CHECK(granger::elementwise(OpKind::kSqrt, a).at({0}) == 0.5);
  CHECK(granger::elementwise(OpKind::kSigmoid, Tensor::scalar(0.0)).item() ==
        0.5);
  CHECK(granger::elementwise(OpKind::kSoftplus, Tensor::scalar(0.0)).item() ==
        doctest::Approx(std::log(2.0)));
  CHECK(granger::elementwise(OpKind::kGelu, Tensor::scalar(0.0)).item() == 0.0);
  CHECK_THROWS_AS(granger::elementwise(OpKind::kAdd, a),
                  std::invalid_argument);
}

TEST_CASE("matmul agrees with hand arithmetic and the naive oracle") {
  Tensor eye = Tensor::from_vector({3, 3},
                                   {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(11);
  Tensor m = rand_tensor({3, 3}, rng);
  Tensor im = granger::matmul(eye, m);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(im.at({i, j}) == m.at({i, j}));

  Tensor a = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
  Tensor ones = Tensor::from_vector({2, 1}, {1, 1});
  Tensor r = granger::matmul(a, ones);
  CHECK(r.at({0, 0}) == 3.0);
  CHECK(r.at({1, 0}) == 7.0);

  for (auto [mm, kk, nn] : {std::tuple<std::size_t, std::size_t, std::size_t>{
                                4, 5, 3},
                            {8, 8, 8},
                            {1, 7, 2}}) {
    Tensor x = rand_tensor({mm, kk}, rng);
    Tensor y = rand_tensor({kk, nn}, rng);
    Tensor prod = granger::matmul(x, y);
    std::vector<double> ref = oracle::naive_matmul(
        {x.data().begin(), x.data().end()}, {y.data().begin(), y.data().end()},
        mm, kk, nn);
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(std::abs(prod.data()[i] - ref[i]) < 1e-12);
  }
}

TEST_CASE("batched matmul broadcasts leading axes") {
  Rng rng(3);
  Tensor a = rand_tensor({2, 3, 4}, rng);
  Tensor b = rand_tensor({4, 2}, rng);
  Tensor c = granger::matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 3, 2});
  for (std::size_t batch = 0; batch < 2; ++batch) {
    std::vector<double> sub(a.data().begin() + batch * 12,
                            a.data().begin() + (batch + 1) * 12);
    auto ref = oracle::naive_matmul(sub, {b.data().begin(), b.data().end()},
                                    3, 4, 2);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        CHECK(c.at({batch, i, j}) == doctest::Approx(ref[i * 2 + j]).epsilon(1e-14));
  }
}

TEST_CASE("softmax values") {
  Tensor t = granger::softmax_lastdim(Tensor::from_vector({2}, {0.0, 0.0}));
  CHECK(t.at({0}) == 0.5);
  CHECK(t.at({1}) == 0.5);

  double ninf = -std::numeric_limits<double>::infinity();
  Tensor u = granger::softmax_lastdim(Tensor::from_vector({2}, {1.7, ninf}));
  CHECK(u.at({0}) == 1.0);
  CHECK(u.at({1}) == 0.0);

  // Reference computed at extended precision.
  Tensor v = granger::softmax_lastdim(Tensor::from_vector({3}, {1.0, 2.0, 3.0}));
  long double e1 = expl(1.0L), e2 = expl(2.0L), e3 = expl(3.0L);
  long double z = e1 + e2 + e3;
  CHECK(v.at({0}) == doctest::Approx(static_cast<double>(e1 / z)).epsilon(1e-14));
  CHECK(v.at({1}) == doctest::Approx(static_cast<double>(e2 / z)).epsilon(1e-14));
  CHECK(v.at({2}) == doctest::Approx(static_cast<double>(e3 / z)).epsilon(1e-14));

  Rng rng(5);
  Tensor big = rand_tensor({6, 9}, rng, -30.0, 30.0, false);
  Tensor sm = granger::softmax_lastdim(big);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      double p = sm.at({r, i});
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      s += p;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("layer_norm standardizes rows") {
  Tensor gain = Tensor::full({4}, 1.0);
  Tensor bias = Tensor::zeros({4});

  Tensor constant = granger::layer_norm(Tensor::full({4}, 3.5), gain, bias);
  for (std::size_t i = 0; i < 4; ++i) CHECK(constant.at({i}) == 0.0);

  Tensor pm = granger::layer_norm(
      Tensor::from_vector({2}, {1.0, -1.0}), Tensor::full({2}, 1.0),
      Tensor::zeros({2}), 1e-12);
  CHECK(pm.at({0}) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(pm.at({1}) == doctest::Approx(-1.0).epsilon(1e-6));

  Rng rng(17);
  Tensor x = rand_tensor({5, 16}, rng, -3.0, 7.0, false);
  Tensor y = granger::layer_norm(x, Tensor::full({16}, 1.0),
                                 Tensor::zeros({16}), 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 16; ++i) mean += y.at({r, i});
    mean /= 16.0;
    for (std::size_t i = 0; i < 16; ++i) {
      double d = y.at({r, i}) - mean;
      var += d * d;
    }
    var /= 16.0;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-9);
  }
}

TEST_CASE("dropout") {
  Rng rng(23);
  Tensor x = rand_tensor({64}, rng);

  SUBCASE("rate 0 is identity in both modes") {
    Rng r2(1);
    Tensor y = granger::dropout(x, 0.0, true, r2);
    for (std::size_t i = 0; i < 64; ++i) CHECK(y.at({i}) == x.at({i}));
  }
  SUBCASE("eval mode is identity at any rate") {
    Rng r2(1);
    Tensor y = granger::dropout(x, 0.9, false, r2);
    for (std::size_t i = 0; i < 64; ++i) CHECK(y.at({i}) == x.at({i}));
  }
  SUBCASE("survivor fraction matches the rate") {
    Rng r2(99);
    Tensor big = Tensor::full({1000000}, 1.0);
    Tensor y = granger::dropout(big, 0.5, true, r2);
    std::size_t survivors = 0;
    for (double v : y.data())
      if (v != 0.0) ++survivors;
    double frac = static_cast<double>(survivors) / 1e6;
    CHECK(std::abs(frac - 0.5) < 0.005);
    for (double v : y.data()) CHECK((v == 0.0 || v == 2.0));
  }
  SUBCASE("rate outside [0,1) rejected") {
    Rng r2(1);
    CHECK_THROWS_AS(granger::dropout(x, 1.0, true, r2), granger::DomainError);
    CHECK_THROWS_AS(granger::dropout(x, -0.1, true, r2), granger::DomainError);
  }
}

TEST_CASE("backward closed forms") {
  Tensor x = Tensor::from_vector({}, {3.0}, true);
  {
    Tape tape;
    Tensor y = granger::square(x);
    tape.backward(y);
  }
  CHECK(x.grad()[0] == 6.0);

  Tensor z = Tensor::from_vector({}, {0.0}, true);
  {
    Tape tape;
    Tensor y = granger::sigmoid(z);
    tape.backward(y);
  }
  CHECK(z.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("gradient accumulation is additive") {
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0}, true);
  {
    Tape tape;
    Tensor loss = granger::sum(granger::add(x, x));
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 2.0);

  // A second pass without zero_grad adds on top.
  {
    Tape tape;
    Tensor loss = granger::sum(x);
    tape.backward(loss);
  }
  CHECK(x.grad()[0] == 3.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("tape misuse is rejected") {
  Tensor x = Tensor::from_vector({2}, {1.0, 2.0}, true);

  {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(0.0)), granger::TapeError);
  }
  {
    Tape tape;
    Tensor y = granger::sum(granger::square(x));
    tape.backward(y);
    CHECK_THROWS_AS(tape.backward(y), granger::TapeError);
  }
  {
    Tape tape;
    Tensor y = granger::square(x);  // shape {2}, not scalar
    CHECK_THROWS_AS(tape.backward(y), granger::ShapeError);
  }
}

TEST_CASE("shape errors carry both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  try {
    granger::add(a, b);
    FAIL("expected ShapeError");
  } catch (const granger::ShapeError& e) {
    CHECK(e.lhs() == Shape{2, 3});
    CHECK(e.rhs() == Shape{4, 5});
  }
  CHECK_THROWS_AS(granger::matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})),
                  granger::ShapeError);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(granger::log(Tensor::scalar(0.0)), granger::DomainError);
  CHECK_THROWS_AS(granger::log(Tensor::scalar(-1.0)), granger::DomainError);
  CHECK_THROWS_AS(granger::sqrt(Tensor::scalar(-1.0)), granger::DomainError);
  double ninf = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(
      granger::softmax_lastdim(Tensor::from_vector({2}, {ninf, ninf})),
      granger::DomainError);
}

TEST_CASE("gradients match central finite differences for every op") {
  Rng rng(1234);

  SUBCASE("add with broadcast") {
    Tensor a = rand_tensor({2, 3}, rng), b = rand_tensor({3}, rng);
    double e = op_gradcheck([=] { return granger::add(a, b); }, {a, b},
                            {2, 3}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("sub") {
    Tensor a = rand_tensor({4}, rng), b = rand_tensor({4}, rng);
    double e = op_gradcheck([=] { return granger::sub(a, b); }, {a, b}, {4},
                            rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("mul with scalar broadcast") {
    Tensor a = rand_tensor({2, 2}, rng), b = rand_tensor({}, rng);
    double e = op_gradcheck([=] { return granger::mul(a, b); }, {a, b},
                            {2, 2}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("div") {
    Tensor a = rand_tensor({3, 2}, rng);
    Tensor b = rand_tensor({2}, rng, 0.5, 1.5);
    double e = op_gradcheck([=] { return granger::div(a, b); }, {a, b},
                            {3, 2}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("neg exp sigmoid softplus gelu square") {
    for (auto kind : {granger::OpKind::kNeg, granger::OpKind::kExp,
                      granger::OpKind::kSigmoid, granger::OpKind::kSoftplus,
                      granger::OpKind::kGelu, granger::OpKind::kSquare}) {
      Tensor a = rand_tensor({3, 3}, rng, -2.0, 2.0);
      double e = op_gradcheck(
          [=] { return granger::elementwise(kind, a); }, {a}, {3, 3}, rng);
      CHECK(e < 1e-4);
    }
  }
  SUBCASE("log and sqrt on positive inputs") {
    Tensor a = rand_tensor({5}, rng, 0.5, 2.0);
    CHECK(op_gradcheck([=] { return granger::log(a); }, {a}, {5}, rng) < 1e-4);
    Tensor b = rand_tensor({5}, rng, 0.5, 2.0);
    CHECK(op_gradcheck([=] { return granger::sqrt(b); }, {b}, {5}, rng) < 1e-4);
  }
  SUBCASE("matmul") {
    Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
    double e = op_gradcheck([=] { return granger::matmul(a, b); }, {a, b},
                            {3, 2}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("matmul batched broadcast") {
    Tensor a = rand_tensor({2, 3, 4}, rng), b = rand_tensor({4, 2}, rng);
    double e = op_gradcheck([=] { return granger::matmul(a, b); }, {a, b},
                            {2, 3, 2}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("transpose_last2") {
    Tensor a = rand_tensor({2, 3, 4}, rng);
    double e = op_gradcheck([=] { return granger::transpose_last2(a); }, {a},
                            {2, 4, 3}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("reshape") {
    Tensor a = rand_tensor({2, 6}, rng);
    double e = op_gradcheck([=] { return granger::reshape(a, {3, 4}); }, {a},
                            {3, 4}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("slice_axis") {
    Tensor a = rand_tensor({2, 5, 3}, rng);
    double e = op_gradcheck([=] { return granger::slice_axis(a, 1, 1, 3); },
                            {a}, {2, 3, 3}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("concat_lastdim") {
    Tensor a = rand_tensor({2, 2}, rng), b = rand_tensor({2, 3}, rng);
    double e = op_gradcheck(
        [=] {
          std::vector<Tensor> parts{a, b};
          return granger::concat_lastdim(parts);
        },
        {a, b}, {2, 5}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("softmax_lastdim") {
    Tensor a = rand_tensor({3, 4}, rng, -2.0, 2.0);
    double e = op_gradcheck([=] { return granger::softmax_lastdim(a); }, {a},
                            {3, 4}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("layer_norm") {
    Tensor a = rand_tensor({3, 6}, rng);
    Tensor gain = rand_tensor({6}, rng, 0.5, 1.5);
    Tensor bias = rand_tensor({6}, rng);
    double e = op_gradcheck(
        [=] { return granger::layer_norm(a, gain, bias); }, {a, gain, bias},
        {3, 6}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("dropout with a replayed mask") {
    Tensor a = rand_tensor({4, 4}, rng);
    double e = op_gradcheck(
        [=] {
          Rng mask_rng(777);
          return granger::dropout(a, 0.4, true, mask_rng);
        },
        {a}, {4, 4}, rng);
    CHECK(e < 1e-4);
  }
  SUBCASE("sum and mean") {
    Tensor a = rand_tensor({3, 3}, rng);
    auto fwd_sum = [=] {
      Tape tape;
      Tensor loss = granger::sum(a);
      tape.backward(loss);
      return loss.item();
    };
    CHECK(oracle::gradcheck(fwd_sum, {a}) < 1e-4);
    Tensor b = rand_tensor({3, 3}, rng);
    auto fwd_mean = [=] {
      Tape tape;
      Tensor loss = granger::mean(b);
      tape.backward(loss);
      return loss.item();
    };
    CHECK(oracle::gradcheck(fwd_mean, {b}) < 1e-4);
  }
}

TEST_CASE("composite graph replays are bit-identical") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor a = rand_tensor({4, 4}, rng);
    Tensor b = rand_tensor({4, 4}, rng);
    Tensor g = Tensor::full({4}, 1.0, true);
    Tensor bias = Tensor::zeros({4}, true);
    Tape tape;
    Tensor h = granger::gelu(granger::matmul(a, b));
    Tensor n = granger::layer_norm(h, g, bias);
    Tensor loss = granger::mean(granger::square(n));
    tape.backward(loss);
    std::vector<double> record{loss.item()};
    for (const Tensor& t : {a, b, g, bias})
      record.insert(record.end(), t.grad().begin(), t.grad().end());
    return record;
  };
  auto r1 = run(42), r2 = run(42);
  REQUIRE(r1.size() == r2.size());
  CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
}

TEST_CASE("rng streams are independent and portable") {
  Rng root(1000);
  Rng d1 = root.stream("dropout");
  Rng s1 = root.stream("shuffle");
  // Consuming one stream leaves the other untouched.
  for (int i = 0; i < 100; ++i) d1.uniform();
  Rng s2 = root.stream("shuffle");
  for (int i = 0; i < 10; ++i) CHECK(s1.uniform() == s2.uniform());

  // Distinct labels give distinct sequences.
  CHECK(root.stream("a").next_u64() != root.stream("b").next_u64());

  // Normals have roughly the right moments.
  Rng n(7);
  double sum = 0.0, sq = 0.0;
  const int kDraws = 200000;
  for (int i = 0; i < kDraws; ++i) {
    double x = n.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / kDraws;
  double var = sq / kDraws - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}
