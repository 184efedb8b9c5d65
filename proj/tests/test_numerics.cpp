#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "support/helpers.hpp"
#include "xglad/tensor.hpp"

using namespace xglad;
using testsupport::max_grad_rel_err;
using testsupport::random_tensor;

TEST_CASE("matmul forward") {
  const Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  const Tensor b = Tensor::from_rows({{2, 3}, {4, 5}});
  const Tensor prod = matmul(eye, b);
  CHECK(prod.at(0, 0) == 2);
  CHECK(prod.at(0, 1) == 3);
  CHECK(prod.at(1, 0) == 4);
  CHECK(prod.at(1, 1) == 5);

  const Tensor dot = matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}}));
  CHECK(dot.item() == 11);

  CHECK_THROWS_AS(matmul(Tensor(2, 3), Tensor(2, 3)), DimensionError);
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(7);
  Tensor a = random_tensor(3, 4, rng);
  Tensor b = random_tensor(4, 2, rng);
  const double err = max_grad_rel_err({a, b}, [&] { return sum_all(sigmoid(matmul(a, b))); });
  CHECK(err < 1e-6);
}

TEST_CASE("elementwise forward basics") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(relu(Tensor::scalar(-3.0)).item() == 0.0);
  CHECK(relu(Tensor::scalar(3.0)).item() == 3.0);
  CHECK(exp(Tensor::scalar(0.0)).item() == 1.0);
  CHECK(log(Tensor::scalar(1.0)).item() == 0.0);
  CHECK(scale(Tensor::scalar(3.0), -2.0).item() == -6.0);
  CHECK(softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::log(2.0)));

  CHECK_THROWS_AS(log(Tensor::scalar(0.0)), DomainError);
  CHECK_THROWS_AS(log(Tensor::scalar(-1.0)), DomainError);
  CHECK_THROWS_AS(add(Tensor(2, 2), Tensor(3, 2)), DimensionError);
}

TEST_CASE("row broadcast add/sub/mul") {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor b = Tensor::from_rows({{10, 20}});
  const Tensor s = add(a, b);
  CHECK(s.at(0, 0) == 11);
  CHECK(s.at(1, 1) == 24);
  const Tensor d = sub(a, b);
  CHECK(d.at(1, 0) == -7);
  const Tensor m = mul(a, b);
  CHECK(m.at(1, 1) == 80);
}

TEST_CASE("elementwise gradients match finite differences") {
  Rng rng(11);
  Tensor a = random_tensor(2, 2, rng);
  Tensor b = random_tensor(2, 2, rng);
  CHECK(max_grad_rel_err({a, b}, [&] { return sum_all(mul(a, b)); }) < 1e-6);
  CHECK(max_grad_rel_err({a, b}, [&] { return sum_all(sigmoid(sub(a, b))); }) < 1e-6);

  Tensor bias = random_tensor(1, 3, rng);
  Tensor x = random_tensor(4, 3, rng);
  CHECK(max_grad_rel_err({x, bias}, [&] { return sum_all(exp(add(x, bias))); }) < 1e-6);
  CHECK(max_grad_rel_err({x, bias}, [&] { return sum_all(mul(x, bias)); }) < 1e-6);

  Tensor pos = random_tensor(3, 3, rng, 0.2, 2.0);
  CHECK(max_grad_rel_err({pos}, [&] { return sum_all(log(pos)); }) < 1e-6);
  CHECK(max_grad_rel_err({pos}, [&] { return sum_all(softplus(scale(pos, 2.0))); }) < 1e-6);

  // relu and clamp away from their kinks
  Tensor off = random_tensor(3, 3, rng);
  for (double& v : off.values()) v += (v >= 0.0 ? 0.5 : -0.5);
  CHECK(max_grad_rel_err({off}, [&] { return sum_all(relu(off)); }) < 1e-6);
  CHECK(max_grad_rel_err({off}, [&] { return sum_all(clamp(off, -20.0, 20.0)); }) < 1e-6);
}

TEST_CASE("clamp forward and gradient blocking") {
  const Tensor t = Tensor::from_rows({{-2.0, 0.5, 3.0}});
  const Tensor c = clamp(t, 0.0, 1.0);
  CHECK(c.at(0, 0) == 0.0);
  CHECK(c.at(0, 1) == 0.5);
  CHECK(c.at(0, 2) == 1.0);

  Tensor p = Tensor::from_rows({{-2.0, 0.5, 3.0}});
  p.set_requires_grad(true);
  {
    Tape tape;
    tape.backward(sum_all(clamp(p, 0.0, 1.0)));
  }
  CHECK(p.grad()[0] == 0.0);
  CHECK(p.grad()[1] == 1.0);
  CHECK(p.grad()[2] == 0.0);
}

TEST_CASE("segment_reduce forward") {
  const Tensor x = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor mean = segment_reduce(x, {0, 0}, ReduceMode::mean, 1);
  CHECK(mean.at(0, 0) == 2);
  CHECK(mean.at(0, 1) == 3);

  const Tensor y = Tensor::from_rows({{1}, {2}, {3}});
  const Tensor sum = segment_reduce(y, {0, 1, 1}, ReduceMode::sum, 2);
  CHECK(sum.at(0, 0) == 1);
  CHECK(sum.at(1, 0) == 5);

  const Tensor holes = segment_reduce(y, {0, 2, 2}, ReduceMode::sum, 3);
  CHECK(holes.at(1, 0) == 0.0);  // empty segment stays a zero row

  CHECK_THROWS_AS(segment_reduce(y, {0, 1, 5}, ReduceMode::sum, 2), IndexError);
  CHECK_THROWS_AS(segment_reduce(y, {0, 1}, ReduceMode::sum, 2), DimensionError);
}

TEST_CASE("segment_reduce is linear in its input") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng_int(rng, 1, 12);
    const int segs = rng_int(rng, 1, 5);
    std::vector<int> ids(static_cast<std::size_t>(n));
    for (int& id : ids) id = rng_int(rng, 0, segs - 1);
    const Tensor x = random_tensor(n, 3, rng);
    const Tensor y = random_tensor(n, 3, rng);
    const Tensor lhs = segment_reduce(add(x, y), ids, ReduceMode::sum, segs);
    const Tensor rhs = add(segment_reduce(x, ids, ReduceMode::sum, segs),
                           segment_reduce(y, ids, ReduceMode::sum, segs));
    for (std::size_t i = 0; i < lhs.size(); ++i)
      CHECK(lhs.values()[i] == doctest::Approx(rhs.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("segment/gather/row ops gradients") {
  Rng rng(23);
  Tensor x = random_tensor(5, 3, rng);
  const std::vector<int> segs{0, 1, 0, 2, 1};
  CHECK(max_grad_rel_err({x}, [&] {
          return sum_all(sigmoid(segment_reduce(x, segs, ReduceMode::sum, 3)));
        }) < 1e-6);
  CHECK(max_grad_rel_err({x}, [&] {
          return sum_all(sigmoid(segment_reduce(x, segs, ReduceMode::mean, 3)));
        }) < 1e-6);
  const std::vector<int> idx{4, 0, 0, 2};
  CHECK(max_grad_rel_err({x}, [&] { return sum_all(sigmoid(gather_rows(x, idx))); }) < 1e-6);
  CHECK(max_grad_rel_err({x}, [&] { return sum_all(sigmoid(row_sum(x))); }) < 1e-6);
  CHECK(max_grad_rel_err({x}, [&] { return sum_all(sigmoid(transpose(x))); }) < 1e-6);

  Tensor s = random_tensor(5, 1, rng);
  CHECK(max_grad_rel_err({x, s}, [&] { return sum_all(sigmoid(scale_rows(x, s))); }) < 1e-6);
}

TEST_CASE("cosine_similarity forward") {
  CHECK(cosine_similarity(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{1, 0}}), true).item() ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(Tensor::from_rows({{1, 0}}), Tensor::from_rows({{0, 1}}), true).item() ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_similarity(Tensor::from_rows({{1, 1}}), Tensor::from_rows({{2, 2}}), true).item() ==
        doctest::Approx(1.0).epsilon(1e-12));

  // column vectors work too
  CHECK(cosine_similarity(Tensor::from_rows({{1}, {1}}), Tensor::from_rows({{2}, {2}}), true)
            .item() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(cosine_similarity(Tensor(1, 2), Tensor::from_rows({{1, 0}}), true),
                  DegenerateInputError);
  // padded mode maps a zero vector to similarity 0
  CHECK(cosine_similarity(Tensor(1, 2), Tensor::from_rows({{1, 0}})).item() == 0.0);
}

TEST_CASE("cosine scale invariance property") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = random_tensor(1, 6, rng);
    a.values()[0] += 1.0;  // keep the norm bounded away from zero
    const double c = rng_uniform(rng, 0.1, 9.0);
    const Tensor b = scale(a, c);
    CHECK(cosine_similarity(a, b, true).item() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("cosine gradients match finite differences") {
  Rng rng(29);
  Tensor a = random_tensor(1, 5, rng, 0.2, 1.0);
  Tensor b = random_tensor(1, 5, rng, -1.0, -0.2);
  CHECK(max_grad_rel_err({a, b}, [&] { return cosine_similarity(a, b); }) < 1e-6);

  Tensor ma = random_tensor(3, 4, rng);
  Tensor mb = random_tensor(2, 4, rng);
  CHECK(max_grad_rel_err({ma, mb}, [&] { return sum_all(sigmoid(cosine_matrix(ma, mb))); }) <
        1e-6);
}

TEST_CASE("cosine_matrix agrees with cosine_similarity entrywise") {
  Rng rng(31);
  const Tensor a = random_tensor(4, 3, rng);
  const Tensor b = random_tensor(5, 3, rng);
  const Tensor m = cosine_matrix(a, b);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) {
      const Tensor ai = gather_rows(a, {i});
      const Tensor bj = gather_rows(b, {j});
      CHECK(m.at(i, j) == doctest::Approx(cosine_similarity(ai, bj).item()).epsilon(1e-12));
    }
}

TEST_CASE("backward basics") {
  Tensor w = Tensor::from_rows({{1, -2}, {3, 4}});
  w.set_requires_grad(true);
  {
    Tape tape;
    tape.backward(sum_all(w));
  }
  for (double g : w.grad()) CHECK(g == 1.0);

  w.zero_grad();
  {
    Tape tape;
    tape.backward(sum_all(mul(w, w)));  // ||W||^2
  }
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w.grad()[i] == 2.0 * w.values()[i]);

  {
    Tape tape;
    const Tensor y = mul(w, w);
    CHECK_THROWS_AS(tape.backward(y), UsageError);  // non-scalar
  }
  {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), UsageError);  // not recorded
  }
}

TEST_CASE("gradient accumulates once per use") {
  Tensor w = Tensor::scalar(3.0);
  w.set_requires_grad(true);
  {
    Tape tape;
    tape.backward(mul(w, w));  // d/dw w^2 = 2w, w used twice
  }
  CHECK(w.grad()[0] == 6.0);
}

TEST_CASE("no recording without an active tape") {
  Tensor w = Tensor::scalar(2.0);
  w.set_requires_grad(true);
  const Tensor y = mul(w, w);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("finite outputs on finite inputs") {
  Rng rng(41);
  const Tensor x = random_tensor(6, 6, rng, -3.0, 3.0);
  CHECK(sigmoid(x).all_finite());
  CHECK(exp(x).all_finite());
  CHECK(softplus(x).all_finite());
  CHECK(matmul(x, x).all_finite());
  CHECK(cosine_matrix(x, x).all_finite());
}
