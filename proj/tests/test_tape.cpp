#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "dve/rng.hpp"
#include "dve/sparse.hpp"
#include "dve/tape.hpp"
#include "testutil.hpp"

using namespace dve;

namespace {

// Backprop vs central differences for a scalar loss built from one leaf.
template <class Build>
void check_gradient(const Tensor& x, Build build, double tol = 1e-6) {
  auto f = [&](const Tensor& v) {
    Tape t;
    return t.value(build(t, t.leaf(v, true)))(0, 0);
  };
  Tape t;
  const NodeId xi = t.leaf(x, true);
  const NodeId loss = build(t, xi);
  t.backward(loss);
  const Tensor fd = testutil::fd_gradient(f, x);
  REQUIRE(testutil::grad_error(t.grad(xi), fd) < tol);
}

}  // namespace

TEST_CASE("pointwise forward values") {
  Tape t;
  const NodeId x = t.leaf(Tensor::from({{0.0, 1.0, -2.0}}));
  REQUIRE(t.value(t.exp(x))(0, 1) == Catch::Approx(std::exp(1.0)).epsilon(1e-15));
  REQUIRE(t.value(t.relu(x))(0, 2) == 0.0);
  REQUIRE(t.value(t.relu(x))(0, 1) == 1.0);
  REQUIRE(t.value(t.sigmoid(x))(0, 0) == 0.5);
  REQUIRE(t.value(t.log_sigmoid(x))(0, 0) == Catch::Approx(-std::log(2.0)).epsilon(1e-15));
  REQUIRE(t.value(t.square(x))(0, 2) == 4.0);
  REQUIRE(t.value(t.clamp(x, -1.0, 0.5))(0, 2) == -1.0);
  REQUIRE(t.value(t.clamp(x, -1.0, 0.5))(0, 1) == 0.5);
  REQUIRE(t.value(t.scalar_mul(x, -3.0))(0, 1) == -3.0);
}

TEST_CASE("saturating inputs stay finite") {
  Tape t;
  const NodeId x = t.leaf(Tensor::from({{1000.0, -1000.0}}));
  const Tensor sig = t.value(t.sigmoid(x));
  REQUIRE(sig(0, 0) == 1.0);
  REQUIRE(sig(0, 1) >= 0.0);
  const Tensor ls = t.value(t.log_sigmoid(x));
  REQUIRE(ls(0, 0) == 0.0);
  REQUIRE(ls(0, 1) == -1000.0);
}

TEST_CASE("sum and mean reductions") {
  Tape t;
  const NodeId x = t.leaf(Tensor::from({{1, 2}, {3, 4}}), true);
  REQUIRE(t.value(t.sum(x))(0, 0) == 10.0);
  REQUIRE(t.value(t.mean(x))(0, 0) == 2.5);
  const NodeId m = t.mean(x);
  t.backward(m);
  REQUIRE(t.grad(x)(1, 1) == 0.25);
}

TEST_CASE("matmul gradients match finite differences") {
  Rng rng(41);
  const Tensor a = testutil::random_tensor(rng, 4, 6);
  const Tensor b = testutil::random_tensor(rng, 6, 3);
  const Tensor w = testutil::random_tensor(rng, 4, 3);
  check_gradient(a, [&](Tape& t, NodeId x) {
    return t.sum(t.ew_mul(t.matmul(x, t.leaf(b)), t.leaf(w)));
  });
  check_gradient(b, [&](Tape& t, NodeId x) {
    return t.sum(t.ew_mul(t.matmul(t.leaf(a), x), t.leaf(w)));
  });
}

TEST_CASE("spmm gradients match finite differences") {
  Rng rng(43);
  const SparseMatrix s = SparseMatrix::from_coo(
      4, 5,
      {{0, 1, 0.7}, {0, 4, -1.2}, {1, 0, 2.0}, {2, 2, 0.5}, {2, 3, 1.5}, {3, 4, -0.3}});
  const Tensor d = testutil::random_tensor(rng, 5, 3);
  const Tensor w = testutil::random_tensor(rng, 4, 3);
  check_gradient(d, [&](Tape& t, NodeId x) {
    return t.sum(t.ew_mul(t.spmm_const(&s, x), t.leaf(w)));
  });
}

TEST_CASE("pointwise gradients match finite differences") {
  Rng rng(47);
  const Tensor x = testutil::random_tensor(rng, 3, 4, 0.2, 1.8);
  const Tensor y = testutil::random_tensor(rng, 3, 4);
  const Tensor w = testutil::random_tensor(rng, 3, 4);
  auto weighted = [&](Tape& t, NodeId v) { return t.sum(t.ew_mul(v, t.leaf(w))); };

  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.exp(v)); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.square(v)); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.sigmoid(v)); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.log_sigmoid(v)); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.scalar_mul(v, -2.5)); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.add(v, t.leaf(y))); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.sub(t.leaf(y), v)); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.ew_mul(v, t.leaf(y))); });
  // inputs are in [0.2, 1.8], away from the relu kink and these clamp edges
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.relu(v)); });
  check_gradient(x, [&](Tape& t, NodeId v) { return weighted(t, t.clamp(v, 0.0, 1.0)); });
}

TEST_CASE("clamp gradient is an inside indicator") {
  Tape t;
  const NodeId x = t.leaf(Tensor::from({{-2.0, 0.3, 2.0}}), true);
  t.backward(t.sum(t.clamp(x, -1.0, 1.0)));
  REQUIRE(t.grad(x)(0, 0) == 0.0);
  REQUIRE(t.grad(x)(0, 1) == 1.0);
  REQUIRE(t.grad(x)(0, 2) == 0.0);
}

TEST_CASE("row_gather forwards and accumulates duplicates") {
  Tape t;
  const NodeId x = t.leaf(Tensor::from({{1, 2}, {3, 4}}), true);
  const NodeId g = t.row_gather(x, {0, 0, 1});
  REQUIRE(t.value(g).rows == 3);
  REQUIRE(t.value(g)(1, 1) == 2.0);
  REQUIRE(t.value(g)(2, 0) == 3.0);
  t.backward(t.sum(g));
  REQUIRE(t.grad(x)(0, 0) == 2.0);  // row 0 gathered twice
  REQUIRE(t.grad(x)(1, 0) == 1.0);

  Tape t2;
  const NodeId y = t2.leaf(Tensor::from({{1, 2}}));
  REQUIRE_THROWS_AS(t2.row_gather(y, {1}), ValidationError);
}

TEST_CASE("row_gather gradient matches finite differences") {
  Rng rng(53);
  const Tensor x = testutil::random_tensor(rng, 5, 3);
  const Tensor w = testutil::random_tensor(rng, 4, 3);
  check_gradient(x, [&](Tape& t, NodeId v) {
    return t.sum(t.ew_mul(t.row_gather(v, {2, 0, 2, 4}), t.leaf(w)));
  });
}

TEST_CASE("concat_cols forwards and routes gradients") {
  Rng rng(59);
  const Tensor a = testutil::random_tensor(rng, 3, 2);
  const Tensor b = testutil::random_tensor(rng, 3, 4);
  const Tensor w = testutil::random_tensor(rng, 3, 6);
  {
    Tape t;
    const NodeId c = t.concat_cols(t.leaf(a), t.leaf(b));
    REQUIRE(t.value(c).cols == 6);
    REQUIRE(t.value(c)(1, 0) == a(1, 0));
    REQUIRE(t.value(c)(1, 5) == b(1, 3));
  }
  check_gradient(a, [&](Tape& t, NodeId v) {
    return t.sum(t.ew_mul(t.concat_cols(v, t.leaf(b)), t.leaf(w)));
  });
  check_gradient(b, [&](Tape& t, NodeId v) {
    return t.sum(t.ew_mul(t.concat_cols(t.leaf(a), v), t.leaf(w)));
  });
}

TEST_CASE("a small mlp backprops end to end") {
  Rng rng(61);
  const Tensor x = testutil::random_tensor(rng, 6, 4);
  const Tensor w1 = testutil::random_tensor(rng, 4, 5);
  const Tensor w2 = testutil::random_tensor(rng, 5, 1);
  Tensor y(6, 1);
  for (std::int64_t i = 0; i < 6; ++i) y(i, 0) = i % 2;
  Tensor y_flip = y;
  for (double& v : y_flip.data) v = 1.0 - v;

  auto build = [&](Tape& t, NodeId w1n) {
    const NodeId h = t.relu(t.matmul(t.leaf(x), w1n));
    const NodeId logit = t.matmul(h, t.leaf(w2));
    const NodeId ll = t.add(t.ew_mul(t.leaf(y), t.log_sigmoid(logit)),
                            t.ew_mul(t.leaf(y_flip), t.log_sigmoid(t.scalar_mul(logit, -1.0))));
    return t.scalar_mul(t.mean(ll), -1.0);
  };
  check_gradient(w1, build, 1e-5);
}

TEST_CASE("non-finite results name the producing op") {
  Tape t;
  const NodeId x = t.leaf(Tensor::from({{1000.0}}));
  REQUIRE_THROWS_WITH(t.exp(x), Catch::Matchers::ContainsSubstring("exp"));
  Tensor bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(t.leaf(bad), NumericError);
}

TEST_CASE("constants stay outside the gradient flow") {
  Tape t;
  const NodeId c = t.leaf(Tensor::from({{1.0, 2.0}}));
  const NodeId x = t.leaf(Tensor::from({{3.0, 4.0}}), true);
  const NodeId loss = t.sum(t.ew_mul(x, c));
  REQUIRE(!t.needs_grad(c));
  REQUIRE(t.needs_grad(loss));
  t.backward(loss);
  REQUIRE(t.grad(c)(0, 0) == 0.0);
  REQUIRE(t.grad(x)(0, 0) == 1.0);
  REQUIRE(t.grad(x)(0, 1) == 2.0);
}

TEST_CASE("backward twice gives the same gradients") {
  Rng rng(67);
  const Tensor x = testutil::random_tensor(rng, 3, 3);
  Tape t;
  const NodeId xi = t.leaf(x, true);
  const NodeId loss = t.mean(t.square(t.exp(xi)));
  t.backward(loss);
  const Tensor g1 = t.grad(xi);
  t.backward(loss);
  const Tensor g2 = t.grad(xi);
  REQUIRE(std::memcmp(g1.data.data(), g2.data.data(), g1.data.size() * sizeof(double)) == 0);
}

TEST_CASE("backward rejects non-scalar tips") {
  Tape t;
  const NodeId x = t.leaf(Tensor::from({{1.0, 2.0}}), true);
  REQUIRE_THROWS_AS(t.backward(x), ValidationError);
}

TEST_CASE("trainable leaves are enumerated in creation order") {
  Tape t;
  const NodeId a = t.leaf(Tensor(1, 1, 1.0), true);
  t.leaf(Tensor(1, 1, 2.0));
  const NodeId b = t.leaf(Tensor(1, 1, 3.0), true);
  const auto lvs = t.trainable_leaves();
  REQUIRE(lvs.size() == 2);
  REQUIRE(lvs[0] == a);
  REQUIRE(lvs[1] == b);
}
