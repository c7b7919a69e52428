#include <cmath>
#include <vector>

#include "coneflow/dataset.hpp"
#include "coneflow/model.hpp"
#include "coneflow/rng.hpp"
#include "doctest.h"

using namespace coneflow;

namespace {

Dataset two_point() {
  std::vector<LabeledPoint> pts(2);
  pts[0].x = Eigen::Vector2d(1.0, 0.0);
  pts[0].y = 1;
  pts[1].x = Eigen::Vector2d(-0.8, 0.6);
  pts[1].y = -1;
  return Dataset::build(std::move(pts));
}

NetworkState single_neuron(double wx, double wy, double v, int tag) {
  NetworkState s;
  s.W = Eigen::MatrixXd(2, 1);
  s.W(0, 0) = wx;
  s.W(1, 0) = wy;
  s.v = Eigen::VectorXd(1);
  s.v[0] = v;
  s.sign_tags = {tag};
  return s;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("balanced init scales columns and mirrors norms into v") {
  Eigen::MatrixXd W0(2, 1);
  W0 << 3.0, 4.0;
  NetworkState s = init_balanced(W0, 0.1, {1});
  CHECK(s.W(0, 0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s.W(1, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s.v[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.eps == 0.1);
  CHECK(s.W0_col_max == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s.W0_col_min == doctest::Approx(5.0).epsilon(1e-15));

  CHECK_THROWS_AS(init_balanced(W0, 0.0, {1}), PreconditionError);
  CHECK_THROWS_AS(init_balanced(W0, 0.1, {1, 1}), PreconditionError);
  CHECK_THROWS_AS(init_balanced(W0, 0.1, {0}), PreconditionError);

  Eigen::MatrixXd Z(2, 1);
  Z.setZero();
  CHECK_THROWS_AS(init_balanced(Z, 0.1, {1}), DegenerateInputError);
}

TEST_CASE("balanced init has an exactly zero balance residual") {
  Rng rng(42);
  Eigen::MatrixXd W0(5, 12);
  for (int j = 0; j < W0.cols(); ++j)
    for (int d = 0; d < W0.rows(); ++d) W0(d, j) = rng.gaussian();
  std::vector<int> signs;
  for (int j = 0; j < 12; ++j) signs.push_back(j % 2 == 0 ? 1 : -1);
  NetworkState s = init_balanced(W0, 1e-8, signs);
  CHECK(balance_residual(s) == 0.0);  // construction, not approximation
  for (int j = 0; j < 12; ++j) {
    CHECK((s.v[j] > 0.0) == (signs[static_cast<std::size_t>(j)] > 0));
  }
}

TEST_CASE("gaussian init is deterministic in the seed") {
  NetworkState a = init_gaussian(3, 4, 1e-6, 99);
  NetworkState b = init_gaussian(3, 4, 1e-6, 99);
  CHECK((a.W.array() == b.W.array()).all());
  CHECK((a.v.array() == b.v.array()).all());
  NetworkState c = init_gaussian(3, 4, 1e-6, 100);
  CHECK(!(a.W.array() == c.W.array()).all());
  CHECK_THROWS_AS(init_gaussian(0, 4, 1e-6, 1), PreconditionError);
  CHECK_THROWS_AS(init_gaussian(3, 4, 0.0, 1), PreconditionError);
}

TEST_CASE("forward evaluates the two-layer ReLU sum") {
  NetworkState s = single_neuron(1.0, 0.0, 1.0, 1);
  CHECK(forward(s, Eigen::Vector2d(2.0, 5.0)) == doctest::Approx(2.0));
  CHECK(forward(s, Eigen::Vector2d(-2.0, 5.0)) == 0.0);

  // two neurons, mixed signs: 2*max(x0,0) - 0.5*max(x0+x1,0)
  NetworkState m;
  m.W = Eigen::MatrixXd(2, 2);
  m.W << 1.0, 1.0, 0.0, 1.0;
  m.v = Eigen::VectorXd(2);
  m.v << 2.0, -0.5;
  m.sign_tags = {1, -1};
  CHECK(forward(m, Eigen::Vector2d(3.0, 1.0)) ==
        doctest::Approx(2.0 * 3.0 - 0.5 * 4.0).epsilon(1e-15));
  CHECK(forward(m, Eigen::Vector2d(-1.0, 0.5)) == 0.0);

  // leaky slope applies on the negative side
  NetworkState lk = single_neuron(1.0, 0.0, 1.0, 1);
  lk.leaky_alpha = 0.25;
  CHECK(forward(lk, Eigen::Vector2d(-2.0, 5.0)) ==
        doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("scaling W and v by s scales the output by s^2") {
  Rng rng(7);
  NetworkState s;
  s.W = Eigen::MatrixXd(3, 5);
  s.v = Eigen::VectorXd(5);
  s.sign_tags.assign(5, 1);
  for (int j = 0; j < 5; ++j) {
    for (int d = 0; d < 3; ++d) s.W(d, j) = rng.gaussian();
    s.v[j] = rng.gaussian();
  }
  Eigen::Vector3d x(0.3, -0.2, 0.9);
  const double f1 = forward(s, x);
  NetworkState s2 = s;
  s2.W *= 3.0;
  s2.v *= 3.0;
  CHECK(forward(s2, x) == doctest::Approx(9.0 * f1).epsilon(1e-12));
}

TEST_CASE("loss values and derivatives match the closed forms") {
  CHECK(loss_value(1, 0.0, LossKind::exponential) == doctest::Approx(1.0));
  CHECK(loss_dyhat(1, 0.0, LossKind::exponential) == doctest::Approx(-1.0));
  CHECK(loss_value(-1, 0.5, LossKind::exponential) ==
        doctest::Approx(std::exp(0.5)).epsilon(1e-15));

  CHECK(loss_value(1, 0.0, LossKind::logistic) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(loss_dyhat(1, 0.0, LossKind::logistic) ==
        doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(loss_value(1, 0.0, LossKind::logistic_unscaled) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_dyhat(1, 0.0, LossKind::logistic_unscaled) ==
        doctest::Approx(-0.5).epsilon(1e-15));

  // large-argument stability: no overflow, correct saturation
  CHECK(loss_value(1, 500.0, LossKind::logistic) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::isfinite(loss_value(-1, 500.0, LossKind::logistic)));
  CHECK(loss_value(-1, 500.0, LossKind::logistic) ==
        doctest::Approx(1000.0).epsilon(1e-12));
}

TEST_CASE("derivative deviation check against hand-computed values") {
  // y=+1, yhat=0, exponential: derivative is exactly -y
  DerivBoundCheck a = loss_derivative_bound_check(1, 0.0, LossKind::exponential);
  CHECK(a.lhs == 0.0);
  CHECK(a.rhs == 0.0);

  // y=-1, yhat=0.5: |-(-1)e^{0.5} - (-1)| = e^{0.5} - 1
  DerivBoundCheck b =
      loss_derivative_bound_check(-1, 0.5, LossKind::exponential);
  CHECK(b.lhs == doctest::Approx(0.64872127070012819).epsilon(1e-15));
  CHECK(b.rhs == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b.lhs <= b.rhs);

  // y=+1, yhat=1, doubled logistic: |2/(1+e) * e - 1| = 2/(1+e^{-1}) - 1
  DerivBoundCheck c = loss_derivative_bound_check(1, 1.0, LossKind::logistic);
  CHECK(c.lhs == doctest::Approx(0.46211715726000979).epsilon(1e-14));
  CHECK(c.rhs == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c.lhs <= c.rhs);

  CHECK_THROWS_AS(loss_derivative_bound_check(1, 1.5, LossKind::exponential),
                  PreconditionError);
  CHECK_THROWS_AS(loss_derivative_bound_check(2, 0.5, LossKind::exponential),
                  PreconditionError);
}

TEST_CASE("gradients vanish exactly for dead neurons") {
  Dataset ds = two_point();
  // w points away from both x_1 and -x_2's activation side
  NetworkState s = single_neuron(-0.1, -1.0, 0.5, 1);
  // <x1,w> = -0.1, <x2,w> = 0.08 - 0.6 = ... check: (-0.8)(-0.1)+(0.6)(-1) = -0.52
  const LossGrads g = loss_and_grads(s, ds, LossKind::exponential);
  CHECK(g.gW.col(0).norm() == 0.0);
  CHECK(g.gv[0] == 0.0);
  CHECK(g.loss == doctest::Approx(2.0).epsilon(1e-15));  // e^0 + e^0
}

TEST_CASE("gradients at f=0 reduce to the signed data sum") {
  // single positive point, single active neuron with v=0 so f=0 but the
  // activation is strict: dL/dw = -y * x * v * 1 = 0, dL/dv = -y <x,w>
  std::vector<LabeledPoint> pts(1);
  pts[0].x = Eigen::Vector2d(2.0, 1.0);
  pts[0].y = 1;
  Dataset ds = Dataset::build(std::move(pts));

  NetworkState s = single_neuron(0.5, 0.25, 0.75, 1);
  const double yhat = forward(s, ds.x(0));  // 0.75 * 1.25
  const LossGrads g = loss_and_grads(s, ds, LossKind::exponential);
  const double lp = -std::exp(-yhat);  // d loss / d yhat at y=1
  CHECK(g.gW.col(0)(0) == doctest::Approx(lp * 0.75 * 2.0).epsilon(1e-14));
  CHECK(g.gW.col(0)(1) == doctest::Approx(lp * 0.75 * 1.0).epsilon(1e-14));
  CHECK(g.gv[0] == doctest::Approx(lp * 1.25).epsilon(1e-14));
}

TEST_CASE("state json round trip preserves every bit") {
  Rng rng(5);
  Eigen::MatrixXd W0(3, 4);
  for (int j = 0; j < 4; ++j)
    for (int d = 0; d < 3; ++d) W0(d, j) = rng.gaussian();
  NetworkState s = init_balanced(W0, 1e-7, {1, -1, 1, -1}, 0.1);
  s.t = 2.5;
  const std::string text = state_to_json(s);
  NetworkState back = state_from_json(text);
  CHECK((back.W.array() == s.W.array()).all());
  CHECK((back.v.array() == s.v.array()).all());
  CHECK(back.sign_tags == s.sign_tags);
  CHECK(back.t == s.t);
  CHECK(back.leaky_alpha == s.leaky_alpha);
  CHECK(state_to_json(back) == text);

  CHECK_THROWS_AS(state_from_json("{}"), FormatError);
  CHECK_THROWS_AS(state_from_json("nope"), FormatError);
}

TEST_CASE("column_norm survives subnormal-scale columns") {
  Eigen::MatrixXd W(2, 1);
  W << 1e-200, 0.0;
  // squaring 1e-200 underflows; the rescaled norm must not
  CHECK(column_norm(W, 0) == doctest::Approx(1e-200).epsilon(1e-15));

  Eigen::MatrixXd Z(2, 1);
  Z.setZero();
  CHECK(column_norm(Z, 0) == 0.0);
}

TEST_CASE("balance residual reports the worst column gap") {
  NetworkState s = single_neuron(3.0, 4.0, 5.0, 1);
  CHECK(balance_residual(s) == 0.0);
  s.v[0] = 6.0;  // v^2 - |w|^2 = 36 - 25
  CHECK(balance_residual(s) == doctest::Approx(11.0).epsilon(1e-15));
}

}  // TEST_SUITE
