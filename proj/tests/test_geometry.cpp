#include <cmath>
#include <vector>

#include "coneflow/geometry.hpp"
#include "coneflow/rng.hpp"
#include "doctest.h"

using namespace coneflow;

namespace {

Dataset build_pts(std::vector<std::pair<Eigen::Vector2d, int>> raw) {
  std::vector<LabeledPoint> pts;
  for (auto& [x, y] : raw) {
    LabeledPoint p;
    p.x = x;
    p.y = y;
    pts.push_back(std::move(p));
  }
  return Dataset::build(std::move(pts));
}

// unit pair with signed correlation 0.8: y2*x2 = (0.8,-0.6)
Dataset mu08_pair() {
  return build_pts({{Eigen::Vector2d(1.0, 0.0), 1},
                    {Eigen::Vector2d(-0.8, 0.6), -1}});
}

NetworkState tagged_state(std::vector<std::pair<Eigen::Vector2d, int>> cols) {
  NetworkState s;
  s.W = Eigen::MatrixXd(2, static_cast<int>(cols.size()));
  s.v = Eigen::VectorXd(static_cast<int>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    s.W.col(static_cast<int>(j)) = cols[j].first;
    s.v[static_cast<int>(j)] = cols[j].second;
    s.sign_tags.push_back(cols[j].second);
  }
  return s;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("classify puts the class sums in their own cones") {
  Dataset ds = mu08_pair();
  const ConeMembership plus = classify(Eigen::Vector2d(1.0, 0.0), ds);
  CHECK(plus.label == ConeLabel::S_plus);
  CHECK(plus.activated_pos == 1);
  CHECK(plus.activated_neg == 0);

  // -x_plus activates exactly the negative point here
  const ConeMembership minus = classify(Eigen::Vector2d(-1.0, 0.0), ds);
  CHECK(minus.label == ConeLabel::S_minus);
  CHECK(minus.activated_pos == 0);
  CHECK(minus.activated_neg == 1);

  // activates x1 and x2 both -> neither cone
  const ConeMembership both = classify(Eigen::Vector2d(0.1, 1.0), ds);
  CHECK(both.label == ConeLabel::Other);
  CHECK(both.activated_pos == 1);
  CHECK(both.activated_neg == 1);
}

TEST_CASE("classify labels the no-activation half-space dead") {
  Dataset one = build_pts({{Eigen::Vector2d(1.0, 0.0), 1}});
  CHECK(classify(Eigen::Vector2d(-1.0, 0.0), one).label == ConeLabel::S_dead);
  // the boundary itself does not activate, so it is dead too
  CHECK(classify(Eigen::Vector2d(0.0, 1.0), one).label == ConeLabel::S_dead);
  CHECK(classify(Eigen::Vector2d(1.0, 0.0), one).label == ConeLabel::S_plus);
}

TEST_CASE("x_a sums the activated signed points") {
  Dataset ds = build_pts({{Eigen::Vector2d(1.0, 0.1), 1},
                          {Eigen::Vector2d(0.4, 0.9), -1},
                          {Eigen::Vector2d(-0.9, -0.4), -1}});
  // w activates x1 (pos) and x2 (neg) but not x3
  const Eigen::Vector2d w(1.0, 0.5);
  REQUIRE(ds.x(0).dot(w) > 0.0);
  REQUIRE(ds.x(1).dot(w) > 0.0);
  REQUIRE(ds.x(2).dot(w) < 0.0);
  const Eigen::VectorXd a = x_a(w, ds, 0.0);
  CHECK((a - (ds.x(0) - ds.x(1))).norm() <= 1e-15);
  CHECK(n_active(w, ds) == 2);

  // linear activation: every point contributes regardless of w
  const Eigen::VectorXd lin = x_a(w, ds, 1.0);
  CHECK((lin - (ds.x(0) - ds.x(1) - ds.x(2))).norm() <= 1e-15);

  // dead direction contributes nothing (this dataset's dead cone is empty,
  // so use the two-point one, whose dead arc contains (-0.1,-1))
  Dataset pair = mu08_pair();
  const Eigen::Vector2d dead(-0.1, -1.0);
  REQUIRE(classify(dead, pair).label == ConeLabel::S_dead);
  const Eigen::VectorXd z = x_a(dead, pair, 0.0);
  CHECK(z.norm() == 0.0);
  CHECK(n_active(dead, pair) == 0);
}

TEST_CASE("activated-sum norm lower bound matches hand values") {
  // colinear unit data: mu = 1, X_min = 1
  Dataset colinear = build_pts({{Eigen::Vector2d(1.0, 0.0), 1},
                                {Eigen::Vector2d(1.0, 0.0), 1}});
  const DataStats st = compute_stats(colinear);
  REQUIRE(st.mu == doctest::Approx(1.0));
  CHECK(x_a_norm_lower_bound(st, 2) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(x_a_norm_lower_bound(st, 0) == 0.0);

  Dataset tilted = build_pts({{Eigen::Vector2d(1.0, 0.0), 1},
                              {Eigen::Vector2d(std::sin(0.1), std::cos(0.1)), 1}});
  const DataStats st2 = compute_stats(tilted);
  CHECK(x_a_norm_lower_bound(st2, 1) ==
        doctest::Approx(std::sqrt(std::sin(0.1))).epsilon(1e-12));
  // the bound is a true lower bound for a single activated point
  CHECK(st2.X_min >= x_a_norm_lower_bound(st2, 1));
}

TEST_CASE("exact 2-D margins on the 0.8-correlation pair") {
  Dataset ds = mu08_pair();
  // init direction orthogonal to x_plus: cos to x_minus is 0.6
  NetworkState init = tagged_state({{Eigen::Vector2d(0.0, 1.0), 1}});
  const Margins m = estimate_margins(ds, init, 1000, 1);
  CHECK(m.method == Margins::Method::exact2d);
  // cap radius: the S_plus arc ends where x_2 stops being inactive, at
  // angular distance asin(0.8) from x_plus -> zeta1 = 0.8^2
  CHECK(m.zeta1 == doctest::Approx(0.64).epsilon(1e-9));
  // uncovered gaps sit at |cos| = 0.6 from the data cone -> xi = 1 - 0.36
  CHECK(m.xi == doctest::Approx(0.64).epsilon(1e-9));
  CHECK(!m.xi_complement_empty);
  CHECK(m.zeta2 == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(m.zeta() == doctest::Approx(0.64).epsilon(1e-9));

  // margins are scale invariant
  Dataset scaled = build_pts({{Eigen::Vector2d(2.5, 0.0), 1},
                              {Eigen::Vector2d(-2.0, 1.5), -1}});
  const Margins ms = estimate_margins(scaled, init, 1000, 1);
  CHECK(ms.zeta1 == doctest::Approx(m.zeta1).epsilon(1e-9));
  CHECK(ms.xi == doctest::Approx(m.xi).epsilon(1e-9));
}

TEST_CASE("zeta2 clamps to 1 when every start faces away") {
  Dataset ds = mu08_pair();
  // +1 neuron at x_plus: cos to x_minus is -0.8 <= 0
  NetworkState init = tagged_state({{Eigen::Vector2d(1.0, 0.0), 1}});
  const Margins m = estimate_margins(ds, init, 1000, 1);
  CHECK(m.zeta2 == 1.0);

  // a neuron starting exactly on the opposing sum violates the assumption
  NetworkState bad = tagged_state({{Eigen::Vector2d(-0.8, 0.6), 1}});
  CHECK_THROWS_AS(estimate_margins(ds, bad, 1000, 1), AssumptionFailedError);

  // mu <= 0 is rejected outright
  Dataset ortho = build_pts({{Eigen::Vector2d(1.0, 0.0), 1},
                             {Eigen::Vector2d(0.0, 1.0), 1}});
  CHECK_THROWS_AS(estimate_margins(ortho, init, 1000, 1),
                  AssumptionFailedError);
}

TEST_CASE("single-point dataset: covered circle gives xi = 1") {
  Dataset one = build_pts({{Eigen::Vector2d(1.0, 0.0), 1}});
  NetworkState init = tagged_state({{Eigen::Vector2d(0.0, 1.0), 1}});
  const Margins m = estimate_margins(one, init, 1000, 1);
  // S_plus is the open half-plane, the cap reaches a quarter turn
  CHECK(m.zeta1 == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.xi == 1.0);
  CHECK(m.xi_complement_empty);
}

TEST_CASE("mu-coherence holds for random conic combinations") {
  Dataset ds = mu08_pair();
  const DataStats st = compute_stats(ds);
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    Eigen::Vector2d z1 = Eigen::Vector2d::Zero();
    Eigen::Vector2d z2 = Eigen::Vector2d::Zero();
    for (int i = 0; i < ds.n; ++i) {
      z1 += rng.uniform() * ds.y(i) * ds.x(i);
      z2 += rng.uniform() * ds.y(i) * ds.x(i);
    }
    if (z1.norm() == 0.0 || z2.norm() == 0.0) continue;
    const double c = z1.dot(z2) / (z1.norm() * z2.norm());
    CHECK(c >= st.mu - 1e-9);
  }
}

TEST_CASE("activated-sum norm bound holds for random directions") {
  Dataset ds = build_pts({{Eigen::Vector2d(1.0, 0.15), 1},
                          {Eigen::Vector2d(0.95, -0.1), 1},
                          {Eigen::Vector2d(-1.0, 0.1), -1}});
  const DataStats st = compute_stats(ds);
  REQUIRE(st.mu > 0.0);
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const double ang = rng.uniform(0.0, 2.0 * kPi);
    const Eigen::Vector2d w(std::cos(ang), std::sin(ang));
    const int na = n_active(w, ds);
    const double bound = x_a_norm_lower_bound(st, na);
    CHECK(x_a(w, ds, 0.0).stableNorm() >= bound - 1e-9);
  }
}

}  // TEST_SUITE
