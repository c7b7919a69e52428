#include <cmath>
#include <cstring>
#include <vector>

#include "coneflow/analysis.hpp"
#include "coneflow/oracle.hpp"
#include "coneflow/parallel.hpp"
#include "coneflow/rng.hpp"
#include "doctest.h"

using namespace coneflow;

namespace {

Dataset random_dataset(int n, int D, uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledPoint> pts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x(D);
    for (int d = 0; d < D; ++d) x[d] = rng.gaussian();
    pts[static_cast<std::size_t>(i)].x = x / x.norm();
    pts[static_cast<std::size_t>(i)].y = i % 2 == 0 ? 1 : -1;
  }
  return Dataset::build(std::move(pts));
}

NetworkState random_balanced(int D, int h, double eps, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd W0(D, h);
  std::vector<int> signs;
  for (int j = 0; j < h; ++j) {
    for (int d = 0; d < D; ++d) W0(d, j) = rng.gaussian();
    signs.push_back(j % 2 == 0 ? 1 : -1);
  }
  return init_balanced(W0, eps, signs);
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

struct ParallelGuard {
  bool saved;
  ParallelGuard() : saved(parallel_enabled()) {}
  ~ParallelGuard() { set_parallel_enabled(saved); }
};

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("thread count reporting is sane") {
  ParallelGuard guard;
  set_parallel_enabled(true);
  CHECK(parallel_threads() >= 1);
  set_parallel_enabled(false);
  CHECK(parallel_threads() == 1);
}

TEST_CASE("blocked sums are bitwise stable across thread settings") {
  ParallelGuard guard;
  // awkward sizes around the block boundary plus one big enough to engage
  // threads for real
  for (const std::size_t n :
       {std::size_t{0}, std::size_t{1}, std::size_t{255}, std::size_t{256},
        std::size_t{257}, std::size_t{100000}}) {
    std::vector<double> xs(n);
    Rng rng(40 + n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = rng.gaussian() * 1e3;
    auto term = [&](std::size_t i) { return xs[i]; };
    set_parallel_enabled(false);
    const double serial = blocked_sum(n, term);
    set_parallel_enabled(true);
    const double parallel = blocked_sum(n, term);
    CHECK(std::memcmp(&serial, &parallel, sizeof(double)) == 0);
  }
}

TEST_CASE("loss and gradients are bitwise identical serial vs parallel") {
  ParallelGuard guard;
  Dataset ds = random_dataset(200, 6, 91);
  NetworkState s = random_balanced(6, 64, 0.8, 92);
  for (const LossKind lk :
       {LossKind::exponential, LossKind::logistic, LossKind::logistic_unscaled}) {
    set_parallel_enabled(false);
    const LossGrads a = loss_and_grads(s, ds, lk);
    set_parallel_enabled(true);
    const LossGrads b = loss_and_grads(s, ds, lk);
    CHECK(std::memcmp(&a.loss, &b.loss, sizeof(double)) == 0);
    CHECK(bitwise_equal(a.gW, b.gW));
    CHECK(bitwise_equal(a.gv, b.gv));
  }
}

TEST_CASE("dataset statistics are bitwise identical serial vs parallel") {
  ParallelGuard guard;
  Dataset ds = random_dataset(300, 8, 93);
  set_parallel_enabled(false);
  const DataStats a = compute_stats(ds);
  set_parallel_enabled(true);
  const DataStats b = compute_stats(ds);
  CHECK(std::memcmp(&a.mu, &b.mu, sizeof(double)) == 0);
  CHECK(std::memcmp(&a.X_max, &b.X_max, sizeof(double)) == 0);
  CHECK(std::memcmp(&a.X_min, &b.X_min, sizeof(double)) == 0);
  CHECK(bitwise_equal(a.x_plus, b.x_plus));
  CHECK(bitwise_equal(a.x_minus, b.x_minus));
  CHECK(bitwise_equal(a.correlation, b.correlation));
}

TEST_CASE("sampled margins are bitwise identical serial vs parallel") {
  ParallelGuard guard;
  Dataset ds = generate_separable(3, 5, 5, 0.2, 94);
  NetworkState s = random_balanced(3, 4, 0.2, 95);
  set_parallel_enabled(false);
  const Margins a = estimate_margins(ds, s, 20000, 7);
  set_parallel_enabled(true);
  const Margins b = estimate_margins(ds, s, 20000, 7);
  REQUIRE(a.method == Margins::Method::sampled);
  CHECK(std::memcmp(&a.zeta1, &b.zeta1, sizeof(double)) == 0);
  CHECK(std::memcmp(&a.xi, &b.xi, sizeof(double)) == 0);
  CHECK(std::memcmp(&a.zeta2, &b.zeta2, sizeof(double)) == 0);
}

TEST_CASE("short trajectories serialize byte-identically serial vs parallel") {
  ParallelGuard guard;
  Dataset ds = random_dataset(20, 4, 96);
  NetworkState s = random_balanced(4, 16, 0.5, 97);
  IntegratorConfig cfg;
  cfg.step = 0.02;
  cfg.max_time = 1.0;
  set_parallel_enabled(false);
  const std::string a =
      trajectory_to_ndjson(integrate(s, ds, LossKind::exponential, cfg, 0.25));
  set_parallel_enabled(true);
  const std::string b =
      trajectory_to_ndjson(integrate(s, ds, LossKind::exponential, cfg, 0.25));
  CHECK(a == b);
}

}  // TEST_SUITE
