#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "coneflow/dataset.hpp"
#include "coneflow/geometry.hpp"
#include "coneflow/model.hpp"

namespace coneflow {

// All closed-form guarantees for one (dataset, init, margins) triple.
// Quantities that would underflow double (the eps threshold's exponential
// term; the log(1/eps^2...) inside t2) are carried in log space.
struct TheoryBounds {
  // inputs echoed for reporting
  double mu = 0.0, X_max = 0.0, X_min = 0.0;
  int n = 0, n_plus = 0, n_minus = 0, h = 0;
  double eps = 0.0, W_max = 0.0, W_min = 0.0;
  Margins margins;

  double c = 0.0;  // min(zeta, xi) * sqrt(mu) * X_min, the pace constant

  double eps_threshold = 0.0;      // exp(log_eps_threshold), may underflow to 0
  double log_eps_threshold = 0.0;  // exact
  double T_align = 0.0;            // log(1/(sqrt(h)*eps)) / (4 n X_max)
  double err_bound = 0.0;          // 4 eps n sqrt(h) X_max^2 W_max^2
  double norm_ub = 0.0;            // 2 eps W_max^2 / sqrt(h), bound on max_j |w_j|^2
  double f_ub = 0.0;               // 2 eps sqrt(h) X_max W_max^2
  double t1_bound = 0.0;           // 16 log(n) / c
  double alpha_rate = 0.0;         // (mu X_min)^2 / (32 X_max)
  double t2_bound = 0.0;           // max over populated sides

  // n==1 or an empty class makes t1/t2 vacuous; flagged, never clamped
  bool degenerate_t1 = false;
  bool degenerate_t2 = false;

  double dt_transition(int n_a) const {
    if (n_a <= 0) return std::numeric_limits<double>::infinity();
    return 4.0 / (c * n_a);
  }
};

TheoryBounds bounds_from(const Dataset& ds, const NetworkState& init,
                         const Margins& margins);

// --- activation-count paths ---------------------------------------------

struct PathNode {
  int k_plus = 0;
  int k_minus = 0;
  bool operator==(const PathNode& o) const {
    return k_plus == o.k_plus && k_minus == o.k_minus;
  }
};

struct Path {
  std::vector<PathNode> nodes;
  int n_plus = 0;
  int n_minus = 0;
};

// Valid paths make weak monotone progress (k_plus nondecreasing, k_minus
// nonincreasing), visit pairwise-distinct nodes none of which is (0,0), and
// terminate at (n_plus, 0). Throws PreconditionError naming the violated rule.
void validate_path(const Path& p);

// sum over all nodes except the last of 4 / (c * (k_plus + k_minus))
double path_travel_time(const Path& p, double c);

// (0,n_minus),...,(0,1),(1,1),(1,0),(2,0),...,(n_plus,0); for n_minus==0 the
// path starts at (1,0). n_plus must be >= 1 (the terminal forbids (0,0)).
Path maximal_path(int n_plus, int n_minus);

// harmonic closed form for path_travel_time(maximal_path(...), c)
double maximal_path_time(int n_plus, int n_minus, double c);

// {T(p), T(maximal)} for p's own (n_plus, n_minus)
std::pair<double, double> dominance_check(const Path& p, double c);

}  // namespace coneflow
