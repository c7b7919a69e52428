#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coneflow/model.hpp"
#include "coneflow/theory.hpp"

namespace coneflow {

// Independent checkers. Everything here recomputes its answer by a different
// algorithm than the implementation it validates (central differences over a
// plain forward pass, explicit chain enumeration, dense angular sweeps).

struct OracleReport {
  std::string name;
  double max_abs_dev = 0.0;
  double max_rel_dev = 0.0;
  long long cases = 0;
  long long skipped = 0;  // kink-adjacent coordinates excluded from the check
  std::string worst_case;
};

// Central finite differences on every coordinate of W and v. A W coordinate is
// skipped when some |<x_i, w_j>| <= 10 * h_step * |x_i| (the perturbation
// could cross an activation kink). Relative deviation uses the analytic value
// with a small floor tied to the gradient scale.
OracleReport fd_gradient(const NetworkState& s, const Dataset& ds, LossKind lk,
                         double h_step);

// naive loss evaluation used by the oracle (plain loops, no shared kernels)
double loss_naive(const NetworkState& s, const Dataset& ds, LossKind lk);

// Explicit enumeration of valid paths; guard n_plus + n_minus <= 10.
std::vector<Path> enumerate_paths(int n_plus, int n_minus);
long long count_paths(int n_plus, int n_minus);

// independent re-summation of the travel time in long double
double naive_travel_time(const Path& p, double c);

struct MarginSweep {
  double zeta1 = 0.0;
  double xi = 0.0;
  int grid = 0;
};
// dense angular sweep over grid directions on the circle (D must be 2)
MarginSweep sweep_margins_2d(const Dataset& ds, int grid);

}  // namespace coneflow
