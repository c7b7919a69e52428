#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "coneflow/dataset.hpp"
#include "coneflow/model.hpp"

namespace coneflow {

enum class ConeLabel { S_plus, S_minus, S_dead, Other };
const char* cone_label_name(ConeLabel l);

struct ConeMembership {
  ConeLabel label = ConeLabel::Other;
  int activated_pos = 0;  // #{i in I_plus : <x_i,w> > 0}
  int activated_neg = 0;
};

// S_dead is checked first: on a dataset with an empty class the S_dead and
// one-sided cone conditions coincide, and the dead label wins.
ConeMembership classify(const Eigen::VectorXd& w, const Dataset& ds);

// sum over activated points of y_i x_i, plus leaky_alpha times the sum over
// the inactive ones
Eigen::VectorXd x_a(const Eigen::VectorXd& w, const Dataset& ds,
                    double leaky_alpha);

int n_active(const Eigen::VectorXd& w, const Dataset& ds);

// sqrt(mu) * n_a * X_min
double x_a_norm_lower_bound(const DataStats& st, int n_a);

struct Margins {
  double zeta1 = 0.0;  // largest cap margin around the class sums
  double xi = 0.0;     // 1 - sup^2 |cos| between the data cone and the uncovered set
  double zeta2 = 0.0;  // init-separation margin from the starting directions
  bool xi_complement_empty = false;  // cones cover the sphere -> xi = 1
  enum class Method { exact2d, sampled } method = Method::exact2d;
  int sample_count = 0;

  double zeta() const { return zeta1 > zeta2 ? zeta1 : zeta2; }
};

// D==2: exact angular computation; D>2: sampled estimates flagged as such.
// Throws AssumptionFailedError (naming the violated inequality and witnesses)
// when mu <= 0 or an initial direction sits inside the opposing class cap.
Margins estimate_margins(const Dataset& ds, const NetworkState& init,
                         int samples, uint64_t seed);

}  // namespace coneflow
