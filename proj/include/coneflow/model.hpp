#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "coneflow/common.hpp"
#include "coneflow/dataset.hpp"

namespace coneflow {

// logistic is the 2*log(1+exp(-y*yhat)) form used by every bound check;
// logistic_unscaled is the plain log(1+exp(-y*yhat)) compatibility form.
enum class LossKind { exponential, logistic, logistic_unscaled };

const char* loss_kind_name(LossKind lk);
LossKind loss_kind_from_name(const std::string& name);

// Two-layer net f(x) = sum_j v_j * max(<w_j,x>, alpha*<w_j,x>), alpha in [0,1).
// sign_tags freezes sign(v_j) at init time; the init metadata (eps and the
// unscaled column-norm extremes) feeds the bound evaluation.
struct NetworkState {
  Eigen::MatrixXd W;  // D x h, column j is neuron j
  Eigen::VectorXd v;  // h
  std::vector<int> sign_tags;
  double t = 0.0;
  double leaky_alpha = 0.0;

  double eps = std::numeric_limits<double>::quiet_NaN();
  double W0_col_max = std::numeric_limits<double>::quiet_NaN();
  double W0_col_min = std::numeric_limits<double>::quiet_NaN();

  int D() const { return static_cast<int>(W.rows()); }
  int h() const { return static_cast<int>(W.cols()); }
};

// W = eps*W0, v_j = signs[j] * ||eps*W0 col j||; the balance residual
// v_j^2 - ||w_j||^2 is exactly zero at init by construction.
NetworkState init_balanced(const Eigen::MatrixXd& W0, double eps,
                           const std::vector<int>& signs,
                           double leaky_alpha = 0.0);

// unbalanced small-scale init for the discrete-descent mode: all entries of
// W and v are alpha_init * N(0,1)
NetworkState init_gaussian(int D, int h, double alpha_init, uint64_t seed,
                           double leaky_alpha = 0.0);

inline double activation(double z, double alpha) {
  return z > 0.0 ? z : alpha * z;
}
inline double activation_slope(double z, double alpha) {
  return z > 0.0 ? 1.0 : alpha;
}

double forward(const NetworkState& s, const Eigen::VectorXd& x);

double loss_value(double y, double yhat, LossKind lk);
double loss_dyhat(double y, double yhat, LossKind lk);

struct LossGrads {
  double loss = 0.0;
  Eigen::MatrixXd gW;
  Eigen::VectorXd gv;
};
LossGrads loss_and_grads(const NetworkState& s, const Dataset& ds, LossKind lk);

// |(-dl/dyhat) - y| <= 2|yhat| for both theory loss forms; only valid for
// |yhat| <= 1, enforced as a precondition.
struct DerivBoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
};
DerivBoundCheck loss_derivative_bound_check(double y, double yhat, LossKind lk);

// snapshot schema: {t, W row-major, v, sign_tags, leaky_alpha}
std::string state_to_json(const NetworkState& s);
NetworkState state_from_json(const std::string& text);

// max_j |v_j^2 - ||w_j||^2|, with norms computed by the same rescaled
// algorithm everywhere so the init residual is exactly zero
double balance_residual(const NetworkState& s);

// rescaled (underflow-safe) column norm
double column_norm(const Eigen::MatrixXd& W, int j);

}  // namespace coneflow
