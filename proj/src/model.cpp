#include "coneflow/model.hpp"

#include <cmath>

#include "coneflow/parallel.hpp"
#include "coneflow/rng.hpp"

#include "json.hpp"

namespace coneflow {

const char* loss_kind_name(LossKind lk) {
  switch (lk) {
    case LossKind::exponential: return "exponential";
    case LossKind::logistic: return "logistic";
    case LossKind::logistic_unscaled: return "logistic_unscaled";
  }
  return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "exponential") return LossKind::exponential;
  if (name == "logistic") return LossKind::logistic;
  if (name == "logistic_unscaled") return LossKind::logistic_unscaled;
  throw FormatError("unknown loss kind '" + name + "'");
}

double column_norm(const Eigen::MatrixXd& W, int j) {
  return W.col(j).stableNorm();
}

NetworkState init_balanced(const Eigen::MatrixXd& W0, double eps,
                           const std::vector<int>& signs, double leaky_alpha) {
  const int h = static_cast<int>(W0.cols());
  if (h < 1) throw PreconditionError("init_balanced: empty W0");
  if (static_cast<int>(signs.size()) != h) {
    throw PreconditionError("init_balanced: signs size " +
                            std::to_string(signs.size()) + " != h " +
                            std::to_string(h));
  }
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw PreconditionError("init_balanced: eps must be positive and finite");
  }
  if (!(leaky_alpha >= 0.0 && leaky_alpha < 1.0)) {
    throw PreconditionError("init_balanced: leaky_alpha must be in [0,1)");
  }
  NetworkState s;
  s.W = eps * W0;
  s.v.resize(h);
  s.sign_tags.resize(h);
  double cmax = 0.0, cmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < h; ++j) {
    if (signs[j] != 1 && signs[j] != -1) {
      throw PreconditionError("init_balanced: signs[" + std::to_string(j) +
                              "] must be +1 or -1");
    }
    const double c0 = W0.col(j).stableNorm();
    if (!(c0 > 0.0)) {
      throw DegenerateInputError("init_balanced: W0 column " +
                                 std::to_string(j) + " has zero norm");
    }
    cmax = std::max(cmax, c0);
    cmin = std::min(cmin, c0);
    // v_j is set from the same rescaled norm the residual tracker uses, so
    // v_j^2 - |w_j|^2 is exactly zero at t = 0
    s.v[j] = signs[j] * column_norm(s.W, j);
    s.sign_tags[j] = signs[j];
  }
  s.leaky_alpha = leaky_alpha;
  s.eps = eps;
  s.W0_col_max = cmax;
  s.W0_col_min = cmin;
  return s;
}

NetworkState init_gaussian(int D, int h, double alpha_init, uint64_t seed,
                           double leaky_alpha) {
  if (D < 1 || h < 1) throw PreconditionError("init_gaussian: D,h must be >= 1");
  if (!(alpha_init > 0.0)) {
    throw PreconditionError("init_gaussian: alpha_init must be positive");
  }
  Rng rng(mix_seed(seed, 0x1417));
  NetworkState s;
  s.W.resize(D, h);
  s.v.resize(h);
  s.sign_tags.resize(h);
  for (int j = 0; j < h; ++j) {
    for (int d = 0; d < D; ++d) s.W(d, j) = alpha_init * rng.gaussian();
  }
  double cmax = 0.0, cmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < h; ++j) {
    double g = 0.0;
    do {
      g = rng.gaussian();
    } while (g == 0.0);
    s.v[j] = alpha_init * g;
    s.sign_tags[j] = g > 0.0 ? 1 : -1;
    const double c0 = s.W.col(j).stableNorm() / alpha_init;
    cmax = std::max(cmax, c0);
    cmin = std::min(cmin, c0);
  }
  s.leaky_alpha = leaky_alpha;
  s.eps = alpha_init;
  s.W0_col_max = cmax;
  s.W0_col_min = cmin;
  return s;
}

double forward(const NetworkState& s, const Eigen::VectorXd& x) {
  const int h = s.h();
  double f = 0.0;
  for (int j = 0; j < h; ++j) {
    f += s.v[j] * activation(s.W.col(j).dot(x), s.leaky_alpha);
  }
  return f;
}

double loss_value(double y, double yhat, LossKind lk) {
  const double m = y * yhat;  // margin
  switch (lk) {
    case LossKind::exponential:
      return std::exp(-m);
    case LossKind::logistic:
      return 2.0 * (m > 0.0 ? std::log1p(std::exp(-m))
                            : -m + std::log1p(std::exp(m)));
    case LossKind::logistic_unscaled:
      return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  return 0.0;
}

double loss_dyhat(double y, double yhat, LossKind lk) {
  const double m = y * yhat;
  switch (lk) {
    case LossKind::exponential:
      return -y * std::exp(-m);
    case LossKind::logistic: {
      // -2y * sigmoid(-m), computed on the stable branch
      const double s =
          m > 0.0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
      return -2.0 * y * s;
    }
    case LossKind::logistic_unscaled: {
      const double s =
          m > 0.0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
      return -y * s;
    }
  }
  return 0.0;
}

LossGrads loss_and_grads(const NetworkState& s, const Dataset& ds, LossKind lk) {
  const int n = ds.n;
  const int h = s.h();
  const int D = s.D();
  const double alpha = s.leaky_alpha;

  // phase 1: per-point outputs and loss derivatives (independent writes)
  Eigen::VectorXd f(n), g(n);
  std::vector<double> li(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n),
               static_cast<std::size_t>(h) * D, [&](std::size_t ii) {
                 const int i = static_cast<int>(ii);
                 const double yhat = forward(s, ds.x(i));
                 f[i] = yhat;
                 g[i] = loss_dyhat(ds.y(i), yhat, lk);
                 li[ii] = loss_value(ds.y(i), yhat, lk);
               });

  LossGrads out;
  out.loss = blocked_sum(static_cast<std::size_t>(n),
                         [&](std::size_t i) { return li[i]; });
  out.gW.resize(D, h);
  out.gv.resize(h);

  // phase 2: per-neuron columns (independent writes, fixed i-order sums)
  parallel_for(static_cast<std::size_t>(h),
               static_cast<std::size_t>(n) * D, [&](std::size_t jj) {
                 const int j = static_cast<int>(jj);
                 Eigen::VectorXd col = Eigen::VectorXd::Zero(D);
                 double gvj = 0.0;
                 for (int i = 0; i < n; ++i) {
                   const double z = s.W.col(j).dot(ds.x(i));
                   col += (activation_slope(z, alpha) * g[i]) * ds.x(i);
                   gvj += g[i] * activation(z, alpha);
                 }
                 out.gW.col(j) = s.v[j] * col;
                 out.gv[j] = gvj;
               });
  return out;
}

DerivBoundCheck loss_derivative_bound_check(double y, double yhat, LossKind lk) {
  if (!(std::fabs(yhat) <= 1.0)) {
    throw PreconditionError(
        "loss_derivative_bound_check requires |yhat| <= 1, got " +
        fmt_g6(yhat));
  }
  if (y != 1.0 && y != -1.0) {
    throw PreconditionError("loss_derivative_bound_check: y must be +1 or -1");
  }
  DerivBoundCheck r;
  r.lhs = std::fabs(-loss_dyhat(y, yhat, lk) - y);
  r.rhs = 2.0 * std::fabs(yhat);
  return r;
}

double balance_residual(const NetworkState& s) {
  double worst = 0.0;
  for (int j = 0; j < s.h(); ++j) {
    const double nrm = column_norm(s.W, j);
    worst = std::max(worst, std::fabs(s.v[j] * s.v[j] - nrm * nrm));
  }
  return worst;
}

std::string state_to_json(const NetworkState& s) {
  nlohmann::ordered_json j;
  j["t"] = s.t;
  auto& w = j["W"] = nlohmann::ordered_json::array();  // row-major
  for (int r = 0; r < s.D(); ++r)
    for (int c = 0; c < s.h(); ++c) w.push_back(s.W(r, c));
  j["D"] = s.D();
  j["h"] = s.h();
  auto& v = j["v"] = nlohmann::ordered_json::array();
  for (int k = 0; k < s.h(); ++k) v.push_back(s.v[k]);
  j["sign_tags"] = s.sign_tags;
  j["leaky_alpha"] = s.leaky_alpha;
  return j.dump(2) + "\n";
}

NetworkState state_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("state json: ") + e.what());
  }
  for (const char* key : {"t", "W", "D", "h", "v", "sign_tags", "leaky_alpha"}) {
    if (!j.contains(key)) {
      throw FormatError(std::string("state json: missing key '") + key + "'");
    }
  }
  NetworkState s;
  const int D = j["D"].get<int>();
  const int h = j["h"].get<int>();
  if (D < 1 || h < 1) throw FormatError("state json: bad dimensions");
  if (static_cast<int>(j["W"].size()) != D * h) {
    throw FormatError("state json: W has " + std::to_string(j["W"].size()) +
                      " entries, expected " + std::to_string(D * h));
  }
  if (static_cast<int>(j["v"].size()) != h ||
      static_cast<int>(j["sign_tags"].size()) != h) {
    throw FormatError("state json: v/sign_tags size mismatch");
  }
  s.t = j["t"].get<double>();
  s.W.resize(D, h);
  int k = 0;
  for (int r = 0; r < D; ++r)
    for (int c = 0; c < h; ++c) s.W(r, c) = j["W"][k++].get<double>();
  s.v.resize(h);
  for (int c = 0; c < h; ++c) s.v[c] = j["v"][c].get<double>();
  s.sign_tags = j["sign_tags"].get<std::vector<int>>();
  s.leaky_alpha = j["leaky_alpha"].get<double>();
  return s;
}

}  // namespace coneflow
