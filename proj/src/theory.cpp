#include "coneflow/theory.hpp"

#include <cmath>
#include <string>

#include "coneflow/common.hpp"

namespace coneflow {

TheoryBounds bounds_from(const Dataset& ds, const NetworkState& init,
                         const Margins& margins) {
  if (init.D() != ds.D) {
    throw PreconditionError("bounds_from: init dimension " +
                            std::to_string(init.D()) + " != dataset " +
                            std::to_string(ds.D));
  }
  const DataStats st = compute_stats(ds);
  if (!(st.mu > 0.0)) {
    throw AssumptionFailedError("bounds_from: mu = " + fmt_g6(st.mu) +
                                " is not positive");
  }

  TheoryBounds b;
  b.mu = st.mu;
  b.X_max = st.X_max;
  b.X_min = st.X_min;
  b.n = ds.n;
  b.n_plus = ds.n_plus();
  b.n_minus = ds.n_minus();
  b.h = init.h();
  b.eps = init.eps;
  b.W_max = init.W0_col_max;
  b.W_min = init.W0_col_min;
  b.margins = margins;

  const double zeta = margins.zeta();
  const double min_zx = std::min(zeta, margins.xi);
  b.c = min_zx * std::sqrt(b.mu) * b.X_min;

  const double log_h = std::log(static_cast<double>(b.h));
  const double log_n = std::log(static_cast<double>(b.n));
  const double log_Xmax = std::log(b.X_max);
  const double log_Wmax = std::log(b.W_max);
  // first threshold term: min{mu,zeta,xi} sqrt(mu) X_min / (4 sqrt(h) n Xmax^2 Wmax^2)
  const double log_term1 =
      std::log(std::min({b.mu, zeta, margins.xi})) + 0.5 * std::log(b.mu) +
      std::log(b.X_min) -
      (std::log(4.0) + 0.5 * log_h + log_n + 2.0 * log_Xmax + 2.0 * log_Wmax);
  // second: exp(-64 n Xmax log(n) / (min{zeta,xi} sqrt(mu) X_min)) / sqrt(h)
  const double log_term2 = -0.5 * log_h - (64.0 * b.n * b.X_max / b.c) * log_n;
  // hard cap: 1 / (4 sqrt(h) Xmax Wmax^2)
  const double log_cap =
      -(std::log(4.0) + 0.5 * log_h + log_Xmax + 2.0 * log_Wmax);
  b.log_eps_threshold = std::min({log_term1, log_term2, log_cap});
  b.eps_threshold = std::exp(b.log_eps_threshold);

  b.T_align = -(0.5 * log_h + std::log(b.eps)) / (4.0 * b.n * b.X_max);
  b.err_bound = 4.0 * b.eps * b.n * std::sqrt(static_cast<double>(b.h)) *
                b.X_max * b.X_max * b.W_max * b.W_max;
  b.norm_ub = 2.0 * b.eps * b.W_max * b.W_max /
              std::sqrt(static_cast<double>(b.h));
  b.f_ub = 2.0 * b.eps * std::sqrt(static_cast<double>(b.h)) * b.X_max *
           b.W_max * b.W_max;
  b.t1_bound = 16.0 * log_n / b.c;
  b.degenerate_t1 = (b.n == 1);
  b.alpha_rate = (b.mu * b.X_min) * (b.mu * b.X_min) / (32.0 * b.X_max);

  // t2: per populated side, t1 + 6/(sqrt(mu) n_s X_min)
  //   + 4/(sqrt(mu) n_s X_min) * (log(2/(eps^2 sqrt(mu) X_min W_min^2)) + 4 n Xmax t1);
  // the log factor is expanded so eps^2 never has to be formed
  const double log_factor =
      std::log(2.0) - (2.0 * std::log(b.eps) + 0.5 * std::log(b.mu) +
                       std::log(b.X_min) + 2.0 * std::log(b.W_min));
  double t2 = 0.0;
  for (int n_s : {b.n_plus, b.n_minus}) {
    if (n_s == 0) continue;
    const double pace = std::sqrt(b.mu) * n_s * b.X_min;
    const double side = b.t1_bound + 6.0 / pace +
                        (4.0 / pace) * (log_factor + 4.0 * b.n * b.X_max *
                                                         b.t1_bound);
    t2 = std::max(t2, side);
  }
  b.t2_bound = t2;
  b.degenerate_t2 = (b.n_plus == 0 || b.n_minus == 0);
  return b;
}

// --- paths ----------------------------------------------------------------

namespace {

std::string node_str(const PathNode& q) {
  return "(" + std::to_string(q.k_plus) + "," + std::to_string(q.k_minus) +
         ")";
}

}  // namespace

void validate_path(const Path& p) {
  if (p.nodes.empty()) {
    throw PreconditionError("path is empty");
  }
  if (p.n_plus < 0 || p.n_minus < 0 || p.n_plus + p.n_minus < 1) {
    throw PreconditionError("path class counts must be nonnegative with n >= 1");
  }
  for (std::size_t l = 0; l < p.nodes.size(); ++l) {
    const PathNode& q = p.nodes[l];
    if (q.k_plus < 0 || q.k_plus > p.n_plus || q.k_minus < 0 ||
        q.k_minus > p.n_minus) {
      throw PreconditionError("path node " + std::to_string(l) + " = " +
                              node_str(q) + " is out of range for (" +
                              std::to_string(p.n_plus) + "," +
                              std::to_string(p.n_minus) + ")");
    }
    if (q.k_plus == 0 && q.k_minus == 0) {
      throw PreconditionError("path node " + std::to_string(l) +
                              " is (0,0), which no path may visit");
    }
    if (l > 0) {
      const PathNode& prev = p.nodes[l - 1];
      if (q == prev) {
        throw PreconditionError("path repeats node " + node_str(q) +
                                " at position " + std::to_string(l));
      }
      if (q.k_plus < prev.k_plus) {
        throw PreconditionError(
            "positive activation count decreases at position " +
            std::to_string(l) + ": " + node_str(prev) + " -> " + node_str(q));
      }
      if (q.k_minus > prev.k_minus) {
        throw PreconditionError(
            "negative activation count increases at position " +
            std::to_string(l) + ": " + node_str(prev) + " -> " + node_str(q));
      }
    }
  }
  // adjacent-equality is the only repeat the monotone coordinates allow, so
  // the neighbor check above already enforces pairwise-distinct nodes
  const PathNode& last = p.nodes.back();
  if (last.k_plus != p.n_plus || last.k_minus != 0) {
    throw PreconditionError("path must terminate at (" +
                            std::to_string(p.n_plus) + ",0), got " +
                            node_str(last));
  }
}

double path_travel_time(const Path& p, double c) {
  validate_path(p);
  if (!(c > 0.0)) {
    throw PreconditionError("path travel time needs a positive pace constant");
  }
  double t = 0.0;
  for (std::size_t l = 0; l + 1 < p.nodes.size(); ++l) {
    t += 4.0 / (c * (p.nodes[l].k_plus + p.nodes[l].k_minus));
  }
  return t;
}

Path maximal_path(int n_plus, int n_minus) {
  if (n_plus < 1) {
    throw PreconditionError(
        "maximal path needs at least one positive point (terminal is "
        "(n_plus, 0) and (0,0) is forbidden)");
  }
  if (n_minus < 0) {
    throw PreconditionError("negative class count must be nonnegative");
  }
  Path p;
  p.n_plus = n_plus;
  p.n_minus = n_minus;
  for (int k = n_minus; k >= 1; --k) p.nodes.push_back({0, k});
  if (n_minus >= 1) p.nodes.push_back({1, 1});
  for (int k = 1; k <= n_plus; ++k) p.nodes.push_back({k, 0});
  return p;
}

double maximal_path_time(int n_plus, int n_minus, double c) {
  if (n_plus < 1) {
    throw PreconditionError("maximal path needs at least one positive point");
  }
  if (!(c > 0.0)) {
    throw PreconditionError("path travel time needs a positive pace constant");
  }
  // same operands in the same order as path_travel_time(maximal_path(...))
  double t = 0.0;
  for (int k = n_minus; k >= 1; --k) t += 4.0 / (c * k);
  if (n_minus >= 1) t += 4.0 / (c * 2);
  for (int k = 1; k <= n_plus - 1; ++k) t += 4.0 / (c * k);
  return t;
}

std::pair<double, double> dominance_check(const Path& p, double c) {
  return {path_travel_time(p, c), maximal_path_time(p.n_plus, p.n_minus, c)};
}

}  // namespace coneflow
