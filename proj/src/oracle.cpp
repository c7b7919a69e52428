#include "coneflow/oracle.hpp"

#include <cmath>
#include <limits>

#include "coneflow/geometry.hpp"

namespace coneflow {

double loss_naive(const NetworkState& s, const Dataset& ds, LossKind lk) {
  long double total = 0.0L;
  for (int i = 0; i < ds.n; ++i) {
    long double yhat = 0.0L;
    for (int j = 0; j < s.h(); ++j) {
      long double z = 0.0L;
      for (int d = 0; d < s.D(); ++d) {
        z += static_cast<long double>(s.W(d, j)) * ds.x(i)[d];
      }
      const long double act = z > 0.0L ? z : s.leaky_alpha * z;
      yhat += static_cast<long double>(s.v[j]) * act;
    }
    const long double margin = ds.y(i) * yhat;
    switch (lk) {
      case LossKind::exponential:
        total += std::exp(-margin);
        break;
      case LossKind::logistic:
        total += 2.0L * std::log(1.0L + std::exp(-margin));
        break;
      case LossKind::logistic_unscaled:
        total += std::log(1.0L + std::exp(-margin));
        break;
    }
  }
  return static_cast<double>(total);
}

OracleReport fd_gradient(const NetworkState& s, const Dataset& ds, LossKind lk,
                         double h_step) {
  if (!(h_step > 0.0)) {
    throw PreconditionError("fd_gradient: h_step must be positive");
  }
  const LossGrads g = loss_and_grads(s, ds, lk);
  double scale = 0.0;
  scale = std::max(scale, g.gW.cwiseAbs().maxCoeff());
  scale = std::max(scale, g.gv.cwiseAbs().maxCoeff());
  const double floor = std::max(1e-6 * scale, 1e-300);

  OracleReport rep;
  rep.name = "fd_gradient";

  // columns where a perturbation of h_step could cross an activation kink
  std::vector<char> col_near_kink(static_cast<std::size_t>(s.h()), 0);
  for (int j = 0; j < s.h(); ++j) {
    for (int i = 0; i < ds.n; ++i) {
      const double z = ds.x(i).dot(s.W.col(j));
      if (std::fabs(z) <= 10.0 * h_step * ds.x_norms[static_cast<std::size_t>(i)]) {
        col_near_kink[static_cast<std::size_t>(j)] = 1;
        break;
      }
    }
  }

  auto consider = [&](double analytic, double fd, const std::string& where) {
    const double dev = std::fabs(fd - analytic);
    const double rel = dev / std::max(std::fabs(analytic), floor);
    ++rep.cases;
    if (dev > rep.max_abs_dev) rep.max_abs_dev = dev;
    if (rel > rep.max_rel_dev) {
      rep.max_rel_dev = rel;
      rep.worst_case = where;
    }
  };

  NetworkState probe = s;
  for (int j = 0; j < s.h(); ++j) {
    if (col_near_kink[static_cast<std::size_t>(j)]) {
      rep.skipped += s.D();
      continue;
    }
    for (int d = 0; d < s.D(); ++d) {
      const double keep = probe.W(d, j);
      probe.W(d, j) = keep + h_step;
      const double up = loss_naive(probe, ds, lk);
      probe.W(d, j) = keep - h_step;
      const double dn = loss_naive(probe, ds, lk);
      probe.W(d, j) = keep;
      consider(g.gW(d, j), (up - dn) / (2.0 * h_step),
               "W(" + std::to_string(d) + "," + std::to_string(j) + ")");
    }
  }
  for (int j = 0; j < s.h(); ++j) {
    const double keep = probe.v[j];
    probe.v[j] = keep + h_step;
    const double up = loss_naive(probe, ds, lk);
    probe.v[j] = keep - h_step;
    const double dn = loss_naive(probe, ds, lk);
    probe.v[j] = keep;
    consider(g.gv[j], (up - dn) / (2.0 * h_step), "v(" + std::to_string(j) + ")");
  }
  return rep;
}

// --- path enumeration -------------------------------------------------------

namespace {

void guard_path_size(int n_plus, int n_minus) {
  if (n_plus < 0 || n_minus < 0) {
    throw PreconditionError("class counts must be nonnegative");
  }
  if (n_plus + n_minus > 10) {
    throw SizeGuardError(
        "path enumeration is exponential; refusing n_plus + n_minus > 10 "
        "(got " +
        std::to_string(n_plus + n_minus) + ")");
  }
}

void extend(std::vector<Path>& out, Path& cur, int n_plus, int n_minus) {
  const PathNode q = cur.nodes.back();
  if (q.k_plus == n_plus && q.k_minus == 0) {
    out.push_back(cur);
    return;  // no distinct monotone successor exists past the terminal
  }
  for (int kp = q.k_plus; kp <= n_plus; ++kp) {
    for (int km = q.k_minus; km >= 0; --km) {
      if (kp == q.k_plus && km == q.k_minus) continue;
      if (kp == 0 && km == 0) continue;
      cur.nodes.push_back({kp, km});
      extend(out, cur, n_plus, n_minus);
      cur.nodes.pop_back();
    }
  }
}

}  // namespace

std::vector<Path> enumerate_paths(int n_plus, int n_minus) {
  guard_path_size(n_plus, n_minus);
  std::vector<Path> out;
  for (int kp = 0; kp <= n_plus; ++kp) {
    for (int km = 0; km <= n_minus; ++km) {
      if (kp == 0 && km == 0) continue;
      Path cur;
      cur.n_plus = n_plus;
      cur.n_minus = n_minus;
      cur.nodes.push_back({kp, km});
      extend(out, cur, n_plus, n_minus);
    }
  }
  return out;
}

long long count_paths(int n_plus, int n_minus) {
  guard_path_size(n_plus, n_minus);
  // memoized count of valid completions from each node; the recursion in
  // enumerate_paths is deliberately not reused
  const int W = n_minus + 1;
  std::vector<long long> memo(static_cast<std::size_t>((n_plus + 1) * W), -1);
  auto idx = [W](int kp, int km) { return static_cast<std::size_t>(kp * W + km); };
  std::vector<std::pair<int, int>> order;
  for (int kp = n_plus; kp >= 0; --kp) {
    for (int km = 0; km <= n_minus; ++km) order.push_back({kp, km});
  }
  for (const auto& [kp, km] : order) {
    if (kp == 0 && km == 0) continue;
    long long total = (kp == n_plus && km == 0) ? 1 : 0;
    if (!(kp == n_plus && km == 0)) {
      for (int np = kp; np <= n_plus; ++np) {
        for (int nm = km; nm >= 0; --nm) {
          if (np == kp && nm == km) continue;
          if (np == 0 && nm == 0) continue;
          total += memo[idx(np, nm)];
        }
      }
    }
    memo[idx(kp, km)] = total;
  }
  long long grand = 0;
  for (int kp = 0; kp <= n_plus; ++kp) {
    for (int km = 0; km <= n_minus; ++km) {
      if (kp == 0 && km == 0) continue;
      grand += memo[idx(kp, km)];
    }
  }
  return grand;
}

double naive_travel_time(const Path& p, double c) {
  long double t = 0.0L;
  for (std::size_t l = 0; l + 1 < p.nodes.size(); ++l) {
    const long double occupied = p.nodes[l].k_plus + p.nodes[l].k_minus;
    t += 4.0L / (static_cast<long double>(c) * occupied);
  }
  return static_cast<double>(t);
}

MarginSweep sweep_margins_2d(const Dataset& ds, int grid) {
  if (ds.D != 2) {
    throw PreconditionError("sweep_margins_2d needs 2-dimensional data");
  }
  if (grid < 8) {
    throw PreconditionError("sweep_margins_2d needs a grid of at least 8");
  }
  MarginSweep sw;
  sw.grid = grid;

  Eigen::Vector2d x_plus = Eigen::Vector2d::Zero();
  Eigen::Vector2d x_minus = Eigen::Vector2d::Zero();
  for (int i = 0; i < ds.n; ++i) {
    (ds.y(i) > 0 ? x_plus : x_minus) += ds.x(i);
  }
  const bool has_pos = ds.n_plus() > 0;
  const bool has_neg = ds.n_minus() > 0;
  const double phi_plus = std::atan2(x_plus[1], x_plus[0]);
  const double phi_minus = std::atan2(x_minus[1], x_minus[0]);

  // hull of the signed data directions (all within a quarter turn of each
  // other when the coherence margin is positive)
  double k_lo = std::numeric_limits<double>::infinity();
  double k_hi = -std::numeric_limits<double>::infinity();
  const Eigen::Vector2d diff = x_plus - x_minus;
  const double kref = std::atan2(diff[1], diff[0]);
  for (int i = 0; i < ds.n; ++i) {
    const Eigen::Vector2d sx = ds.y(i) * ds.x(i);
    double psi = std::atan2(sx[1], sx[0]);
    psi += 2.0 * kPi * std::round((kref - psi) / (2.0 * kPi));
    k_lo = std::min(k_lo, psi);
    k_hi = std::max(k_hi, psi);
  }
  double r_plus = 0.5 * kPi;
  double r_minus = 0.5 * kPi;
  double best_cos = -1.0;
  for (int gidx = 0; gidx < grid; ++gidx) {
    const double theta = 2.0 * kPi * (gidx + 0.5) / grid;
    const Eigen::Vector2d z(std::cos(theta), std::sin(theta));
    int act_pos = 0, act_neg = 0;
    for (int i = 0; i < ds.n; ++i) {
      if (ds.x(i).dot(z) > 0.0) {
        ++(ds.y(i) > 0 ? act_pos : act_neg);
      }
    }
    const bool in_plus = act_pos == ds.n_plus() && act_neg == 0;
    const bool in_minus = act_neg == ds.n_minus() && act_pos == 0;
    if (has_pos && !in_plus) {
      r_plus = std::min(r_plus, angular_distance(theta, phi_plus));
    }
    if (has_neg && !in_minus) {
      r_minus = std::min(r_minus, angular_distance(theta, phi_minus));
    }
    if (!in_plus && !in_minus) {
      // max over u in [k_lo, k_hi] of |cos(theta - u)|: an endpoint, or 1 if a
      // multiple of pi falls inside the difference interval
      const double u1 = theta - k_hi;
      const double u2 = theta - k_lo;
      double m = std::max(std::fabs(std::cos(u1)), std::fabs(std::cos(u2)));
      if (std::ceil(u1 / kPi) <= std::floor(u2 / kPi)) m = 1.0;
      best_cos = std::max(best_cos, m);
    }
  }

  double z1 = std::numeric_limits<double>::infinity();
  if (has_pos) z1 = std::min(z1, std::pow(std::sin(r_plus), 2));
  if (has_neg) z1 = std::min(z1, std::pow(std::sin(r_minus), 2));
  sw.zeta1 = z1;
  sw.xi = best_cos < 0.0 ? 1.0 : 1.0 - best_cos * best_cos;
  return sw;
}

}  // namespace coneflow
