#include "coneflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "coneflow/parallel.hpp"
#include "coneflow/rng.hpp"

namespace coneflow {

const char* cone_label_name(ConeLabel l) {
  switch (l) {
    case ConeLabel::S_plus: return "S_plus";
    case ConeLabel::S_minus: return "S_minus";
    case ConeLabel::S_dead: return "S_dead";
    case ConeLabel::Other: return "Other";
  }
  return "?";
}

ConeMembership classify(const Eigen::VectorXd& w, const Dataset& ds) {
  ConeMembership m;
  for (int i : ds.I_plus) {
    if (ds.x(i).dot(w) > 0.0) ++m.activated_pos;
  }
  for (int i : ds.I_minus) {
    if (ds.x(i).dot(w) > 0.0) ++m.activated_neg;
  }
  // dead first: with an empty class the one-sided cone condition degenerates
  // into the dead condition, and dead wins
  if (m.activated_pos == 0 && m.activated_neg == 0) {
    m.label = ConeLabel::S_dead;
  } else if (m.activated_pos == ds.n_plus() && m.activated_neg == 0) {
    m.label = ConeLabel::S_plus;
  } else if (m.activated_neg == ds.n_minus() && m.activated_pos == 0) {
    m.label = ConeLabel::S_minus;
  } else {
    m.label = ConeLabel::Other;
  }
  return m;
}

Eigen::VectorXd x_a(const Eigen::VectorXd& w, const Dataset& ds,
                    double leaky_alpha) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(ds.D);
  for (int i = 0; i < ds.n; ++i) {
    const double z = ds.x(i).dot(w);
    if (z > 0.0) {
      r += ds.y(i) * ds.x(i);
    } else if (leaky_alpha != 0.0) {
      r += (leaky_alpha * ds.y(i)) * ds.x(i);
    }
  }
  return r;
}

int n_active(const Eigen::VectorXd& w, const Dataset& ds) {
  int c = 0;
  for (int i = 0; i < ds.n; ++i) {
    if (ds.x(i).dot(w) > 0.0) ++c;
  }
  return c;
}

double x_a_norm_lower_bound(const DataStats& st, int n_a) {
  if (n_a <= 0) return 0.0;
  return std::sqrt(st.mu) * n_a * st.X_min;
}

namespace {

// ---- exact 2-D machinery -------------------------------------------------
//
// Cones on the circle are single arcs [lo, hi] (unwrapped around a point known
// to lie strictly inside). Each end carries an openness flag: an end cut by a
// "must activate" constraint is open (the boundary direction is NOT in the
// cone), an end cut by a "must not activate" constraint is closed. The flags
// matter only for zero-width gaps between abutting cones, which is exactly the
// situation at perfectly antipodal data.

struct EndArc {
  double lo = 0.0, hi = 0.0;
  bool lo_open = false, hi_open = false;
};

double angle_of(const Eigen::VectorXd& v) { return std::atan2(v[1], v[0]); }

// unwrap angle a to the branch nearest ref
double unwrap_to(double a, double ref) {
  return a + 2.0 * kPi * std::round((ref - a) / (2.0 * kPi));
}

// Arc of directions activating exactly the positive class (side=+1) or
// exactly the negative class (side=-1). `ref` must lie strictly inside.
EndArc side_arc_2d(const Dataset& ds, int side, double ref) {
  EndArc arc;
  arc.lo = ref - kPi;  // will only shrink
  arc.hi = ref + kPi;
  for (int i = 0; i < ds.n; ++i) {
    const double phi = angle_of(ds.x(i));
    const bool must_activate = (ds.y(i) > 0) == (side > 0);
    // active half-circle is centered on phi; the forbidden one on phi+pi
    const double center =
        unwrap_to(must_activate ? phi : phi + kPi, ref);
    const double lo = center - 0.5 * kPi;
    const double hi = center + 0.5 * kPi;
    if (lo > arc.lo) {
      arc.lo = lo;
      arc.lo_open = must_activate;
    } else if (lo == arc.lo && must_activate) {
      arc.lo_open = true;  // tied cuts: excluded if any binding cut is strict
    }
    if (hi < arc.hi) {
      arc.hi = hi;
      arc.hi_open = must_activate;
    } else if (hi == arc.hi && must_activate) {
      arc.hi_open = true;
    }
  }
  return arc;
}

struct Piece {
  double lo = 0.0, hi = 0.0;
  bool lo_open = false, hi_open = false;
};

// normalize an arc into pieces inside [0, 2pi); wrap cuts are interior so the
// synthetic ends they introduce are closed
std::vector<Piece> normalize_pieces(const EndArc& a) {
  std::vector<Piece> out;
  double lo = wrap_2pi(a.lo);
  const double width = a.hi - a.lo;
  if (width >= 2.0 * kPi) {
    out.push_back({0.0, 2.0 * kPi, false, false});
    return out;
  }
  double hi = lo + width;
  if (hi <= 2.0 * kPi) {
    out.push_back({lo, hi, a.lo_open, a.hi_open});
  } else {
    out.push_back({lo, 2.0 * kPi, a.lo_open, false});
    out.push_back({0.0, hi - 2.0 * kPi, false, a.hi_open});
  }
  return out;
}

// complement of a union of pieces on [0, 2pi), keeping zero-width gaps when
// both neighboring ends are open (the shared boundary direction is uncovered)
std::vector<Piece> circle_complement(std::vector<Piece> ps) {
  std::vector<Piece> out;
  if (ps.empty()) {
    out.push_back({0.0, 2.0 * kPi, false, false});
    return out;
  }
  std::sort(ps.begin(), ps.end(),
            [](const Piece& x, const Piece& y) { return x.lo < y.lo; });
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const Piece& cur = ps[k];
    const Piece& nxt = ps[(k + 1) % ps.size()];
    double gap_lo = cur.hi;
    double gap_hi = nxt.lo + (k + 1 == ps.size() ? 2.0 * kPi : 0.0);
    if (gap_hi > gap_lo) {
      out.push_back({gap_lo, gap_hi, false, false});
    } else if (gap_hi == gap_lo && cur.hi_open && nxt.lo_open) {
      out.push_back({gap_lo, gap_lo, false, false});
    }
  }
  return out;
}

// max over a in [a1,a2], b in [b1,b2] of |cos(a-b)|
double max_abs_cos_between(double a1, double a2, double b1, double b2) {
  const double u1 = a1 - b2;
  const double u2 = a2 - b1;
  double best = std::max(std::fabs(std::cos(u1)), std::fabs(std::cos(u2)));
  // any multiple of pi inside [u1, u2] makes |cos| = 1 attainable
  if (std::ceil(u1 / kPi) <= std::floor(u2 / kPi)) best = 1.0;
  return best;
}

double cos_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.stableNorm();
  const double nb = b.stableNorm();
  return (a / na).dot(b / nb);
}

Margins margins_exact_2d(const Dataset& ds, const DataStats& st) {
  Margins m;
  m.method = Margins::Method::exact2d;

  const bool has_pos = ds.n_plus() > 0;
  const bool has_neg = ds.n_minus() > 0;
  // strictly-interior reference directions (class sum, or the antipode of the
  // other class sum when a side is empty and its cone is the dead cone)
  const double ref_plus =
      has_pos ? angle_of(st.x_plus) : angle_of(Eigen::VectorXd(-st.x_minus));
  const double ref_minus =
      has_neg ? angle_of(st.x_minus) : angle_of(Eigen::VectorXd(-st.x_plus));

  const EndArc plus_arc = side_arc_2d(ds, +1, ref_plus);
  const EndArc minus_arc = side_arc_2d(ds, -1, ref_minus);

  // zeta1: largest cap around the class sum that stays inside its cone
  double z1 = std::numeric_limits<double>::infinity();
  if (has_pos) {
    const double r =
        std::min({ref_plus - plus_arc.lo, plus_arc.hi - ref_plus, 0.5 * kPi});
    z1 = std::min(z1, std::pow(std::sin(r), 2));
  }
  if (has_neg) {
    const double r = std::min(
        {ref_minus - minus_arc.lo, minus_arc.hi - ref_minus, 0.5 * kPi});
    z1 = std::min(z1, std::pow(std::sin(r), 2));
  }
  m.zeta1 = z1;

  // data cone arc: signed directions all sit within pi/2 of their sum
  const double kref = angle_of(Eigen::VectorXd(st.x_plus - st.x_minus));
  double k_lo = std::numeric_limits<double>::infinity();
  double k_hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < ds.n; ++i) {
    const double psi =
        unwrap_to(angle_of(Eigen::VectorXd(ds.y(i) * ds.x(i))), kref);
    k_lo = std::min(k_lo, psi);
    k_hi = std::max(k_hi, psi);
  }

  std::vector<Piece> covered;
  for (const Piece& p : normalize_pieces(plus_arc)) covered.push_back(p);
  for (const Piece& p : normalize_pieces(minus_arc)) covered.push_back(p);
  const std::vector<Piece> gaps = circle_complement(std::move(covered));

  if (gaps.empty()) {
    m.xi = 1.0;
    m.xi_complement_empty = true;
  } else {
    double best = 0.0;
    for (const Piece& g : gaps) {
      // compare against both unwrapped copies of the gap nearest the cone arc
      const double mid = 0.5 * (g.lo + g.hi);
      const double shift = unwrap_to(mid, 0.5 * (k_lo + k_hi)) - mid;
      best = std::max(best, max_abs_cos_between(k_lo, k_hi, g.lo + shift,
                                                g.hi + shift));
      best = std::max(best, max_abs_cos_between(k_lo, k_hi,
                                                g.lo + shift - 2.0 * kPi,
                                                g.hi + shift - 2.0 * kPi));
      best = std::max(best, max_abs_cos_between(k_lo, k_hi,
                                                g.lo + shift + 2.0 * kPi,
                                                g.hi + shift + 2.0 * kPi));
    }
    m.xi = 1.0 - best * best;
  }
  return m;
}

// ---- sampled estimates (D > 2) -------------------------------------------

Eigen::VectorXd unit_gaussian(int D, Rng& rng) {
  Eigen::VectorXd z(D);
  double nrm = 0.0;
  do {
    for (int d = 0; d < D; ++d) z[d] = rng.gaussian();
    nrm = z.stableNorm();
  } while (nrm <= 1e-12);
  return z / nrm;
}

bool in_side_set(const ConeMembership& cm, const Dataset& ds, int side) {
  if (side > 0) return cm.activated_pos == ds.n_plus() && cm.activated_neg == 0;
  return cm.activated_neg == ds.n_minus() && cm.activated_pos == 0;
}

// walk a geodesic from `center` toward `dir` and bisect the exit from the
// side's cone; returns the exit angle (pi/2 cap) and the first outside point
double boundary_distance(const Eigen::VectorXd& center,
                         const Eigen::VectorXd& dir, const Dataset& ds,
                         int side, Eigen::VectorXd* outside_point) {
  double lo = 0.0, hi = 0.5 * kPi;
  auto probe = [&](double ang) {
    Eigen::VectorXd z = std::cos(ang) * center + std::sin(ang) * dir;
    return in_side_set(classify(z, ds), ds, side);
  };
  if (probe(hi)) return 0.5 * kPi;  // no exit within a quarter turn
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (probe(mid) ? lo : hi) = mid;
  }
  if (outside_point) {
    *outside_point = std::cos(hi) * center + std::sin(hi) * dir;
  }
  return lo;
}

Margins margins_sampled(const Dataset& ds, const DataStats& st, int samples,
                        uint64_t seed) {
  Margins m;
  m.method = Margins::Method::sampled;
  m.sample_count = samples;
  const int D = ds.D;

  const bool has_pos = ds.n_plus() > 0;
  const bool has_neg = ds.n_minus() > 0;
  const int rays = std::clamp(samples / 1000, 64, 256);

  std::vector<Eigen::VectorXd> near_boundary;
  double z1 = std::numeric_limits<double>::infinity();
  for (int side : {+1, -1}) {
    if ((side > 0 && !has_pos) || (side < 0 && !has_neg)) continue;
    const Eigen::VectorXd& xs = side > 0 ? st.x_plus : st.x_minus;
    const Eigen::VectorXd center = xs / xs.stableNorm();
    Rng rng(mix_seed(seed, side > 0 ? 11 : 13));
    std::vector<double> dist(static_cast<std::size_t>(rays));
    std::vector<Eigen::VectorXd> outs(static_cast<std::size_t>(rays));
    parallel_for(static_cast<std::size_t>(rays),
                 static_cast<std::size_t>(64) * ds.n * D, [&](std::size_t r) {
                   Rng ray_rng(mix_seed(seed, (side > 0 ? 1000 : 2000) + r));
                   Eigen::VectorXd dir = unit_gaussian(D, ray_rng);
                   dir -= center * center.dot(dir);
                   const double dn = dir.stableNorm();
                   if (dn <= 1e-12) {
                     dist[r] = 0.5 * kPi;
                     return;
                   }
                   dir /= dn;
                   Eigen::VectorXd out;
                   dist[r] = boundary_distance(center, dir, ds, side, &out);
                   outs[r] = out;
                 });
    double r_side = 0.5 * kPi;
    for (int r = 0; r < rays; ++r) {
      r_side = std::min(r_side, dist[static_cast<std::size_t>(r)]);
      if (outs[static_cast<std::size_t>(r)].size() > 0) {
        near_boundary.push_back(outs[static_cast<std::size_t>(r)]);
      }
    }
    z1 = std::min(z1, std::pow(std::sin(r_side), 2));
    (void)rng;
  }
  m.zeta1 = z1;

  // xi: uncovered directions vs. the data cone, sup over a candidate set of
  // cone directions (generators, class-sum difference, a few random mixes)
  std::vector<Eigen::VectorXd> cone_dirs;
  for (int i = 0; i < ds.n; ++i) {
    cone_dirs.push_back(ds.y(i) * ds.x(i) / ds.x_norms[i]);
  }
  {
    Eigen::VectorXd sum = st.x_plus - st.x_minus;
    const double sn = sum.stableNorm();
    if (sn > 0.0) cone_dirs.push_back(sum / sn);
    Rng rng(mix_seed(seed, 17));
    const int mixes = ds.n <= 32 ? 16 : 4;
    for (int k = 0; k < mixes; ++k) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(D);
      for (int i = 0; i < ds.n; ++i) {
        u += (-std::log(1.0 - rng.uniform())) * ds.y(i) * ds.x(i);
      }
      const double un = u.stableNorm();
      if (un > 0.0) cone_dirs.push_back(u / un);
    }
  }

  const int xi_samples = std::clamp(samples / 10, 1000, 4000);
  std::vector<double> best_per(static_cast<std::size_t>(xi_samples), -1.0);
  parallel_for(static_cast<std::size_t>(xi_samples),
               static_cast<std::size_t>(ds.n + 20) * D, [&](std::size_t k) {
                 Rng rng(mix_seed(seed, 3000 + k));
                 const Eigen::VectorXd z = unit_gaussian(D, rng);
                 const ConeMembership cm = classify(z, ds);
                 if (in_side_set(cm, ds, +1) || in_side_set(cm, ds, -1)) return;
                 double b = 0.0;
                 for (const auto& u : cone_dirs) {
                   b = std::max(b, std::fabs(u.dot(z)));
                 }
                 best_per[k] = b;
               });
  double best = -1.0;
  for (double b : best_per) best = std::max(best, b);
  for (const auto& z : near_boundary) {
    const ConeMembership cm = classify(z, ds);
    if (in_side_set(cm, ds, +1) || in_side_set(cm, ds, -1)) continue;
    double b = 0.0;
    for (const auto& u : cone_dirs) b = std::max(b, std::fabs(u.dot(z)));
    best = std::max(best, b);
  }
  if (best < 0.0) {
    m.xi = 1.0;
    m.xi_complement_empty = true;
  } else {
    m.xi = 1.0 - best * best;
  }
  return m;
}

}  // namespace

Margins estimate_margins(const Dataset& ds, const NetworkState& init,
                         int samples, uint64_t seed) {
  const DataStats st = compute_stats(ds);
  if (!(st.mu > 0.0)) {
    throw AssumptionFailedError(
        "coherence assumption failed: mu = " + fmt_g6(st.mu) +
        " (needs mu > 0); worst signed cosine over ordered point pairs");
  }
  if (init.D() != ds.D) {
    throw PreconditionError("estimate_margins: init dimension " +
                            std::to_string(init.D()) + " != dataset " +
                            std::to_string(ds.D));
  }

  Margins m = ds.D == 2 ? margins_exact_2d(ds, st)
                        : margins_sampled(ds, st, samples, seed);

  // zeta2 is a finite max over the initial directions; exact in any dimension
  const bool has_pos = ds.n_plus() > 0;
  const bool has_neg = ds.n_minus() > 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < init.h(); ++j) {
    const bool plus_tagged = init.sign_tags[j] > 0;
    const Eigen::VectorXd& target = plus_tagged ? st.x_minus : st.x_plus;
    if ((plus_tagged && !has_neg) || (!plus_tagged && !has_pos)) continue;
    const double c = cos_angle(init.W.col(j), target);
    if (c >= 1.0 - 1e-12) {
      throw AssumptionFailedError(
          "initial-direction assumption failed: neuron " + std::to_string(j) +
          " (tag " + (plus_tagged ? std::string("+1") : std::string("-1")) +
          ") starts aligned with the opposing class sum, cos = " + fmt_g17(c));
    }
    worst = std::max(worst, c);
  }
  m.zeta2 = worst <= 0.0 ? 1.0 : 1.0 - worst * worst;
  return m;
}

}  // namespace coneflow
