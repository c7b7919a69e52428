#include "coneflow/flow.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <utility>

#include "json.hpp"

namespace coneflow {

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::gained_activation: return "gained_activation";
    case EventKind::lost_activation: return "lost_activation";
    case EventKind::entered_S_plus: return "entered_S_plus";
    case EventKind::entered_S_minus: return "entered_S_minus";
    case EventKind::entered_S_dead: return "entered_S_dead";
    case EventKind::sign_flip_detected: return "sign_flip_detected";
  }
  return "?";
}

namespace {

// activation pattern, one bit per (neuron, point), flattened neuron-major
using Pattern = std::vector<uint64_t>;

int pattern_words(int n) { return (n + 63) / 64; }

Pattern compute_pattern(const NetworkState& s, const Dataset& ds) {
  const int words = pattern_words(ds.n);
  Pattern p(static_cast<std::size_t>(s.h()) * words, 0);
  for (int j = 0; j < s.h(); ++j) {
    for (int i = 0; i < ds.n; ++i) {
      if (ds.x(i).dot(s.W.col(j)) > 0.0) {
        p[static_cast<std::size_t>(j) * words + i / 64] |=
            uint64_t{1} << (i % 64);
      }
    }
  }
  return p;
}

struct Deriv {
  Eigen::MatrixXd dW;
  Eigen::VectorXd dv;
};

Deriv deriv_at(const NetworkState& s, const Dataset& ds, LossKind lk,
               const std::vector<char>& frozen) {
  LossGrads g = loss_and_grads(s, ds, lk);
  Deriv d{-g.gW, -g.gv};
  for (int j = 0; j < s.h(); ++j) {
    if (frozen[static_cast<std::size_t>(j)]) {
      d.dW.col(j).setZero();
      d.dv[j] = 0.0;
    }
  }
  return d;
}

NetworkState advance(const NetworkState& s, const Dataset& ds, LossKind lk,
                     StepMethod method, double dt,
                     const std::vector<char>& frozen) {
  NetworkState r = s;
  if (method == StepMethod::euler) {
    const Deriv d = deriv_at(s, ds, lk, frozen);
    r.W = s.W + dt * d.dW;
    r.v = s.v + dt * d.dv;
  } else {
    const Deriv k1 = deriv_at(s, ds, lk, frozen);
    NetworkState a = s;
    a.W = s.W + (0.5 * dt) * k1.dW;
    a.v = s.v + (0.5 * dt) * k1.dv;
    const Deriv k2 = deriv_at(a, ds, lk, frozen);
    NetworkState b = s;
    b.W = s.W + (0.5 * dt) * k2.dW;
    b.v = s.v + (0.5 * dt) * k2.dv;
    const Deriv k3 = deriv_at(b, ds, lk, frozen);
    NetworkState c = s;
    c.W = s.W + dt * k3.dW;
    c.v = s.v + dt * k3.dv;
    const Deriv k4 = deriv_at(c, ds, lk, frozen);
    r.W = s.W + (dt / 6.0) * (k1.dW + 2.0 * k2.dW + 2.0 * k3.dW + k4.dW);
    r.v = s.v + (dt / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  }
  // frozen columns are copied through so they stay bitwise constant
  for (int j = 0; j < s.h(); ++j) {
    if (frozen[static_cast<std::size_t>(j)]) {
      r.W.col(j) = s.W.col(j);
      r.v[j] = s.v[j];
    }
  }
  return r;
}

// Derivative of the smooth piece selected by a fixed activation pattern: the
// slope indicators come from `pat` instead of the state's own inner products.
// Inside the region the two agree; past the boundary this is the smooth
// extension of the region's field. advance() re-derives the indicators at
// every internal stage, so near a crossing the stepped state jumps as a
// function of dt (a stage flips sides and the whole stage derivative changes);
// the pinned field has no such jump, which is what lets the bisection below
// push the flipped inner products inside the tolerance band.
Deriv deriv_pinned(const NetworkState& s, const Dataset& ds, LossKind lk,
                   const std::vector<char>& frozen, const Pattern& pat) {
  const int words = pattern_words(ds.n);
  const auto on_bit = [&](int j, int i) -> bool {
    return (pat[static_cast<std::size_t>(j) * words + i / 64] >> (i % 64)) & 1;
  };
  Deriv d{Eigen::MatrixXd::Zero(s.D(), s.h()),
          Eigen::VectorXd::Zero(s.h())};
  std::vector<double> g(static_cast<std::size_t>(ds.n));
  for (int i = 0; i < ds.n; ++i) {
    double yhat = 0.0;
    for (int j = 0; j < s.h(); ++j) {
      const double z = ds.x(i).dot(s.W.col(j));
      yhat += s.v[j] * (on_bit(j, i) ? z : s.leaky_alpha * z);
    }
    g[static_cast<std::size_t>(i)] = loss_dyhat(ds.y(i), yhat, lk);
  }
  for (int j = 0; j < s.h(); ++j) {
    if (frozen[static_cast<std::size_t>(j)]) continue;
    double gv = 0.0;
    for (int i = 0; i < ds.n; ++i) {
      const double slope = on_bit(j, i) ? 1.0 : s.leaky_alpha;
      if (slope == 0.0) continue;
      const double gi = g[static_cast<std::size_t>(i)];
      d.dW.col(j) -= (gi * slope * s.v[j]) * ds.x(i);
      gv += gi * slope * ds.x(i).dot(s.W.col(j));
    }
    d.dv[j] = -gv;
  }
  return d;
}

NetworkState advance_pinned(const NetworkState& s, const Dataset& ds,
                            LossKind lk, StepMethod method, double dt,
                            const std::vector<char>& frozen,
                            const Pattern& pat) {
  NetworkState r = s;
  if (method == StepMethod::euler) {
    const Deriv d = deriv_pinned(s, ds, lk, frozen, pat);
    r.W = s.W + dt * d.dW;
    r.v = s.v + dt * d.dv;
  } else {
    const Deriv k1 = deriv_pinned(s, ds, lk, frozen, pat);
    NetworkState a = s;
    a.W = s.W + (0.5 * dt) * k1.dW;
    a.v = s.v + (0.5 * dt) * k1.dv;
    const Deriv k2 = deriv_pinned(a, ds, lk, frozen, pat);
    NetworkState b = s;
    b.W = s.W + (0.5 * dt) * k2.dW;
    b.v = s.v + (0.5 * dt) * k2.dv;
    const Deriv k3 = deriv_pinned(b, ds, lk, frozen, pat);
    NetworkState c = s;
    c.W = s.W + dt * k3.dW;
    c.v = s.v + dt * k3.dv;
    const Deriv k4 = deriv_pinned(c, ds, lk, frozen, pat);
    r.W = s.W + (dt / 6.0) * (k1.dW + 2.0 * k2.dW + 2.0 * k3.dW + k4.dW);
    r.v = s.v + (dt / 6.0) * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  }
  for (int j = 0; j < s.h(); ++j) {
    if (frozen[static_cast<std::size_t>(j)]) {
      r.W.col(j) = s.W.col(j);
      r.v[j] = s.v[j];
    }
  }
  return r;
}

Snapshot make_snapshot(const NetworkState& s, const Dataset& ds, LossKind lk,
                       double t) {
  Snapshot sn;
  sn.t = t;
  sn.W = s.W;
  sn.v = s.v;
  sn.loss = loss_and_grads(s, ds, lk).loss;
  double mx = 0.0;
  for (int i = 0; i < ds.n; ++i) {
    mx = std::max(mx, std::fabs(forward(s, ds.x(i))));
  }
  sn.max_abs_out = mx;
  sn.balance_residual = balance_residual(s);
  const int words = pattern_words(ds.n);
  sn.neurons.resize(static_cast<std::size_t>(s.h()));
  for (int j = 0; j < s.h(); ++j) {
    NeuronSummary& nu = sn.neurons[static_cast<std::size_t>(j)];
    nu.norm = column_norm(s.W, j);
    nu.v = s.v[j];
    nu.label = classify(s.W.col(j), ds).label;
    nu.act.assign(static_cast<std::size_t>(words), 0);
    for (int i = 0; i < ds.n; ++i) {
      if (ds.x(i).dot(s.W.col(j)) > 0.0) {
        nu.act[static_cast<std::size_t>(i / 64)] |= uint64_t{1} << (i % 64);
      }
    }
  }
  return sn;
}

struct Tracker {
  Pattern pat;
  std::vector<ConeLabel> labels;
  std::vector<char> frozen;
};

std::vector<ConeLabel> labels_of(const NetworkState& s, const Dataset& ds) {
  std::vector<ConeLabel> out(static_cast<std::size_t>(s.h()));
  for (int j = 0; j < s.h(); ++j) {
    out[static_cast<std::size_t>(j)] = classify(s.W.col(j), ds).label;
  }
  return out;
}

// emit activation / cone-entry / sign-flip events for a committed transition
void process_committed(TrajectoryRecord& rec, Tracker& tk,
                       const NetworkState& prev, const NetworkState& cur,
                       const Dataset& ds, double t, bool flow_mode,
                       bool freeze_dead) {
  const int words = pattern_words(ds.n);
  const Pattern np = compute_pattern(cur, ds);
  for (int j = 0; j < cur.h(); ++j) {
    for (int w = 0; w < words; ++w) {
      const std::size_t idx = static_cast<std::size_t>(j) * words + w;
      uint64_t diff = np[idx] ^ tk.pat[idx];
      while (diff != 0) {
        const int bit = std::countr_zero(diff);
        diff &= diff - 1;
        const int i = w * 64 + bit;
        const bool now_on = (np[idx] >> bit) & 1;
        rec.events.push_back({t, j,
                              now_on ? EventKind::gained_activation
                                     : EventKind::lost_activation,
                              i});
      }
    }
  }
  tk.pat = np;

  const std::vector<ConeLabel> nl = labels_of(cur, ds);
  for (int j = 0; j < cur.h(); ++j) {
    const std::size_t ju = static_cast<std::size_t>(j);
    if (nl[ju] != tk.labels[ju]) {
      switch (nl[ju]) {
        case ConeLabel::S_plus:
          rec.events.push_back({t, j, EventKind::entered_S_plus, -1});
          break;
        case ConeLabel::S_minus:
          rec.events.push_back({t, j, EventKind::entered_S_minus, -1});
          break;
        case ConeLabel::S_dead:
          rec.events.push_back({t, j, EventKind::entered_S_dead, -1});
          // with a hard zero slope a dead neuron's gradient vanishes
          // identically, so the column can be pinned outright
          if (flow_mode && freeze_dead && cur.leaky_alpha == 0.0) {
            tk.frozen[ju] = 1;
          }
          break;
        case ConeLabel::Other:
          break;
      }
    }
    if (prev.v[j] * cur.v[j] < 0.0) {
      rec.events.push_back({t, j, EventKind::sign_flip_detected, -1});
      if (flow_mode) rec.sign_flip_flagged = true;
    }
  }
  tk.labels = nl;
}

bool check_abort(TrajectoryRecord& rec, const NetworkState& s,
                 const Dataset& ds, double t) {
  if (!s.W.allFinite() || !s.v.allFinite()) {
    rec.aborted = true;
    rec.abort_reason = "nonfinite parameter value at t=" + fmt_g6(t);
    return true;
  }
  double mx = 0.0;
  for (int i = 0; i < ds.n; ++i) {
    mx = std::max(mx, std::fabs(forward(s, ds.x(i))));
  }
  if (mx > kExpAbortThreshold) {
    rec.aborted = true;
    rec.abort_reason = "loss exponent guard tripped at t=" + fmt_g6(t) +
                       ": max_i |f(x_i)| = " + fmt_g6(mx) + " exceeds " +
                       fmt_g6(kExpAbortThreshold);
    return true;
  }
  return false;
}

void push_snapshot(TrajectoryRecord& rec, const NetworkState& s,
                   const Dataset& ds, LossKind lk, double t) {
  if (!rec.snapshots.empty() && rec.snapshots.back().t == t) {
    rec.snapshots.back() = make_snapshot(s, ds, lk, t);
    return;
  }
  rec.snapshots.push_back(make_snapshot(s, ds, lk, t));
}

void validate_integrator_inputs(const NetworkState& s0, const Dataset& ds,
                                const IntegratorConfig& cfg) {
  if (s0.D() != ds.D) {
    throw PreconditionError("integrate: state dimension " +
                            std::to_string(s0.D()) + " != dataset " +
                            std::to_string(ds.D));
  }
  if (!(cfg.step > 0.0) || !std::isfinite(cfg.step)) {
    throw PreconditionError("integrate: step must be positive and finite");
  }
  if (!(cfg.max_time >= 0.0) || !std::isfinite(cfg.max_time)) {
    throw PreconditionError("integrate: max_time must be nonnegative");
  }
  if (!(cfg.event_tolerance > 0.0)) {
    throw PreconditionError("integrate: event_tolerance must be positive");
  }
  if (cfg.mode == FlowMode::gradient_descent && !(cfg.gd_step > 0.0)) {
    throw PreconditionError("integrate: gd_step must be positive");
  }
}

void integrate_flow(TrajectoryRecord& rec, NetworkState& s, const Dataset& ds,
                    LossKind lk, const IntegratorConfig& cfg,
                    double snapshot_every, Tracker& tk) {
  const double T = cfg.max_time;
  double t = 0.0;
  // cadence boundaries are k * snapshot_every, tracked by index so that
  // roundoff accumulated in t can never skip one or hit one twice
  double boundary_index = 1.0;
  while (t < T && !rec.aborted) {
    double target = T;
    if (snapshot_every > 0.0) {
      double boundary = boundary_index * snapshot_every;
      while (boundary <= t) {
        boundary_index += 1.0;
        boundary = boundary_index * snapshot_every;
      }
      if (boundary < T) target = boundary;
    }
    const double remaining = target - t;
    const double dt_prop = std::min(cfg.step, remaining);
    const bool hits_target = dt_prop >= remaining;

    NetworkState trial = advance(s, ds, lk, cfg.method, dt_prop, tk.frozen);
    Pattern p_trial = compute_pattern(trial, ds);

    if (p_trial == tk.pat) {
      const NetworkState prev = std::move(s);
      s = std::move(trial);
      t = hits_target ? target : t + dt_prop;
      s.t = t;
      // labels cannot change without an activation flip, but v can cross zero
      for (int j = 0; j < s.h(); ++j) {
        if (prev.v[j] * s.v[j] < 0.0) {
          rec.events.push_back({t, j, EventKind::sign_flip_detected, -1});
          rec.sign_flip_flagged = true;
        }
      }
      if (check_abort(rec, s, ds, t)) {
        push_snapshot(rec, s, ds, lk, t);
        return;
      }
      if (hits_target || t >= T) {
        push_snapshot(rec, s, ds, lk, t);
      }
      continue;
    }

    // a flip happened inside (t, t+dt_prop]. Localization runs on the pinned
    // field (see deriv_pinned): the stepped state is then continuous in dt,
    // so shrinking from the same base state drives every flipped inner
    // product inside the tolerance band instead of stalling on the jump the
    // stage-local indicators introduce.
    //
    // Only genuine crossings are localized: bits whose base inner product is
    // already inside the band sit on the facet itself (a previous commit put
    // them there). When the fields on both sides point into the facet the
    // trajectory slides along it and such a bit re-flips at every dt however
    // small; bisecting on it would shrink the step to nothing and stall the
    // integration. Those departures instead commit at full step length with
    // the stale slope, and the tracker resync records which side the state
    // actually landed on.
    double lo = 0.0;
    double hi = dt_prop;
    NetworkState s_hi =
        advance_pinned(s, ds, lk, cfg.method, dt_prop, tk.frozen, tk.pat);
    Pattern p_hi = compute_pattern(s_hi, ds);
    const int words = pattern_words(ds.n);

    if (p_hi == tk.pat) {
      // the region-consistent step never leaves the region; the trial step
      // only grazed the boundary through a stage. Commit it as a plain step
      // (the committed pattern still matches the tracker, so the next
      // iteration starts from a consistent base).
      const NetworkState prev = std::move(s);
      s = std::move(s_hi);
      t = hits_target ? target : t + dt_prop;
      s.t = t;
      for (int j = 0; j < s.h(); ++j) {
        if (prev.v[j] * s.v[j] < 0.0) {
          rec.events.push_back({t, j, EventKind::sign_flip_detected, -1});
          rec.sign_flip_flagged = true;
        }
      }
      if (check_abort(rec, s, ds, t)) {
        push_snapshot(rec, s, ds, lk, t);
        return;
      }
      if (hits_target || t >= T) {
        push_snapshot(rec, s, ds, lk, t);
      }
      continue;
    }

    const auto base_off_facet = [&](int j, int i) -> bool {
      const double zb = ds.x(i).dot(s.W.col(j));
      const double band = cfg.event_tolerance *
                          ds.x_norms[static_cast<std::size_t>(i)] *
                          column_norm(s.W, j);
      return std::fabs(zb) > band;
    };
    const auto has_crossing = [&](const Pattern& p) -> bool {
      for (int j = 0; j < s.h(); ++j) {
        for (int w = 0; w < words; ++w) {
          const std::size_t idx = static_cast<std::size_t>(j) * words + w;
          uint64_t diff = p[idx] ^ tk.pat[idx];
          while (diff != 0) {
            const int bit = std::countr_zero(diff);
            diff &= diff - 1;
            if (base_off_facet(j, w * 64 + bit)) return true;
          }
        }
      }
      return false;
    };

    if (has_crossing(p_hi)) {
      for (int it = 0; it < 60; ++it) {
        bool within_band = true;
        for (int j = 0; j < s_hi.h() && within_band; ++j) {
          for (int w = 0; w < words && within_band; ++w) {
            const std::size_t idx = static_cast<std::size_t>(j) * words + w;
            uint64_t diff = p_hi[idx] ^ tk.pat[idx];
            while (diff != 0) {
              const int bit = std::countr_zero(diff);
              diff &= diff - 1;
              const int i = w * 64 + bit;
              if (!base_off_facet(j, i)) continue;  // departure, not an event
              const double z = ds.x(i).dot(s_hi.W.col(j));
              const double band = cfg.event_tolerance *
                                  ds.x_norms[static_cast<std::size_t>(i)] *
                                  column_norm(s_hi.W, j);
              if (std::fabs(z) > band) {
                within_band = false;
                break;
              }
            }
          }
        }
        if (within_band) break;
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo) || !(mid < hi)) break;  // step fraction exhausted
        NetworkState s_mid =
            advance_pinned(s, ds, lk, cfg.method, mid, tk.frozen, tk.pat);
        Pattern p_mid = compute_pattern(s_mid, ds);
        if (has_crossing(p_mid)) {
          hi = mid;
          s_hi = std::move(s_mid);
          p_hi = std::move(p_mid);
        } else {
          lo = mid;
        }
      }
    }

    const NetworkState prev = std::move(s);
    s = std::move(s_hi);
    t = (hits_target && hi == dt_prop) ? target : t + hi;
    s.t = t;
    process_committed(rec, tk, prev, s, ds, t, true, cfg.freeze_dead);
    if (check_abort(rec, s, ds, t)) {
      push_snapshot(rec, s, ds, lk, t);
      return;
    }
    push_snapshot(rec, s, ds, lk, t);
  }
}

void integrate_descent(TrajectoryRecord& rec, NetworkState& s,
                       const Dataset& ds, LossKind lk,
                       const IntegratorConfig& cfg, double snapshot_every,
                       Tracker& tk) {
  const double lr = cfg.gd_step;
  const long total =
      static_cast<long>(std::floor(cfg.max_time / lr + 1e-9));
  long last_bucket = 0;
  for (long iter = 1; iter <= total && !rec.aborted; ++iter) {
    const Deriv d = deriv_at(s, ds, lk, tk.frozen);
    const NetworkState prev = s;
    s.W += lr * d.dW;
    s.v += lr * d.dv;
    const double t = static_cast<double>(iter) * lr;
    s.t = t;
    process_committed(rec, tk, prev, s, ds, t, false, cfg.freeze_dead);
    if (check_abort(rec, s, ds, t)) {
      push_snapshot(rec, s, ds, lk, t);
      return;
    }
    long bucket = last_bucket;
    if (snapshot_every > 0.0) {
      bucket = static_cast<long>(std::floor(t / snapshot_every + 1e-9));
    }
    if (bucket != last_bucket || iter == total) {
      push_snapshot(rec, s, ds, lk, t);
      last_bucket = bucket;
    }
  }
}

}  // namespace

TrajectoryRecord integrate(const NetworkState& s0, const Dataset& ds,
                           LossKind lk, const IntegratorConfig& cfg,
                           double snapshot_every) {
  validate_integrator_inputs(s0, ds, cfg);
  TrajectoryRecord rec;
  rec.initial = s0;
  rec.cfg = cfg;
  rec.loss_kind = lk;
  rec.snapshot_every = snapshot_every;

  NetworkState s = s0;
  s.t = 0.0;
  Tracker tk;
  tk.pat = compute_pattern(s, ds);
  tk.labels = labels_of(s, ds);
  tk.frozen.assign(static_cast<std::size_t>(s.h()), 0);
  if (cfg.mode == FlowMode::gradient_flow && cfg.freeze_dead &&
      s.leaky_alpha == 0.0) {
    for (int j = 0; j < s.h(); ++j) {
      if (tk.labels[static_cast<std::size_t>(j)] == ConeLabel::S_dead) {
        tk.frozen[static_cast<std::size_t>(j)] = 1;
      }
    }
  }

  if (check_abort(rec, s, ds, 0.0)) {
    push_snapshot(rec, s, ds, lk, 0.0);
    return rec;
  }
  push_snapshot(rec, s, ds, lk, 0.0);

  if (cfg.mode == FlowMode::gradient_flow) {
    integrate_flow(rec, s, ds, lk, cfg, snapshot_every, tk);
  } else {
    integrate_descent(rec, s, ds, lk, cfg, snapshot_every, tk);
  }
  if (!rec.aborted) {
    push_snapshot(rec, s, ds, lk, s.t);
  }
  return rec;
}

TrajectoryRecord reference_integrate(const NetworkState& s0, const Dataset& ds,
                                     LossKind lk, double fine_step,
                                     double max_time) {
  IntegratorConfig cfg;
  cfg.method = StepMethod::rk4;
  cfg.step = fine_step;
  cfg.max_time = max_time;
  cfg.mode = FlowMode::gradient_flow;
  validate_integrator_inputs(s0, ds, cfg);

  TrajectoryRecord rec;
  rec.initial = s0;
  rec.cfg = cfg;
  rec.loss_kind = lk;
  rec.snapshot_every = fine_step;

  NetworkState s = s0;
  s.t = 0.0;
  const std::vector<char> frozen(static_cast<std::size_t>(s.h()), 0);
  if (check_abort(rec, s, ds, 0.0)) {
    push_snapshot(rec, s, ds, lk, 0.0);
    return rec;
  }
  push_snapshot(rec, s, ds, lk, 0.0);
  const long steps =
      static_cast<long>(std::floor(max_time / fine_step + 1e-9));
  for (long k = 1; k <= steps && !rec.aborted; ++k) {
    s = advance(s, ds, lk, StepMethod::rk4, fine_step, frozen);
    const double t = static_cast<double>(k) * fine_step;
    s.t = t;
    if (check_abort(rec, s, ds, t)) {
      push_snapshot(rec, s, ds, lk, t);
      return rec;
    }
    push_snapshot(rec, s, ds, lk, t);
  }
  return rec;
}

std::string trajectory_to_ndjson(const TrajectoryRecord& rec) {
  std::string out;
  std::size_t ei = 0;
  for (const Snapshot& sn : rec.snapshots) {
    nlohmann::ordered_json line;
    line["t"] = sn.t;
    line["loss"] = sn.loss;
    line["max_abs_out"] = sn.max_abs_out;
    line["balance_residual"] = sn.balance_residual;
    nlohmann::ordered_json neurons = nlohmann::ordered_json::array();
    for (const NeuronSummary& nu : sn.neurons) {
      nlohmann::ordered_json jn;
      jn["norm"] = nu.norm;
      jn["v"] = nu.v;
      jn["label"] = cone_label_name(nu.label);
      jn["act"] = nu.act;
      neurons.push_back(std::move(jn));
    }
    line["neurons"] = std::move(neurons);
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    while (ei < rec.events.size() && rec.events[ei].time <= sn.t) {
      const FlowEvent& ev = rec.events[ei];
      nlohmann::ordered_json je;
      je["t"] = ev.time;
      je["neuron"] = ev.neuron;
      je["kind"] = event_kind_name(ev.kind);
      je["data_index"] = ev.data_index;
      events.push_back(std::move(je));
      ++ei;
    }
    line["events"] = std::move(events);
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace coneflow
