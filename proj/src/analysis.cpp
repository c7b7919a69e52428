#include "coneflow/analysis.hpp"

#include <Eigen/SVD>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

namespace coneflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

NetworkState state_at(const TrajectoryRecord& rec, const Snapshot& sn) {
  NetworkState s = rec.initial;
  s.W = sn.W;
  s.v = sn.v;
  s.t = sn.t;
  return s;
}

double label_code(ConeLabel l) {
  switch (l) {
    case ConeLabel::S_plus: return 0.0;
    case ConeLabel::S_minus: return 1.0;
    case ConeLabel::S_dead: return 2.0;
    case ConeLabel::Other: return 3.0;
  }
  return 3.0;
}

double event_code(EventKind k) {
  switch (k) {
    case EventKind::gained_activation: return 0.0;
    case EventKind::lost_activation: return 1.0;
    case EventKind::entered_S_plus: return 2.0;
    case EventKind::entered_S_minus: return 3.0;
    case EventKind::entered_S_dead: return 4.0;
    case EventKind::sign_flip_detected: return 5.0;
  }
  return -1.0;
}

bool terminal_label(ConeLabel l) {
  return l == ConeLabel::S_plus || l == ConeLabel::S_minus ||
         l == ConeLabel::S_dead;
}

}  // namespace

double directional_error(const NetworkState& s, const Dataset& ds,
                         LossKind lk) {
  if (s.D() != ds.D) {
    throw PreconditionError("directional_error: dimension mismatch");
  }
  const LossGrads g = loss_and_grads(s, ds, lk);
  double worst = 0.0;
  for (int j = 0; j < s.h(); ++j) {
    const double wn = column_norm(s.W, j);
    if (wn == 0.0) continue;  // no direction to speak of
    const Eigen::VectorXd u = s.W.col(j) / wn;
    // divide by the norm before projecting so subnormal-scale columns never
    // push intermediate values below the representable range
    const Eigen::VectorXd a = -g.gW.col(j) / wn;
    const Eigen::VectorXd a_perp = a - u * u.dot(a);
    const Eigen::VectorXd b = x_a(s.W.col(j), ds, s.leaky_alpha);
    const Eigen::VectorXd b_perp = b - u * u.dot(b);
    const double tag = s.sign_tags[static_cast<std::size_t>(j)] > 0 ? 1.0 : -1.0;
    const double err = (a_perp - tag * b_perp).stableNorm();
    worst = std::max(worst, err);
  }
  return worst;
}

ArrivalReport arrival_times(const TrajectoryRecord& rec) {
  ArrivalReport rep;
  if (rec.snapshots.empty()) return rep;
  const std::size_t h = rec.snapshots.front().neurons.size();
  rep.per_neuron.assign(h, kInf);
  rep.destination.assign(h, ConeLabel::Other);
  // a neuron may pass through a cone whose sign does not match its output
  // weight (nothing pins it there), so arrival means the label it ends the
  // record with, dated from its last label change
  std::vector<ConeLabel> cur(h, ConeLabel::Other);
  std::vector<double> settled_at(h, 0.0);
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    const Snapshot& sn = rec.snapshots[k];
    for (std::size_t j = 0; j < h; ++j) {
      if (k == 0 || sn.neurons[j].label != cur[j]) {
        cur[j] = sn.neurons[j].label;
        settled_at[j] = sn.t;
      }
    }
  }
  rep.all_arrived = true;
  double t1 = 0.0;
  for (std::size_t j = 0; j < h; ++j) {
    rep.destination[j] = cur[j];
    if (terminal_label(cur[j])) {
      rep.per_neuron[j] = settled_at[j];
      t1 = std::max(t1, settled_at[j]);
    } else {
      rep.all_arrived = false;
    }
  }
  rep.t1 = h == 0 ? 0.0 : t1;
  return rep;
}

RateReport rate_fit(const TrajectoryRecord& rec, const Dataset& ds,
                    const TheoryBounds& bounds, double slack) {
  RateReport rep;
  if (rec.snapshots.empty()) return rep;
  const bool side_plus = ds.n_plus() > 0;
  const bool side_minus = ds.n_minus() > 0;
  rep.applicable = side_plus || side_minus;
  if (!rep.applicable) return rep;

  // f_side(x_i) = sum over neurons currently in that cone of v_j <w_j, x_i>;
  // the side triggers when it exceeds 1/4 on its own data
  std::size_t k2 = rec.snapshots.size();
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    const Snapshot& sn = rec.snapshots[k];
    for (int side = 0; side < 2; ++side) {
      const bool plus = side == 0;
      if (plus && (!side_plus || rep.t2_plus != kInf)) continue;
      if (!plus && (!side_minus || rep.t2_minus != kInf)) continue;
      const ConeLabel want = plus ? ConeLabel::S_plus : ConeLabel::S_minus;
      const std::vector<int>& idx = plus ? ds.I_plus : ds.I_minus;
      double mx = 0.0;
      for (int i : idx) {
        double f = 0.0;
        for (std::size_t j = 0; j < sn.neurons.size(); ++j) {
          if (sn.neurons[j].label != want) continue;
          f += sn.v[static_cast<int>(j)] *
               sn.W.col(static_cast<int>(j)).dot(ds.x(i));
        }
        mx = std::max(mx, std::fabs(f));
      }
      if (mx > 0.25) {
        (plus ? rep.t2_plus : rep.t2_minus) = sn.t;
      }
    }
    const bool plus_done = !side_plus || rep.t2_plus != kInf;
    const bool minus_done = !side_minus || rep.t2_minus != kInf;
    if (plus_done && minus_done) {
      k2 = k;
      break;
    }
  }
  rep.triggered = k2 < rec.snapshots.size();
  if (!rep.triggered) return rep;
  rep.t2 = std::max(side_plus ? rep.t2_plus : 0.0,
                    side_minus ? rep.t2_minus : 0.0);

  const double L2 = rec.snapshots[k2].loss;
  const double alpha = bounds.alpha_rate;
  rep.rate_ok = true;
  for (std::size_t k = k2; k < rec.snapshots.size(); ++k) {
    const Snapshot& sn = rec.snapshots[k];
    const double envelope = L2 / (L2 * alpha * (sn.t - rep.t2) + 1.0);
    if (envelope <= 0.0) continue;
    const double ratio = sn.loss / envelope;
    rep.worst_ratio = std::max(rep.worst_ratio, ratio);
    if (ratio > 1.0 + slack) rep.rate_ok = false;
  }
  return rep;
}

double spectral_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  const double scale = A.cwiseAbs().maxCoeff();
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A / scale);
  return scale * svd.singularValues()(0);
}

double stable_rank(const Eigen::MatrixXd& W) {
  const double s = spectral_norm(W);
  if (s == 0.0) return 0.0;
  const double f = W.stableNorm();  // Frobenius over the flattened matrix
  const double r = f / s;
  return r * r;
}

ConservationReport low_rank_residual(const TrajectoryRecord& rec) {
  ConservationReport rep;
  const ArrivalReport arr = arrival_times(rec);
  if (!arr.all_arrived || rec.snapshots.empty()) return rep;
  std::size_t k1 = rec.snapshots.size();
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    if (rec.snapshots[k].t >= arr.t1) {
      k1 = k;
      break;
    }
  }
  if (k1 == rec.snapshots.size()) return rep;
  std::vector<int> cols;
  const Snapshot& base = rec.snapshots[k1];
  for (std::size_t j = 0; j < base.neurons.size(); ++j) {
    if (base.neurons[j].label == ConeLabel::S_plus) {
      cols.push_back(static_cast<int>(j));
    }
  }
  if (cols.empty()) return rep;
  rep.applicable = true;

  auto invariant_norm = [&cols](const Snapshot& sn) {
    const int m = static_cast<int>(cols.size());
    Eigen::MatrixXd Wp(sn.W.rows(), m);
    Eigen::VectorXd vp(m);
    for (int c = 0; c < m; ++c) {
      Wp.col(c) = sn.W.col(cols[static_cast<std::size_t>(c)]);
      vp[c] = sn.v[cols[static_cast<std::size_t>(c)]];
    }
    const Eigen::MatrixXd M = Wp.transpose() * Wp - vp * vp.transpose();
    return spectral_norm(M);
  };
  const double ref = invariant_norm(base);
  double worst = 0.0;
  for (std::size_t k = k1; k < rec.snapshots.size(); ++k) {
    worst = std::max(worst, std::fabs(invariant_norm(rec.snapshots[k]) - ref));
  }
  rep.residual = worst;
  return rep;
}

PhaseCurves phase_diagnostics(const TrajectoryRecord& rec, const Dataset& ds) {
  PhaseCurves pc;
  for (const Snapshot& sn : rec.snapshots) {
    const NetworkState s = state_at(rec, sn);
    const LossGrads g = loss_and_grads(s, ds, rec.loss_kind);
    double norm_term = 0.0;
    double dir_term = 0.0;
    for (int j = 0; j < s.h(); ++j) {
      norm_term += 2.0 * (-g.gW.col(j)).dot(s.W.col(j));
      const double wn = column_norm(s.W, j);
      if (wn == 0.0) continue;
      const Eigen::VectorXd u = s.W.col(j) / wn;
      const Eigen::VectorXd a = -g.gW.col(j) / wn;
      dir_term += (a - u * u.dot(a)).stableNorm();
    }
    pc.t.push_back(sn.t);
    pc.norm_term.push_back(norm_term);
    pc.dir_term.push_back(dir_term);
  }
  return pc;
}

AlignmentCurves alignment_curves(const TrajectoryRecord& rec,
                                 const Dataset& ds) {
  AlignmentCurves ac;
  if (rec.snapshots.empty()) return ac;
  const DataStats st = compute_stats(ds);
  ac.plus_applicable = ds.n_plus() > 0;
  ac.minus_applicable = ds.n_minus() > 0;
  const double xp_norm = ac.plus_applicable ? st.x_plus.stableNorm() : 0.0;
  const double xm_norm = ac.minus_applicable ? st.x_minus.stableNorm() : 0.0;
  const bool by_current_sign = rec.cfg.mode == FlowMode::gradient_descent;

  for (const Snapshot& sn : rec.snapshots) {
    ac.t.push_back(sn.t);
    for (int side = 0; side < 2; ++side) {
      const bool plus = side == 0;
      if ((plus && !ac.plus_applicable) || (!plus && !ac.minus_applicable)) {
        continue;
      }
      const Eigen::VectorXd target =
          plus ? st.x_plus / xp_norm : st.x_minus / xm_norm;
      double sum = 0.0, mn = kInf, mx = -kInf;
      int count = 0;
      for (int j = 0; j < sn.W.cols(); ++j) {
        const int tag =
            by_current_sign
                ? (sn.v[j] > 0.0 ? 1 : (sn.v[j] < 0.0 ? -1 : 0))
                : rec.initial.sign_tags[static_cast<std::size_t>(j)];
        if (tag != (plus ? 1 : -1)) continue;
        const double wn = column_norm(sn.W, j);
        if (wn == 0.0) continue;
        const double c = (sn.W.col(j) / wn).dot(target);
        sum += c;
        mn = std::min(mn, c);
        mx = std::max(mx, c);
        ++count;
      }
      auto& mean_v = plus ? ac.mean_plus : ac.mean_minus;
      auto& min_v = plus ? ac.min_plus : ac.min_minus;
      auto& max_v = plus ? ac.max_plus : ac.max_minus;
      if (count == 0) {
        mean_v.push_back(kNaN);
        min_v.push_back(kNaN);
        max_v.push_back(kNaN);
      } else {
        mean_v.push_back(sum / count);
        min_v.push_back(mn);
        max_v.push_back(mx);
      }
    }
  }
  return ac;
}

TransitionAudit audit_transitions(const TrajectoryRecord& rec,
                                  const Dataset& ds) {
  TransitionAudit audit;
  for (const FlowEvent& ev : rec.events) {
    if (ev.kind != EventKind::gained_activation &&
        ev.kind != EventKind::lost_activation) {
      continue;
    }
    ++audit.total;
    const bool plus_tag =
        rec.initial.sign_tags[static_cast<std::size_t>(ev.neuron)] > 0;
    const bool positive_point = ds.y(ev.data_index) > 0;
    const bool gained = ev.kind == EventKind::gained_activation;
    // progress only: gain own-class points, lose opposing-class points
    const bool allowed = plus_tag == (gained ? positive_point : !positive_point);
    if (!allowed) ++audit.forbidden;
  }
  return audit;
}

TrappingAudit audit_trapping(const TrajectoryRecord& rec) {
  TrappingAudit audit;
  if (rec.snapshots.empty()) return audit;
  const std::size_t h = rec.snapshots.front().neurons.size();
  std::vector<ConeLabel> terminal(h, ConeLabel::Other);
  std::vector<std::size_t> entered_at(h, 0);
  const bool check_bits = rec.cfg.mode == FlowMode::gradient_flow &&
                          rec.cfg.freeze_dead &&
                          rec.initial.leaky_alpha == 0.0;
  // a cone only pins a neuron whose output-weight sign matches it (the dead
  // cone pins either sign); a resident of the opposite cone is a transient,
  // not an entry, and a mismatched entry later on would need an activation
  // flip that the transition audit already reports as forbidden
  auto pinned = [&rec](std::size_t j, ConeLabel l) {
    const int tag = rec.initial.sign_tags[j];
    return l == ConeLabel::S_dead || (l == ConeLabel::S_plus && tag > 0) ||
           (l == ConeLabel::S_minus && tag < 0);
  };
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    const Snapshot& sn = rec.snapshots[k];
    for (std::size_t j = 0; j < h; ++j) {
      const ConeLabel l = sn.neurons[j].label;
      if (terminal[j] == ConeLabel::Other) {
        if (terminal_label(l) && pinned(j, l)) {
          terminal[j] = l;
          entered_at[j] = k;
        }
        continue;
      }
      if (l != terminal[j]) ++audit.violations;
      if (check_bits && terminal[j] == ConeLabel::S_dead) {
        const Snapshot& ref = rec.snapshots[entered_at[j]];
        const int D = static_cast<int>(ref.W.rows());
        if (std::memcmp(ref.W.col(static_cast<int>(j)).data(),
                        sn.W.col(static_cast<int>(j)).data(),
                        static_cast<std::size_t>(D) * sizeof(double)) != 0) {
          audit.frozen_bitwise_ok = false;
        }
      }
    }
  }
  return audit;
}

void write_metric_csv(const std::string& path,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open " + path + " for writing");
  std::string line;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c > 0) line += ',';
    line += columns[c];
  }
  line += '\n';
  out << line;
  for (const auto& row : rows) {
    if (row.size() != columns.size()) {
      throw PreconditionError("metric row width does not match header");
    }
    line.clear();
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += ',';
      line += fmt_g17(row[c]);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw UsageError("failed writing " + path);
}

void write_run_metrics(const std::string& dir, const TrajectoryRecord& rec,
                       const Dataset& ds) {
  std::filesystem::create_directories(dir);
  const std::string base = dir + "/";

  {
    std::vector<std::vector<double>> rows;
    for (const Snapshot& sn : rec.snapshots) {
      rows.push_back({sn.t, sn.loss, sn.max_abs_out, sn.balance_residual});
    }
    write_metric_csv(base + "loss.csv",
                     {"t", "loss", "max_abs_out", "balance_residual"}, rows);
  }
  {
    std::vector<std::vector<double>> rows;
    for (const Snapshot& sn : rec.snapshots) {
      for (std::size_t j = 0; j < sn.neurons.size(); ++j) {
        const NeuronSummary& nu = sn.neurons[j];
        int act = 0;
        for (uint64_t w : nu.act) act += std::popcount(w);
        rows.push_back({sn.t, static_cast<double>(j), nu.norm, nu.v,
                        label_code(nu.label), static_cast<double>(act)});
      }
    }
    write_metric_csv(base + "neurons.csv",
                     {"t", "neuron", "norm", "v", "label", "n_active"}, rows);
  }
  {
    std::vector<std::vector<double>> rows;
    for (const Snapshot& sn : rec.snapshots) {
      const NetworkState s = state_at(rec, sn);
      rows.push_back({sn.t, directional_error(s, ds, rec.loss_kind)});
    }
    write_metric_csv(base + "direction.csv", {"t", "directional_error"}, rows);
  }
  {
    const PhaseCurves pc = phase_diagnostics(rec, ds);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < pc.t.size(); ++k) {
      rows.push_back({pc.t[k], pc.norm_term[k], pc.dir_term[k]});
    }
    write_metric_csv(base + "phase.csv", {"t", "norm_term", "dir_term"}, rows);
  }
  {
    const AlignmentCurves ac = alignment_curves(rec, ds);
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < ac.t.size(); ++k) {
      auto pick = [&](const std::vector<double>& v) {
        return k < v.size() ? v[k] : kNaN;
      };
      rows.push_back({ac.t[k], pick(ac.mean_plus), pick(ac.min_plus),
                      pick(ac.max_plus), pick(ac.mean_minus),
                      pick(ac.min_minus), pick(ac.max_minus)});
    }
    write_metric_csv(base + "alignment.csv",
                     {"t", "mean_cos_plus", "min_cos_plus", "max_cos_plus",
                      "mean_cos_minus", "min_cos_minus", "max_cos_minus"},
                     rows);
  }
  {
    std::vector<std::vector<double>> rows;
    for (const FlowEvent& ev : rec.events) {
      rows.push_back({ev.time, static_cast<double>(ev.neuron),
                      event_code(ev.kind), static_cast<double>(ev.data_index)});
    }
    write_metric_csv(base + "events.csv", {"t", "neuron", "kind", "data_index"},
                     rows);
  }
}

}  // namespace coneflow
