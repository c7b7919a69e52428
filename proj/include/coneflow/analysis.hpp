#pragma once

#include <string>
#include <vector>

#include "coneflow/flow.hpp"
#include "coneflow/theory.hpp"

namespace coneflow {

// max_j | P_w(wdot_j)/|w_j| - sign_tag_j * P_w(x_a(w_j)) | with wdot from the
// analytic gradients; the quantity the alignment error bound controls
double directional_error(const NetworkState& s, const Dataset& ds, LossKind lk);

struct ArrivalReport {
  bool all_arrived = false;
  double t1 = std::numeric_limits<double>::infinity();
  std::vector<double> per_neuron;        // settling times, +inf if never
  std::vector<ConeLabel> destination;    // final label (Other = still moving)
};
// a neuron has arrived when its final label is a terminal cone; the settling
// time is its last label change, read off the snapshot sequence (label flips
// always get an event snapshot, so cadence does not limit the resolution)
ArrivalReport arrival_times(const TrajectoryRecord& rec);

struct RateReport {
  bool applicable = false;   // some side has both a populated cone and data
  bool triggered = false;    // |f_side| exceeded 1/4 within the record
  double t2 = std::numeric_limits<double>::infinity();
  double t2_plus = std::numeric_limits<double>::infinity();
  double t2_minus = std::numeric_limits<double>::infinity();
  bool rate_ok = false;      // hyperbolic envelope holds after t2
  double worst_ratio = 0.0;  // max over t>=t2 of loss / envelope
};
RateReport rate_fit(const TrajectoryRecord& rec, const Dataset& ds,
                    const TheoryBounds& bounds, double slack = 0.05);

// largest singular value; input is rescaled by its largest entry first so
// matrices living at subnormal scale are handled
double spectral_norm(const Eigen::MatrixXd& A);
double stable_rank(const Eigen::MatrixXd& W);

struct ConservationReport {
  bool applicable = false;  // needs an arrival and a nonempty positive cone
  double residual = 0.0;    // max_t>=t1 | |M(t)|_2 - |M(t1)|_2 |,
                            // M = Wp^T Wp - vp vp^T over the t1 positive cone
};
ConservationReport low_rank_residual(const TrajectoryRecord& rec);

struct PhaseCurves {
  std::vector<double> t;
  std::vector<double> norm_term;  // sum_j 2<-grad_j, w_j> = d/dt sum |w_j|^2
  std::vector<double> dir_term;   // sum_j |P_w(-grad_j)| / |w_j|
};
PhaseCurves phase_diagnostics(const TrajectoryRecord& rec, const Dataset& ds);

struct AlignmentCurves {
  bool plus_applicable = false;
  bool minus_applicable = false;
  std::vector<double> t;
  std::vector<double> mean_plus, min_plus, max_plus;
  std::vector<double> mean_minus, min_minus, max_minus;
};
// per-neuron cos(w_j, own-class sum) aggregated to mean/min/max per side;
// descent mode groups neurons by the current sign of v_j, flow mode by the
// init tags; NaN where a side has no usable neuron at that snapshot
AlignmentCurves alignment_curves(const TrajectoryRecord& rec, const Dataset& ds);

// transition audit: a plus-tagged neuron may only gain positive-data
// activations and lose negative-data ones (mirrored for minus tags)
struct TransitionAudit {
  long long forbidden = 0;
  long long total = 0;
};
TransitionAudit audit_transitions(const TrajectoryRecord& rec, const Dataset& ds);

// once a neuron shows a terminal cone label it is pinned to (sign-matched
// side cone, or the dead cone for either sign), any later label counts
struct TrappingAudit {
  long long violations = 0;
  bool frozen_bitwise_ok = true;  // dead columns identical bits after entry
};
TrappingAudit audit_trapping(const TrajectoryRecord& rec);

// one file per metric: fixed header, %.17g values, byte-stable
void write_metric_csv(const std::string& path,
                      const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows);
void write_run_metrics(const std::string& dir, const TrajectoryRecord& rec,
                       const Dataset& ds);

}  // namespace coneflow
