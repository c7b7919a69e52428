#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coneflow/geometry.hpp"
#include "coneflow/model.hpp"

namespace coneflow {

enum class EventKind {
  gained_activation,
  lost_activation,
  entered_S_plus,
  entered_S_minus,
  entered_S_dead,
  sign_flip_detected,
};
const char* event_kind_name(EventKind k);

struct FlowEvent {
  double time = 0.0;
  int neuron = -1;
  EventKind kind = EventKind::gained_activation;
  int data_index = -1;  // only for gained/lost activation
};

enum class StepMethod { euler, rk4 };
enum class FlowMode { gradient_flow, gradient_descent };

struct IntegratorConfig {
  StepMethod method = StepMethod::rk4;
  double step = 1e-2;
  double max_time = 10.0;
  // activation crossings are bisected until the flipped inner products sit
  // within event_tolerance * |x_i| * |w_j| of zero
  double event_tolerance = 1e-9;
  bool freeze_dead = true;
  FlowMode mode = FlowMode::gradient_flow;
  double gd_step = 1e-3;  // learning rate (= time per iteration) in descent mode
};

struct NeuronSummary {
  double norm = 0.0;
  double v = 0.0;
  ConeLabel label = ConeLabel::Other;
  std::vector<uint64_t> act;  // activation bitmask over data indices
};

struct Snapshot {
  double t = 0.0;
  double loss = 0.0;
  double max_abs_out = 0.0;       // max_i |f(x_i)|
  double balance_residual = 0.0;  // max_j |v_j^2 - |w_j|^2|
  Eigen::MatrixXd W;
  Eigen::VectorXd v;
  std::vector<NeuronSummary> neurons;
};

struct TrajectoryRecord {
  std::vector<Snapshot> snapshots;
  std::vector<FlowEvent> events;
  std::string dataset_ref;
  NetworkState initial;
  IntegratorConfig cfg;
  LossKind loss_kind = LossKind::exponential;
  double snapshot_every = 0.0;
  bool aborted = false;
  std::string abort_reason;
  // a sign flip under balanced flow means the integration left the regime the
  // init guarantees; descent mode records the events without flagging
  bool sign_flip_flagged = false;
};

// Piecewise-smooth integration with event localization. Snapshots are taken at
// t=0, at every snapshot_every boundary, at every event, and at max_time.
TrajectoryRecord integrate(const NetworkState& s0, const Dataset& ds,
                           LossKind lk, const IntegratorConfig& cfg,
                           double snapshot_every);

// rk4 at the given fine step with a snapshot at every committed step
TrajectoryRecord reference_integrate(const NetworkState& s0, const Dataset& ds,
                                     LossKind lk, double fine_step,
                                     double max_time);

// newline-delimited JSON, one line per snapshot with the events since the
// previous one; byte-stable for identical inputs
std::string trajectory_to_ndjson(const TrajectoryRecord& rec);

}  // namespace coneflow
