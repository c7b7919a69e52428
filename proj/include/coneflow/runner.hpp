#pragma once

#include <string>
#include <vector>

#include "coneflow/analysis.hpp"
#include "coneflow/config.hpp"
#include "coneflow/theory.hpp"

namespace coneflow {

struct Compliance {
  bool compliant = false;
  std::vector<std::string> failures;  // empty iff compliant
  std::vector<std::string> warnings;  // degenerate-bound notes etc.
};

// everything derivable before integration
struct RunContext {
  RunConfig cfg;  // resolved (eps "auto" replaced by the concrete threshold)
  Dataset ds;
  DataStats stats;
  NetworkState init;
  bool margins_ok = false;
  std::string margin_error;
  Margins margins;
  TheoryBounds bounds;  // valid only when margins_ok
  Compliance compliance;
};

RunContext prepare(const RunConfig& cfg);

struct RunResult {
  RunContext ctx;
  TrajectoryRecord rec;
  nlohmann::ordered_json summary;
};

// integrates and summarizes; throws PreconditionError when the context is
// non-compliant and force is not set
RunResult run_one(const RunConfig& cfg);

nlohmann::ordered_json summarize(const RunContext& ctx,
                                 const TrajectoryRecord& rec);

// config.json, dataset.json, trajectory.ndjson, metrics/*.csv, summary.json,
// states.ndjson when requested, error.json when the integration aborted
void write_artifacts(const RunResult& r, const std::string& out_dir);

struct SweepSeedRow {
  uint64_t seed = 0;
  std::vector<double> t1;  // one per variant, +inf when never arrived
  bool agree = false;
};

struct SweepOutcome {
  std::vector<SweepSeedRow> rows;
  int agree_count = 0;
  int min_agree = 0;
  bool pass = false;
};

// runs variants x seeds (independent runs, parallelized), writes per-run
// artifacts plus sweep.csv and sweep_summary.json under out_dir
SweepOutcome run_sweep(const RunConfig& cfg, const std::string& out_dir);

// human-readable context table used by `check` and `report`
std::string render_check_report(const RunContext& ctx);

}  // namespace coneflow
