#include "coneflow/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "coneflow/oracle.hpp"
#include "coneflow/parallel.hpp"
#include "coneflow/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coneflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw UsageError("failed writing " + path);
}

NetworkState draw_balanced(const Dataset& ds, const ModelSpec& spec,
                           uint64_t seed, double eps) {
  Rng rng(mix_seed(seed, 0x5eed));
  Eigen::MatrixXd W0(ds.D, spec.h);
  for (int j = 0; j < spec.h; ++j) {
    for (int d = 0; d < ds.D; ++d) W0(d, j) = rng.gaussian();
  }
  std::vector<int> signs(static_cast<std::size_t>(spec.h));
  for (int j = 0; j < spec.h; ++j) {
    signs[static_cast<std::size_t>(j)] = rng.sign();
  }
  return init_balanced(W0, eps, signs, spec.leaky_alpha);
}

}  // namespace

RunContext prepare(const RunConfig& cfg) {
  RunContext ctx;
  ctx.cfg = cfg;
  ctx.ds = build_dataset(cfg.dataset, cfg.seed);
  ctx.stats = compute_stats(ctx.ds);

  const uint64_t model_seed =
      cfg.model.seed_set ? cfg.model.seed : cfg.seed;

  if (cfg.model.init == ModelSpec::Init::balanced) {
    // margins and the eps threshold depend only on data and init directions,
    // so resolve "auto" from a provisional unit-scale init and rescale after
    NetworkState prov = draw_balanced(ctx.ds, cfg.model, model_seed, 1.0);
    double resolved_eps = cfg.model.eps;
    try {
      ctx.margins = estimate_margins(ctx.ds, prov, cfg.margin_samples,
                                     mix_seed(cfg.seed, 0xa11));
      ctx.margins_ok = true;
      const TheoryBounds prov_bounds = bounds_from(ctx.ds, prov, ctx.margins);
      if (cfg.model.eps_auto) {
        resolved_eps = prov_bounds.eps_threshold;
        if (!(resolved_eps > 0.0)) {
          ctx.compliance.failures.push_back(
              "auto eps resolves below the smallest positive double "
              "(log threshold = " +
              fmt_g6(prov_bounds.log_eps_threshold) + ")");
          resolved_eps = std::numeric_limits<double>::min();
        }
      }
    } catch (const Error& e) {
      ctx.margins_ok = false;
      ctx.margin_error = e.what();
      if (cfg.model.eps_auto) {
        ctx.compliance.failures.push_back(
            "auto eps needs margins, which could not be computed");
        resolved_eps = std::numeric_limits<double>::min();
      }
    }
    ctx.init = draw_balanced(ctx.ds, cfg.model, model_seed, resolved_eps);
    ctx.cfg.model.eps = resolved_eps;
    ctx.cfg.model.eps_auto = false;
  } else {
    ctx.init = init_gaussian(ctx.ds.D, cfg.model.h, cfg.model.alpha_init,
                             mix_seed(model_seed, 0x6a55), cfg.model.leaky_alpha);
    try {
      ctx.margins = estimate_margins(ctx.ds, ctx.init, cfg.margin_samples,
                                     mix_seed(cfg.seed, 0xa11));
      ctx.margins_ok = true;
    } catch (const Error& e) {
      ctx.margins_ok = false;
      ctx.margin_error = e.what();
    }
  }

  if (ctx.margins_ok) {
    try {
      ctx.bounds = bounds_from(ctx.ds, ctx.init, ctx.margins);
    } catch (const Error& e) {
      ctx.margins_ok = false;
      ctx.margin_error = e.what();
    }
  }

  Compliance& c = ctx.compliance;
  if (!(ctx.stats.mu > 0.0)) {
    c.failures.push_back("coherence margin mu = " + fmt_g6(ctx.stats.mu) +
                         " is not positive");
  }
  if (!ctx.margins_ok) {
    c.failures.push_back("margins unavailable: " + ctx.margin_error);
  }
  if (cfg.model.init != ModelSpec::Init::balanced) {
    c.failures.push_back("guarantees need the balanced init");
  }
  if (cfg.integrator.mode != FlowMode::gradient_flow) {
    c.failures.push_back("guarantees need gradient flow, not discrete descent");
  }
  if (cfg.loss != LossKind::exponential && cfg.loss != LossKind::logistic) {
    c.failures.push_back(
        "guarantees cover the exponential and doubled logistic losses only");
  }
  if (ctx.margins_ok && cfg.model.init == ModelSpec::Init::balanced) {
    const double log_eps = std::log(ctx.cfg.model.eps);
    if (log_eps > ctx.bounds.log_eps_threshold + 1e-9) {
      c.failures.push_back(
          "init scale too large: log(eps) = " + fmt_g6(log_eps) +
          " exceeds log eps_threshold = " +
          fmt_g6(ctx.bounds.log_eps_threshold));
    }
  }
  if (ctx.margins_ok) {
    if (ctx.bounds.degenerate_t1) {
      c.warnings.push_back("t1 bound is vacuous for a single data point");
    }
    if (ctx.bounds.degenerate_t2) {
      c.warnings.push_back(
          "one class is empty; the rate bound covers only the populated side");
    }
    if (ctx.margins.method == Margins::Method::sampled) {
      c.warnings.push_back(
          "margins are sampled estimates (exact arcs exist only for D = 2)");
    }
    if (ctx.margins.xi_complement_empty) {
      c.warnings.push_back(
          "the two cones cover every direction; xi defaults to 1");
    }
  }
  {
    bool any_plus = false, any_minus = false;
    for (int t : ctx.init.sign_tags) (t > 0 ? any_plus : any_minus) = true;
    if (!any_plus || !any_minus) {
      c.warnings.push_back("all neurons share one sign tag");
    }
  }
  c.compliant = c.failures.empty();
  return ctx;
}

nlohmann::ordered_json summarize(const RunContext& ctx,
                                 const TrajectoryRecord& rec) {
  nlohmann::ordered_json s;
  s["name"] = ctx.cfg.name;
  s["seed"] = ctx.cfg.seed;
  s["compliant"] = ctx.compliance.compliant;
  s["failures"] = ctx.compliance.failures;
  s["warnings"] = ctx.compliance.warnings;

  {
    nlohmann::ordered_json d;
    d["n"] = ctx.ds.n;
    d["n_plus"] = ctx.ds.n_plus();
    d["n_minus"] = ctx.ds.n_minus();
    d["D"] = ctx.ds.D;
    d["mu"] = ctx.stats.mu;
    d["X_max"] = ctx.stats.X_max;
    d["X_min"] = ctx.stats.X_min;
    s["data"] = std::move(d);
  }
  if (ctx.margins_ok) {
    nlohmann::ordered_json m;
    m["zeta1"] = ctx.margins.zeta1;
    m["zeta2"] = ctx.margins.zeta2;
    m["zeta"] = ctx.margins.zeta();
    m["xi"] = ctx.margins.xi;
    m["xi_complement_empty"] = ctx.margins.xi_complement_empty;
    m["method"] =
        ctx.margins.method == Margins::Method::exact2d ? "exact2d" : "sampled";
    if (ctx.margins.method == Margins::Method::sampled) {
      m["sample_count"] = ctx.margins.sample_count;
    }
    s["margins"] = std::move(m);

    const TheoryBounds& b = ctx.bounds;
    nlohmann::ordered_json jb;
    jb["c"] = b.c;
    jb["eps"] = b.eps;
    jb["eps_threshold"] = b.eps_threshold;
    jb["log_eps_threshold"] = b.log_eps_threshold;
    jb["W_max"] = b.W_max;
    jb["W_min"] = b.W_min;
    jb["T_align"] = b.T_align;
    jb["err_bound"] = b.err_bound;
    jb["norm_ub"] = b.norm_ub;
    jb["f_ub"] = b.f_ub;
    jb["t1_bound"] = b.t1_bound;
    jb["t2_bound"] = b.t2_bound;
    jb["alpha_rate"] = b.alpha_rate;
    jb["degenerate_t1"] = b.degenerate_t1;
    jb["degenerate_t2"] = b.degenerate_t2;
    s["bounds"] = std::move(jb);
  } else {
    s["margin_error"] = ctx.margin_error;
  }

  {
    nlohmann::ordered_json r;
    r["aborted"] = rec.aborted;
    if (rec.aborted) r["abort_reason"] = rec.abort_reason;
    r["sign_flip_flagged"] = rec.sign_flip_flagged;
    r["snapshots"] = rec.snapshots.size();
    r["events"] = rec.events.size();
    if (!rec.snapshots.empty()) {
      r["final_t"] = rec.snapshots.back().t;
      r["final_loss"] = rec.snapshots.back().loss;
      r["final_stable_rank"] = stable_rank(rec.snapshots.back().W);
      double drift = 0.0;
      for (const Snapshot& sn : rec.snapshots) {
        drift = std::max(drift, sn.balance_residual);
      }
      r["max_balance_residual"] = drift;
    }
    s["run"] = std::move(r);
  }

  const ArrivalReport arr = arrival_times(rec);
  {
    nlohmann::ordered_json a;
    a["all_arrived"] = arr.all_arrived;
    a["t1"] = arr.t1;
    int in_plus = 0, in_minus = 0, in_dead = 0, wandering = 0;
    for (ConeLabel l : arr.destination) {
      switch (l) {
        case ConeLabel::S_plus: ++in_plus; break;
        case ConeLabel::S_minus: ++in_minus; break;
        case ConeLabel::S_dead: ++in_dead; break;
        case ConeLabel::Other: ++wandering; break;
      }
    }
    a["in_S_plus"] = in_plus;
    a["in_S_minus"] = in_minus;
    a["in_S_dead"] = in_dead;
    a["not_arrived"] = wandering;
    if (ctx.margins_ok && !ctx.bounds.degenerate_t1) {
      a["t1_bound"] = ctx.bounds.t1_bound;
      a["t1_within_bound"] =
          arr.all_arrived &&
          arr.t1 <= ctx.bounds.t1_bound + rec.snapshot_every;
    }
    s["arrival"] = std::move(a);
  }

  if (ctx.margins_ok) {
    // alignment-phase checks over snapshots with t <= T_align
    double worst_err = 0.0, worst_norm_sq = 0.0, worst_f = 0.0;
    for (const Snapshot& sn : rec.snapshots) {
      if (sn.t > ctx.bounds.T_align) break;
      NetworkState st = rec.initial;
      st.W = sn.W;
      st.v = sn.v;
      st.t = sn.t;
      worst_err =
          std::max(worst_err, directional_error(st, ctx.ds, rec.loss_kind));
      for (const NeuronSummary& nu : sn.neurons) {
        worst_norm_sq = std::max(worst_norm_sq, nu.norm * nu.norm);
      }
      worst_f = std::max(worst_f, sn.max_abs_out);
    }
    nlohmann::ordered_json al;
    al["T_align"] = ctx.bounds.T_align;
    al["max_directional_error"] = worst_err;
    al["err_bound"] = ctx.bounds.err_bound;
    al["err_ratio"] =
        ctx.bounds.err_bound > 0.0 ? worst_err / ctx.bounds.err_bound : kInf;
    al["max_norm_sq"] = worst_norm_sq;
    al["norm_ub"] = ctx.bounds.norm_ub;
    al["max_abs_out"] = worst_f;
    al["f_ub"] = ctx.bounds.f_ub;
    s["alignment_phase"] = std::move(al);

    const RateReport rate =
        rate_fit(rec, ctx.ds, ctx.bounds, ctx.cfg.report_slack);
    nlohmann::ordered_json jr;
    jr["applicable"] = rate.applicable;
    jr["triggered"] = rate.triggered;
    jr["t2"] = rate.t2;
    jr["t2_plus"] = rate.t2_plus;
    jr["t2_minus"] = rate.t2_minus;
    jr["rate_ok"] = rate.rate_ok;
    jr["worst_ratio"] = rate.worst_ratio;
    jr["t2_bound"] = ctx.bounds.t2_bound;
    s["rate"] = std::move(jr);
  }

  {
    const TransitionAudit ta = audit_transitions(rec, ctx.ds);
    const TrappingAudit tr = audit_trapping(rec);
    const ConservationReport cons = low_rank_residual(rec);
    nlohmann::ordered_json ja;
    ja["activation_events"] = ta.total;
    ja["forbidden_transitions"] = ta.forbidden;
    ja["trapping_violations"] = tr.violations;
    ja["frozen_bitwise_ok"] = tr.frozen_bitwise_ok;
    ja["conservation_applicable"] = cons.applicable;
    ja["conservation_residual"] = cons.residual;
    s["audits"] = std::move(ja);
  }
  return s;
}

RunResult run_one(const RunConfig& cfg) {
  RunResult r;
  r.ctx = prepare(cfg);
  if (!r.ctx.compliance.compliant && !cfg.force) {
    std::string msg =
        "configuration is outside the guaranteed regime; pass force to "
        "integrate anyway:";
    for (const std::string& f : r.ctx.compliance.failures) msg += "\n  - " + f;
    throw PreconditionError(msg);
  }
  r.rec = integrate(r.ctx.init, r.ctx.ds, cfg.loss, r.ctx.cfg.integrator,
                    r.ctx.cfg.snapshot_every);
  r.summary = summarize(r.ctx, r.rec);
  return r;
}

void write_artifacts(const RunResult& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_text_file(out_dir + "/config.json",
                  config_to_json(r.ctx.cfg).dump(2) + "\n");
  save_dataset(r.ctx.ds, out_dir + "/dataset.json");
  write_text_file(out_dir + "/trajectory.ndjson", trajectory_to_ndjson(r.rec));
  write_run_metrics(out_dir + "/metrics", r.rec, r.ctx.ds);
  write_text_file(out_dir + "/summary.json", r.summary.dump(2) + "\n");
  if (r.ctx.cfg.store_full_snapshots) {
    std::string lines;
    for (const Snapshot& sn : r.rec.snapshots) {
      NetworkState st = r.rec.initial;
      st.W = sn.W;
      st.v = sn.v;
      st.t = sn.t;
      lines += state_to_json(st);
      lines += '\n';
    }
    write_text_file(out_dir + "/states.ndjson", lines);
  }
  if (r.rec.aborted) {
    nlohmann::ordered_json e;
    e["aborted"] = true;
    e["reason"] = r.rec.abort_reason;
    e["last_t"] =
        r.rec.snapshots.empty() ? 0.0 : r.rec.snapshots.back().t;
    write_text_file(out_dir + "/error.json", e.dump(2) + "\n");
  }
}

SweepOutcome run_sweep(const RunConfig& cfg, const std::string& out_dir) {
  if (!cfg.sweep) {
    throw PreconditionError("run_sweep needs a config with a sweep section");
  }
  const SweepSpec& sweep = *cfg.sweep;
  const std::size_t V = sweep.variants.size();
  const std::size_t S = sweep.seeds.size();

  std::vector<double> t1(V * S, kInf);
  std::vector<std::string> errors(V * S);

  const long long total = static_cast<long long>(V * S);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (long long k = 0; k < total; ++k) {
    const std::size_t vi = static_cast<std::size_t>(k) / S;
    const std::size_t si = static_cast<std::size_t>(k) % S;
    try {
      RunConfig rc = cfg;
      rc.sweep.reset();
      rc.dataset = sweep.variants[vi].dataset;
      rc.seed = sweep.seeds[si];
      rc.name = cfg.name + "." + sweep.variants[vi].name + ".seed" +
                std::to_string(sweep.seeds[si]);
      rc.out.clear();
      RunResult r = run_one(rc);
      write_artifacts(r, out_dir + "/" + sweep.variants[vi].name + "/seed_" +
                             std::to_string(sweep.seeds[si]));
      t1[static_cast<std::size_t>(k)] = arrival_times(r.rec).t1;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(k)] = e.what();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (!errors[k].empty()) {
      throw Error("sweep run " + sweep.variants[k / S].name + " seed " +
                  std::to_string(sweep.seeds[k % S]) + " failed: " + errors[k]);
    }
  }

  SweepOutcome out;
  out.min_agree = sweep.min_agree;
  for (std::size_t si = 0; si < S; ++si) {
    SweepSeedRow row;
    row.seed = sweep.seeds[si];
    for (std::size_t vi = 0; vi < V; ++vi) {
      row.t1.push_back(t1[vi * S + si]);
    }
    row.agree = true;
    for (std::size_t vi = 0; vi + 1 < V; ++vi) {
      if (!(row.t1[vi] < row.t1[vi + 1]) || row.t1[vi + 1] == kInf) {
        row.agree = false;
      }
    }
    if (!row.t1.empty() && row.t1.back() == kInf) row.agree = false;
    if (row.agree) ++out.agree_count;
    out.rows.push_back(std::move(row));
  }
  out.pass = out.agree_count >= out.min_agree;

  {
    std::vector<std::string> cols = {"seed"};
    for (const SweepVariant& v : sweep.variants) cols.push_back("t1_" + v.name);
    cols.push_back("agree");
    std::vector<std::vector<double>> rows;
    for (const SweepSeedRow& row : out.rows) {
      std::vector<double> r = {static_cast<double>(row.seed)};
      for (double v : row.t1) r.push_back(v);
      r.push_back(row.agree ? 1.0 : 0.0);
      rows.push_back(std::move(r));
    }
    std::filesystem::create_directories(out_dir);
    write_metric_csv(out_dir + "/sweep.csv", cols, rows);
  }
  {
    nlohmann::ordered_json j;
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (const SweepVariant& v : sweep.variants) names.push_back(v.name);
    j["variants"] = std::move(names);
    j["compare"] = sweep.compare;
    j["seeds"] = sweep.seeds;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const SweepSeedRow& row : out.rows) {
      nlohmann::ordered_json jr;
      jr["seed"] = row.seed;
      jr["t1"] = row.t1;
      jr["agree"] = row.agree;
      rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    j["agree_count"] = out.agree_count;
    j["min_agree"] = out.min_agree;
    j["pass"] = out.pass;
    write_text_file(out_dir + "/sweep_summary.json", j.dump(2) + "\n");
  }
  return out;
}

std::string render_check_report(const RunContext& ctx) {
  std::string r;
  r += "run:        " + (ctx.cfg.name.empty() ? "(unnamed)" : ctx.cfg.name) +
       "  seed=" + std::to_string(ctx.cfg.seed) + "\n";
  r += "data:       n=" + std::to_string(ctx.ds.n) + " (" +
       std::to_string(ctx.ds.n_plus()) + "+ / " +
       std::to_string(ctx.ds.n_minus()) + "-), D=" + std::to_string(ctx.ds.D) +
       ", mu=" + fmt_g6(ctx.stats.mu) + ", |x| in [" +
       fmt_g6(ctx.stats.X_min) + ", " + fmt_g6(ctx.stats.X_max) + "]\n";
  if (ctx.margins_ok) {
    r += "margins:    zeta1=" + fmt_g6(ctx.margins.zeta1) +
         " zeta2=" + fmt_g6(ctx.margins.zeta2) +
         " xi=" + fmt_g6(ctx.margins.xi) +
         (ctx.margins.method == Margins::Method::exact2d ? " (exact)"
                                                         : " (sampled)") +
         "\n";
    const TheoryBounds& b = ctx.bounds;
    r += "constants:  c=" + fmt_g6(b.c) + " eps=" + fmt_g6(b.eps) +
         " eps_threshold=" + fmt_g6(b.eps_threshold) +
         " (log " + fmt_g6(b.log_eps_threshold) + ")\n";
    r += "horizons:   T_align=" + fmt_g6(b.T_align) +
         " t1_bound=" + fmt_g6(b.t1_bound) + " t2_bound=" + fmt_g6(b.t2_bound) +
         "\n";
    r += "envelopes:  err_bound=" + fmt_g6(b.err_bound) +
         " norm_ub=" + fmt_g6(b.norm_ub) + " f_ub=" + fmt_g6(b.f_ub) +
         " alpha_rate=" + fmt_g6(b.alpha_rate) + "\n";
  } else {
    r += "margins:    unavailable (" + ctx.margin_error + ")\n";
  }
  r += ctx.compliance.compliant ? "verdict:    within the guaranteed regime\n"
                                : "verdict:    OUTSIDE the guaranteed regime\n";
  for (const std::string& f : ctx.compliance.failures) {
    r += "  fail:     " + f + "\n";
  }
  for (const std::string& w : ctx.compliance.warnings) {
    r += "  note:     " + w + "\n";
  }
  return r;
}

}  // namespace coneflow
