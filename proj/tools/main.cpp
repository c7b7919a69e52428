#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "coneflow/runner.hpp"

namespace {

using namespace coneflow;

struct CommonArgs {
  std::string preset;
  std::string config;
  long long seed = -1;
  std::string out;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_out) {
  auto* p = cmd->add_option("--preset", args.preset,
                            "preset name (resolved against the presets dir)");
  auto* c = cmd->add_option("--config", args.config, "path to a config file");
  p->excludes(c);
  cmd->add_option("--seed", args.seed, "override the config seed");
  if (with_out) {
    cmd->add_option("--out", args.out, "output directory for artifacts");
  }
  cmd->add_flag("--force", args.force,
                "integrate even outside the guaranteed regime");
}

RunConfig resolve_config(const CommonArgs& args) {
  std::string path;
  if (!args.preset.empty()) {
    path = locate_preset(args.preset);
  } else if (!args.config.empty()) {
    path = args.config;
  } else {
    throw UsageError("pass either --preset <name> or --config <path>");
  }
  RunConfig cfg = load_config_file(path);
  if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
  if (!args.out.empty()) cfg.out = args.out;
  if (args.force) cfg.force = true;
  return cfg;
}

std::string default_out(const RunConfig& cfg) {
  if (!cfg.out.empty()) return cfg.out;
  const std::string stem = cfg.name.empty() ? "run" : cfg.name;
  return "runs/" + stem + "-seed" + std::to_string(cfg.seed);
}

int cmd_check(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const RunContext ctx = prepare(cfg);
  std::cout << render_check_report(ctx);
  return ctx.compliance.compliant ? 0 : 1;
}

int cmd_run(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  if (cfg.sweep) {
    throw UsageError("this config defines a sweep; use the sweep subcommand");
  }
  const RunResult r = run_one(cfg);
  const std::string out_dir = default_out(r.ctx.cfg);
  write_artifacts(r, out_dir);
  std::cout << render_check_report(r.ctx);
  if (!r.rec.snapshots.empty()) {
    const Snapshot& last = r.rec.snapshots.back();
    std::cout << "integrated: t=" << fmt_g6(last.t)
              << " loss=" << fmt_g6(last.loss)
              << " snapshots=" << r.rec.snapshots.size()
              << " events=" << r.rec.events.size() << "\n";
  }
  if (r.summary.contains("arrival")) {
    const auto& a = r.summary["arrival"];
    std::cout << "arrival:    all=" << a["all_arrived"].dump()
              << " t1=" << a["t1"].dump() << "\n";
  }
  std::cout << "artifacts:  " << out_dir << "\n";
  if (r.rec.aborted) {
    std::cerr << "aborted: " << r.rec.abort_reason << "\n";
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const std::string path = run_dir + "/summary.json";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("no summary found at " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + " is not valid JSON: " + std::string(e.what()));
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  if (!cfg.sweep) {
    throw UsageError("this config has no sweep section");
  }
  const std::string out_dir =
      !cfg.out.empty() ? cfg.out
                       : "runs/" + (cfg.name.empty() ? "sweep" : cfg.name);
  const SweepOutcome outcome = run_sweep(cfg, out_dir);
  std::printf("%-12s", "seed");
  for (const SweepVariant& v : cfg.sweep->variants) {
    std::printf("  %14s", ("t1_" + v.name).c_str());
  }
  std::printf("  agree\n");
  for (const SweepSeedRow& row : outcome.rows) {
    std::printf("%-12llu", static_cast<unsigned long long>(row.seed));
    for (double t1 : row.t1) std::printf("  %14.6g", t1);
    std::printf("  %s\n", row.agree ? "yes" : "no");
  }
  std::printf("agreement: %d/%zu (needs %d) -> %s\n", outcome.agree_count,
              outcome.rows.size(), outcome.min_agree,
              outcome.pass ? "pass" : "FAIL");
  std::printf("artifacts: %s\n", out_dir.c_str());
  return outcome.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "two-layer ReLU nets under small balanced init: integration, cone "
      "tracking, and guarantee checking"};
  app.require_subcommand(1);

  CommonArgs check_args, run_args, sweep_args;
  std::string report_dir;

  CLI::App* check = app.add_subcommand(
      "check", "validate a config against the guaranteed regime");
  add_common(check, check_args, false);

  CLI::App* run =
      app.add_subcommand("run", "integrate one configuration and write artifacts");
  add_common(run, run_args, true);

  CLI::App* report =
      app.add_subcommand("report", "print the summary of a finished run");
  report->add_option("--runs", report_dir, "artifacts directory of a run")
      ->required();

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run every variant x seed of a sweep config and compare");
  add_common(sweep, sweep_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) return cmd_check(check_args);
    if (run->parsed()) return cmd_run(run_args);
    if (report->parsed()) return cmd_report(report_dir);
    if (sweep->parsed()) return cmd_sweep(sweep_args);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
