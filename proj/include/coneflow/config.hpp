#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coneflow/dataset.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/model.hpp"

#include "json.hpp"

namespace coneflow {

struct DatasetSpec {
  enum class Type { explicit_points, generate, idx, file };
  Type type = Type::explicit_points;
  // explicit
  std::vector<LabeledPoint> points;
  // generate
  int D = 2, n_plus = 1, n_minus = 1;
  double target_mu = 0.5;
  uint64_t seed = 0;
  bool seed_set = false;  // defaults to the run seed when absent
  // idx
  std::string images, labels;
  int digit_pos = 0, digit_neg = 1, max_per_class = 100;
  // file
  std::string path;
  // applied after load, any type
  bool center = false;
};

struct ModelSpec {
  int h = 16;
  enum class Init { balanced, gaussian } init = Init::balanced;
  double eps = 1e-6;        // balanced scale
  bool eps_auto = false;    // "auto": eps = eps_threshold
  double alpha_init = 1e-6; // gaussian scale
  double leaky_alpha = 0.0;
  uint64_t seed = 0;
  bool seed_set = false;
};

struct SweepVariant {
  std::string name;
  DatasetSpec dataset;
};

struct SweepSpec {
  std::vector<SweepVariant> variants;
  std::vector<uint64_t> seeds;
  std::string compare = "t1_strictly_increases";
  int min_agree = 0;
};

struct RunConfig {
  std::string name;
  DatasetSpec dataset;
  ModelSpec model;
  LossKind loss = LossKind::exponential;
  IntegratorConfig integrator;
  double snapshot_every = 0.1;
  int margin_samples = 200000;
  bool store_full_snapshots = false;
  double report_slack = 0.05;
  uint64_t seed = 1;
  bool force = false;
  std::string out;
  std::optional<SweepSpec> sweep;
};

// Strict parser: unknown keys anywhere raise FormatError naming the key path;
// types and ranges are validated up front.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);
nlohmann::ordered_json config_to_json(const RunConfig& cfg);

// resolves a preset name (presets/<name>.json next to the binary or under
// CONEFLOW_PRESET_DIR) or a literal path; UsageError when nothing matches
std::string locate_preset(const std::string& name_or_path);

Dataset build_dataset(const DatasetSpec& spec, uint64_t run_seed);

}  // namespace coneflow
