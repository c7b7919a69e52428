#include "coneflow/config.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace coneflow {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw FormatError("config error at " + path + ": " + what);
}

std::string type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::object: return "object";
    case json::value_t::array: return "array";
    case json::value_t::string: return "string";
    case json::value_t::boolean: return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: return "number";
    default: return "unknown";
  }
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected object, got " + type_name(j));
}

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      bad(path + "." + it.key(), "unknown key");
    }
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected number, got " + type_name(j));
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "expected a finite number");
  return v;
}

long get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    bad(path, "expected integer, got " + type_name(j));
  }
  return j.get<long>();
}

uint64_t get_seed(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    bad(path, "expected integer seed, got " + type_name(j));
  }
  if (j.is_number_integer() && j.get<long long>() < 0) {
    bad(path, "seed must be nonnegative");
  }
  return j.get<uint64_t>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) bad(path, "expected boolean, got " + type_name(j));
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected string, got " + type_name(j));
  return j.get<std::string>();
}

DatasetSpec parse_dataset(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"type", "points", "D", "n_plus", "n_minus", "target_mu", "seed",
              "images", "labels", "digit_pos", "digit_neg", "max_per_class",
              "path", "center"});
  DatasetSpec spec;
  if (!j.contains("type")) bad(path + ".type", "missing required key");
  const std::string type = get_string(j.at("type"), path + ".type");
  std::set<std::string> used = {"type", "center"};

  if (type == "points") {
    spec.type = DatasetSpec::Type::explicit_points;
    used.insert("points");
    if (!j.contains("points")) bad(path + ".points", "missing required key");
    const json& pts = j.at("points");
    if (!pts.is_array() || pts.empty()) {
      bad(path + ".points", "expected a non-empty array");
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string ppath = path + ".points[" + std::to_string(i) + "]";
      expect_object(pts[i], ppath);
      check_keys(pts[i], ppath, {"x", "y"});
      if (!pts[i].contains("x") || !pts[i].contains("y")) {
        bad(ppath, "each point needs x and y");
      }
      const json& jx = pts[i].at("x");
      if (!jx.is_array() || jx.empty()) {
        bad(ppath + ".x", "expected a non-empty array of numbers");
      }
      LabeledPoint p;
      p.x.resize(static_cast<int>(jx.size()));
      for (std::size_t d = 0; d < jx.size(); ++d) {
        p.x[static_cast<int>(d)] =
            get_number(jx[d], ppath + ".x[" + std::to_string(d) + "]");
      }
      const long y = get_integer(pts[i].at("y"), ppath + ".y");
      if (y != 1 && y != -1) bad(ppath + ".y", "label must be +1 or -1");
      p.y = static_cast<int>(y);
      spec.points.push_back(std::move(p));
    }
  } else if (type == "generate") {
    spec.type = DatasetSpec::Type::generate;
    used.insert({"D", "n_plus", "n_minus", "target_mu", "seed"});
    if (j.contains("D")) {
      spec.D = static_cast<int>(get_integer(j.at("D"), path + ".D"));
      if (spec.D < 1) bad(path + ".D", "dimension must be at least 1");
    }
    if (j.contains("n_plus")) {
      spec.n_plus =
          static_cast<int>(get_integer(j.at("n_plus"), path + ".n_plus"));
    }
    if (j.contains("n_minus")) {
      spec.n_minus =
          static_cast<int>(get_integer(j.at("n_minus"), path + ".n_minus"));
    }
    if (spec.n_plus < 0 || spec.n_minus < 0 || spec.n_plus + spec.n_minus < 1) {
      bad(path, "class counts must be nonnegative and sum to at least 1");
    }
    if (j.contains("target_mu")) {
      spec.target_mu = get_number(j.at("target_mu"), path + ".target_mu");
      if (!(spec.target_mu > 0.0) || spec.target_mu > 1.0) {
        bad(path + ".target_mu", "must be in (0, 1]");
      }
    }
    if (j.contains("seed")) {
      spec.seed = get_seed(j.at("seed"), path + ".seed");
      spec.seed_set = true;
    }
  } else if (type == "idx") {
    spec.type = DatasetSpec::Type::idx;
    used.insert({"images", "labels", "digit_pos", "digit_neg", "max_per_class"});
    if (!j.contains("images") || !j.contains("labels")) {
      bad(path, "idx datasets need images and labels paths");
    }
    spec.images = get_string(j.at("images"), path + ".images");
    spec.labels = get_string(j.at("labels"), path + ".labels");
    if (j.contains("digit_pos")) {
      spec.digit_pos =
          static_cast<int>(get_integer(j.at("digit_pos"), path + ".digit_pos"));
    }
    if (j.contains("digit_neg")) {
      spec.digit_neg =
          static_cast<int>(get_integer(j.at("digit_neg"), path + ".digit_neg"));
    }
    if (j.contains("max_per_class")) {
      spec.max_per_class = static_cast<int>(
          get_integer(j.at("max_per_class"), path + ".max_per_class"));
      if (spec.max_per_class < 0) {
        bad(path + ".max_per_class", "must be nonnegative");
      }
    }
  } else if (type == "file") {
    spec.type = DatasetSpec::Type::file;
    used.insert("path");
    if (!j.contains("path")) bad(path + ".path", "missing required key");
    spec.path = get_string(j.at("path"), path + ".path");
  } else {
    bad(path + ".type",
        "unknown dataset type '" + type +
            "' (expected points, generate, idx, or file)");
  }

  for (auto it = j.begin(); it != j.end(); ++it) {
    if (used.find(it.key()) == used.end()) {
      bad(path + "." + it.key(),
          "key does not apply to dataset type '" + type + "'");
    }
  }
  if (j.contains("center")) {
    spec.center = get_bool(j.at("center"), path + ".center");
  }
  return spec;
}

ModelSpec parse_model(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"h", "init", "eps", "alpha_init", "leaky_alpha", "seed"});
  ModelSpec spec;
  if (j.contains("h")) {
    spec.h = static_cast<int>(get_integer(j.at("h"), path + ".h"));
    if (spec.h < 1) bad(path + ".h", "width must be at least 1");
  }
  if (j.contains("init")) {
    const std::string init = get_string(j.at("init"), path + ".init");
    if (init == "balanced") {
      spec.init = ModelSpec::Init::balanced;
    } else if (init == "gaussian") {
      spec.init = ModelSpec::Init::gaussian;
    } else {
      bad(path + ".init", "expected 'balanced' or 'gaussian'");
    }
  }
  if (j.contains("eps")) {
    const json& je = j.at("eps");
    if (je.is_string()) {
      if (je.get<std::string>() != "auto") {
        bad(path + ".eps", "the only string value allowed is 'auto'");
      }
      spec.eps_auto = true;
    } else {
      spec.eps = get_number(je, path + ".eps");
      if (!(spec.eps > 0.0)) bad(path + ".eps", "must be positive");
    }
  }
  if (j.contains("alpha_init")) {
    spec.alpha_init = get_number(j.at("alpha_init"), path + ".alpha_init");
    if (!(spec.alpha_init > 0.0)) bad(path + ".alpha_init", "must be positive");
  }
  if (j.contains("leaky_alpha")) {
    spec.leaky_alpha = get_number(j.at("leaky_alpha"), path + ".leaky_alpha");
    if (spec.leaky_alpha < 0.0 || spec.leaky_alpha >= 1.0) {
      bad(path + ".leaky_alpha", "must be in [0, 1)");
    }
  }
  if (j.contains("seed")) {
    spec.seed = get_seed(j.at("seed"), path + ".seed");
    spec.seed_set = true;
  }
  return spec;
}

IntegratorConfig parse_integrator(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path,
             {"method", "mode", "step", "max_time", "event_tolerance",
              "freeze_dead", "gd_step"});
  IntegratorConfig cfg;
  if (j.contains("method")) {
    const std::string m = get_string(j.at("method"), path + ".method");
    if (m == "rk4") {
      cfg.method = StepMethod::rk4;
    } else if (m == "euler") {
      cfg.method = StepMethod::euler;
    } else {
      bad(path + ".method", "expected 'rk4' or 'euler'");
    }
  }
  if (j.contains("mode")) {
    const std::string m = get_string(j.at("mode"), path + ".mode");
    if (m == "flow") {
      cfg.mode = FlowMode::gradient_flow;
    } else if (m == "descent") {
      cfg.mode = FlowMode::gradient_descent;
    } else {
      bad(path + ".mode", "expected 'flow' or 'descent'");
    }
  }
  if (j.contains("step")) {
    cfg.step = get_number(j.at("step"), path + ".step");
    if (!(cfg.step > 0.0)) bad(path + ".step", "must be positive");
  }
  if (j.contains("max_time")) {
    cfg.max_time = get_number(j.at("max_time"), path + ".max_time");
    if (cfg.max_time < 0.0) bad(path + ".max_time", "must be nonnegative");
  }
  if (j.contains("event_tolerance")) {
    cfg.event_tolerance =
        get_number(j.at("event_tolerance"), path + ".event_tolerance");
    if (!(cfg.event_tolerance > 0.0)) {
      bad(path + ".event_tolerance", "must be positive");
    }
  }
  if (j.contains("freeze_dead")) {
    cfg.freeze_dead = get_bool(j.at("freeze_dead"), path + ".freeze_dead");
  }
  if (j.contains("gd_step")) {
    cfg.gd_step = get_number(j.at("gd_step"), path + ".gd_step");
    if (!(cfg.gd_step > 0.0)) bad(path + ".gd_step", "must be positive");
  }
  return cfg;
}

SweepSpec parse_sweep(const json& j, const std::string& path) {
  expect_object(j, path);
  check_keys(j, path, {"variants", "seeds", "compare", "min_agree"});
  SweepSpec spec;
  if (!j.contains("variants")) bad(path + ".variants", "missing required key");
  const json& vars = j.at("variants");
  if (!vars.is_array() || vars.size() < 2) {
    bad(path + ".variants", "expected an array of at least 2 variants");
  }
  for (std::size_t k = 0; k < vars.size(); ++k) {
    const std::string vpath = path + ".variants[" + std::to_string(k) + "]";
    expect_object(vars[k], vpath);
    check_keys(vars[k], vpath, {"name", "dataset"});
    if (!vars[k].contains("name") || !vars[k].contains("dataset")) {
      bad(vpath, "each variant needs a name and a dataset");
    }
    SweepVariant v;
    v.name = get_string(vars[k].at("name"), vpath + ".name");
    v.dataset = parse_dataset(vars[k].at("dataset"), vpath + ".dataset");
    spec.variants.push_back(std::move(v));
  }
  if (!j.contains("seeds")) bad(path + ".seeds", "missing required key");
  const json& seeds = j.at("seeds");
  if (!seeds.is_array() || seeds.empty()) {
    bad(path + ".seeds", "expected a non-empty array of seeds");
  }
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    spec.seeds.push_back(
        get_seed(seeds[k], path + ".seeds[" + std::to_string(k) + "]"));
  }
  if (j.contains("compare")) {
    spec.compare = get_string(j.at("compare"), path + ".compare");
    if (spec.compare != "t1_strictly_increases") {
      bad(path + ".compare", "the only supported check is t1_strictly_increases");
    }
  }
  spec.min_agree = static_cast<int>(spec.seeds.size());
  if (j.contains("min_agree")) {
    spec.min_agree =
        static_cast<int>(get_integer(j.at("min_agree"), path + ".min_agree"));
    if (spec.min_agree < 0 ||
        spec.min_agree > static_cast<int>(spec.seeds.size())) {
      bad(path + ".min_agree", "must be between 0 and the number of seeds");
    }
  }
  return spec;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  expect_object(j, "$");
  check_keys(j, "$",
             {"name", "seed", "force", "out", "loss", "snapshot_every",
              "margin_samples", "store_full_snapshots", "report_slack",
              "dataset", "model", "integrator", "sweep"});
  RunConfig cfg;
  if (j.contains("name")) cfg.name = get_string(j.at("name"), "$.name");
  if (j.contains("seed")) cfg.seed = get_seed(j.at("seed"), "$.seed");
  if (j.contains("force")) cfg.force = get_bool(j.at("force"), "$.force");
  if (j.contains("out")) cfg.out = get_string(j.at("out"), "$.out");
  if (j.contains("loss")) {
    const std::string name = get_string(j.at("loss"), "$.loss");
    try {
      cfg.loss = loss_kind_from_name(name);
    } catch (const Error&) {
      bad("$.loss",
          "expected exponential, logistic, or logistic_unscaled; got '" +
              name + "'");
    }
  }
  if (j.contains("snapshot_every")) {
    cfg.snapshot_every = get_number(j.at("snapshot_every"), "$.snapshot_every");
    if (cfg.snapshot_every < 0.0) bad("$.snapshot_every", "must be nonnegative");
  }
  if (j.contains("margin_samples")) {
    cfg.margin_samples = static_cast<int>(
        get_integer(j.at("margin_samples"), "$.margin_samples"));
    if (cfg.margin_samples < 100) {
      bad("$.margin_samples", "must be at least 100");
    }
  }
  if (j.contains("store_full_snapshots")) {
    cfg.store_full_snapshots =
        get_bool(j.at("store_full_snapshots"), "$.store_full_snapshots");
  }
  if (j.contains("report_slack")) {
    cfg.report_slack = get_number(j.at("report_slack"), "$.report_slack");
    if (cfg.report_slack < 0.0) bad("$.report_slack", "must be nonnegative");
  }
  if (!j.contains("dataset")) bad("$.dataset", "missing required key");
  cfg.dataset = parse_dataset(j.at("dataset"), "$.dataset");
  if (j.contains("model")) cfg.model = parse_model(j.at("model"), "$.model");
  if (j.contains("integrator")) {
    cfg.integrator = parse_integrator(j.at("integrator"), "$.integrator");
  }
  if (j.contains("sweep")) cfg.sweep = parse_sweep(j.at("sweep"), "$.sweep");
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config file " + path + " is not valid JSON: " +
                      e.what());
  }
  return config_from_json(j);
}

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  j["seed"] = cfg.seed;
  j["force"] = cfg.force;
  if (!cfg.out.empty()) j["out"] = cfg.out;
  j["loss"] = loss_kind_name(cfg.loss);
  j["snapshot_every"] = cfg.snapshot_every;
  j["margin_samples"] = cfg.margin_samples;
  j["store_full_snapshots"] = cfg.store_full_snapshots;
  j["report_slack"] = cfg.report_slack;

  nlohmann::ordered_json jd;
  switch (cfg.dataset.type) {
    case DatasetSpec::Type::explicit_points: {
      jd["type"] = "points";
      nlohmann::ordered_json pts = nlohmann::ordered_json::array();
      for (const LabeledPoint& p : cfg.dataset.points) {
        nlohmann::ordered_json jp;
        jp["x"] = std::vector<double>(p.x.data(), p.x.data() + p.x.size());
        jp["y"] = p.y;
        pts.push_back(std::move(jp));
      }
      jd["points"] = std::move(pts);
      break;
    }
    case DatasetSpec::Type::generate:
      jd["type"] = "generate";
      jd["D"] = cfg.dataset.D;
      jd["n_plus"] = cfg.dataset.n_plus;
      jd["n_minus"] = cfg.dataset.n_minus;
      jd["target_mu"] = cfg.dataset.target_mu;
      if (cfg.dataset.seed_set) jd["seed"] = cfg.dataset.seed;
      break;
    case DatasetSpec::Type::idx:
      jd["type"] = "idx";
      jd["images"] = cfg.dataset.images;
      jd["labels"] = cfg.dataset.labels;
      jd["digit_pos"] = cfg.dataset.digit_pos;
      jd["digit_neg"] = cfg.dataset.digit_neg;
      jd["max_per_class"] = cfg.dataset.max_per_class;
      break;
    case DatasetSpec::Type::file:
      jd["type"] = "file";
      jd["path"] = cfg.dataset.path;
      break;
  }
  jd["center"] = cfg.dataset.center;
  j["dataset"] = std::move(jd);

  nlohmann::ordered_json jm;
  jm["h"] = cfg.model.h;
  jm["init"] =
      cfg.model.init == ModelSpec::Init::balanced ? "balanced" : "gaussian";
  if (cfg.model.eps_auto) {
    jm["eps"] = "auto";
  } else {
    jm["eps"] = cfg.model.eps;
  }
  jm["alpha_init"] = cfg.model.alpha_init;
  jm["leaky_alpha"] = cfg.model.leaky_alpha;
  if (cfg.model.seed_set) jm["seed"] = cfg.model.seed;
  j["model"] = std::move(jm);

  nlohmann::ordered_json ji;
  ji["method"] = cfg.integrator.method == StepMethod::rk4 ? "rk4" : "euler";
  ji["mode"] =
      cfg.integrator.mode == FlowMode::gradient_flow ? "flow" : "descent";
  ji["step"] = cfg.integrator.step;
  ji["max_time"] = cfg.integrator.max_time;
  ji["event_tolerance"] = cfg.integrator.event_tolerance;
  ji["freeze_dead"] = cfg.integrator.freeze_dead;
  ji["gd_step"] = cfg.integrator.gd_step;
  j["integrator"] = std::move(ji);

  if (cfg.sweep) {
    nlohmann::ordered_json js;
    nlohmann::ordered_json vars = nlohmann::ordered_json::array();
    for (const SweepVariant& v : cfg.sweep->variants) {
      RunConfig tmp;
      tmp.dataset = v.dataset;
      nlohmann::ordered_json full = config_to_json(tmp);
      nlohmann::ordered_json jv;
      jv["name"] = v.name;
      jv["dataset"] = full["dataset"];
      vars.push_back(std::move(jv));
    }
    js["variants"] = std::move(vars);
    js["seeds"] = cfg.sweep->seeds;
    js["compare"] = cfg.sweep->compare;
    js["min_agree"] = cfg.sweep->min_agree;
    j["sweep"] = std::move(js);
  }
  return j;
}

std::string locate_preset(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  std::vector<std::string> tried;

  if (fs::exists(name_or_path) && fs::is_regular_file(name_or_path)) {
    return name_or_path;
  }
  tried.push_back(name_or_path);

  const std::string file = name_or_path + ".json";
  if (const char* dir = std::getenv("CONEFLOW_PRESET_DIR")) {
    const std::string p = std::string(dir) + "/" + file;
    if (fs::exists(p)) return p;
    tried.push_back(p);
  }
  {
    const std::string p = "presets/" + file;
    if (fs::exists(p)) return p;
    tried.push_back(p);
  }
  {
    char buf[4096];
    const ssize_t len = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
    if (len > 0) {
      buf[len] = '\0';
      const fs::path exe_dir = fs::path(buf).parent_path();
      for (const fs::path cand :
           {exe_dir / "presets" / file, exe_dir.parent_path() / "presets" / file}) {
        if (fs::exists(cand)) return cand.string();
        tried.push_back(cand.string());
      }
    }
  }
  std::string msg = "no preset or config file found for '" + name_or_path +
                    "'; tried:";
  for (const std::string& t : tried) msg += "\n  " + t;
  throw UsageError(msg);
}

Dataset build_dataset(const DatasetSpec& spec, uint64_t run_seed) {
  Dataset ds;
  switch (spec.type) {
    case DatasetSpec::Type::explicit_points:
      ds = Dataset::build(spec.points);
      break;
    case DatasetSpec::Type::generate:
      ds = generate_separable(spec.D, spec.n_plus, spec.n_minus,
                              spec.target_mu,
                              spec.seed_set ? spec.seed : run_seed);
      break;
    case DatasetSpec::Type::idx:
      ds = load_idx(spec.images, spec.labels, spec.digit_pos, spec.digit_neg,
                    spec.max_per_class);
      break;
    case DatasetSpec::Type::file:
      ds = load_dataset(spec.path);
      break;
  }
  if (spec.center) ds = center(ds);
  return ds;
}

}  // namespace coneflow
