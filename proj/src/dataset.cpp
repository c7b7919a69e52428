#include "coneflow/dataset.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include "coneflow/parallel.hpp"
#include "coneflow/rng.hpp"

#include "json.hpp"

namespace coneflow {

Dataset Dataset::build(std::vector<LabeledPoint> pts) {
  if (pts.empty()) throw DegenerateInputError("dataset is empty");
  Dataset ds;
  ds.D = static_cast<int>(pts[0].x.size());
  if (ds.D < 1) throw FormatError("point 0 has dimension 0");
  ds.n = static_cast<int>(pts.size());
  ds.x_norms.resize(pts.size());
  for (int i = 0; i < ds.n; ++i) {
    const auto& p = pts[i];
    if (static_cast<int>(p.x.size()) != ds.D) {
      throw FormatError("point " + std::to_string(i) + " has dimension " +
                        std::to_string(p.x.size()) + ", expected " +
                        std::to_string(ds.D));
    }
    if (p.y != 1 && p.y != -1) {
      throw FormatError("point " + std::to_string(i) + " has label " +
                        std::to_string(p.y) + ", expected +1 or -1");
    }
    const double nrm = p.x.stableNorm();
    if (!(nrm > 0.0)) {
      throw DegenerateInputError("point " + std::to_string(i) +
                                 " has zero norm");
    }
    ds.x_norms[i] = nrm;
    (p.y > 0 ? ds.I_plus : ds.I_minus).push_back(i);
  }
  ds.points = std::move(pts);
  return ds;
}

DataStats compute_stats(const Dataset& ds) {
  DataStats st;
  st.X_max = 0.0;
  st.X_min = std::numeric_limits<double>::infinity();
  for (double nrm : ds.x_norms) {
    st.X_max = std::max(st.X_max, nrm);
    st.X_min = std::min(st.X_min, nrm);
  }
  st.x_plus = Eigen::VectorXd::Zero(ds.D);
  st.x_minus = Eigen::VectorXd::Zero(ds.D);
  for (int i : ds.I_plus) st.x_plus += ds.x(i);
  for (int i : ds.I_minus) st.x_minus += ds.x(i);

  const int n = ds.n;
  st.correlation.resize(n, n);
  parallel_for(static_cast<std::size_t>(n), static_cast<std::size_t>(n) * ds.D,
               [&](std::size_t ii) {
                 const int i = static_cast<int>(ii);
                 for (int j = 0; j < n; ++j) {
                   const double dot = ds.x(i).dot(ds.x(j));
                   st.correlation(i, j) = (ds.y(i) * ds.y(j)) * dot /
                                          (ds.x_norms[i] * ds.x_norms[j]);
                 }
               });
  // min over all ordered pairs, diagonal included (so mu = 1 for n = 1)
  double mu = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mu = std::min(mu, st.correlation(i, j));
  st.mu = mu;
  return st;
}

namespace {

// point at angle phi from `anchor` toward a random tangent direction, norm in
// [0.9, 1.1]
Eigen::VectorXd cap_sample(const Eigen::VectorXd& anchor, double phi, Rng& rng) {
  const int D = static_cast<int>(anchor.size());
  Eigen::VectorXd dir = anchor;
  if (D > 1 && phi > 0.0) {
    Eigen::VectorXd tangent(D);
    double tn = 0.0;
    do {
      for (int d = 0; d < D; ++d) tangent[d] = rng.gaussian();
      tangent -= anchor * anchor.dot(tangent);
      tn = tangent.stableNorm();
    } while (tn <= 1e-12);
    dir = std::cos(phi) * anchor + std::sin(phi) * (tangent / tn);
  }
  return rng.uniform(0.9, 1.1) * dir;
}

}  // namespace

Dataset generate_separable(int D, int n_plus, int n_minus, double target_mu,
                           uint64_t seed) {
  if (D < 1) throw PreconditionError("generate_separable: D must be >= 1");
  if (n_plus < 0 || n_minus < 0 || n_plus + n_minus < 1) {
    throw PreconditionError("generate_separable: need at least one point");
  }
  if (!(target_mu > 0.0 && target_mu <= 1.0)) {
    throw PreconditionError(
        "generate_separable: target_mu must be in (0, 1], got " +
        fmt_g6(target_mu));
  }
  const double cap = std::acos(std::sqrt(target_mu));
  Rng rng(mix_seed(seed, 0x9d5));
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd anchor(D);
    double an = 0.0;
    do {
      for (int d = 0; d < D; ++d) anchor[d] = rng.gaussian();
      an = anchor.stableNorm();
    } while (an <= 1e-12);
    anchor /= an;
    // draws concentrate toward the anchors on retries so the loop converges
    // instead of resampling one fixed distribution 100 times
    const double shrink = 1.0 / (1.0 + 0.25 * attempt);
    std::vector<LabeledPoint> pts;
    pts.reserve(static_cast<std::size_t>(n_plus + n_minus));
    for (int i = 0; i < n_plus; ++i) {
      pts.push_back({cap_sample(anchor, cap * shrink * rng.uniform(), rng), 1});
    }
    for (int i = 0; i < n_minus; ++i) {
      pts.push_back(
          {cap_sample(-anchor, cap * shrink * rng.uniform(), rng), -1});
    }
    Dataset ds = Dataset::build(std::move(pts));
    if (compute_stats(ds).mu >= target_mu) return ds;
  }
  throw GenerationFailedError(
      "generate_separable: no draw reached mu >= " + fmt_g6(target_mu) +
      " after 100 attempts (D=" + std::to_string(D) +
      ", n=" + std::to_string(n_plus + n_minus) + ")");
}

Dataset center(const Dataset& ds) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ds.D);
  for (const auto& p : ds.points) mean += p.x;
  mean /= static_cast<double>(ds.n);
  std::vector<LabeledPoint> pts;
  pts.reserve(ds.points.size());
  for (int i = 0; i < ds.n; ++i) {
    LabeledPoint p{ds.x(i) - mean, ds.y(i)};
    if (!(p.x.stableNorm() > 0.0)) {
      throw DegenerateInputError("centering made point " + std::to_string(i) +
                                 " exactly zero");
    }
    pts.push_back(std::move(p));
  }
  return Dataset::build(std::move(pts));
}

std::string dataset_to_json(const Dataset& ds) {
  nlohmann::ordered_json j;
  j["D"] = ds.D;
  j["n"] = ds.n;
  auto& pts = j["points"] = nlohmann::ordered_json::array();
  for (const auto& p : ds.points) {
    nlohmann::ordered_json jp;
    auto& x = jp["x"] = nlohmann::ordered_json::array();
    for (int d = 0; d < ds.D; ++d) x.push_back(p.x[d]);
    jp["y"] = p.y;
    pts.push_back(std::move(jp));
  }
  return j.dump(2) + "\n";
}

Dataset dataset_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset json: ") + e.what());
  }
  if (!j.is_object() || !j.contains("points") || !j["points"].is_array()) {
    throw FormatError("dataset json: expected object with a points array");
  }
  std::vector<LabeledPoint> pts;
  for (const auto& jp : j["points"]) {
    if (!jp.contains("x") || !jp["x"].is_array() || !jp.contains("y")) {
      throw FormatError("dataset json: each point needs x[] and y");
    }
    LabeledPoint p;
    p.x.resize(static_cast<int>(jp["x"].size()));
    int d = 0;
    for (const auto& v : jp["x"]) {
      if (!v.is_number()) throw FormatError("dataset json: x entries must be numbers");
      p.x[d++] = v.get<double>();
    }
    p.y = jp["y"].get<int>();
    pts.push_back(std::move(p));
  }
  Dataset ds = Dataset::build(std::move(pts));
  if (j.contains("D") && j["D"].get<int>() != ds.D) {
    throw FormatError("dataset json: D field disagrees with point dimension");
  }
  if (j.contains("n") && j["n"].get<int>() != ds.n) {
    throw FormatError("dataset json: n field disagrees with point count");
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << dataset_to_json(ds);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return dataset_from_json(ss.str());
}

}  // namespace coneflow
