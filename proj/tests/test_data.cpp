#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "coneflow/dataset.hpp"
#include "doctest.h"

using namespace coneflow;
namespace fs = std::filesystem;

namespace {

Dataset make2(double x1a, double x1b, int y1, double x2a, double x2b, int y2) {
  std::vector<LabeledPoint> pts(2);
  pts[0].x = Eigen::Vector2d(x1a, x1b);
  pts[0].y = y1;
  pts[1].x = Eigen::Vector2d(x2a, x2b);
  pts[1].y = y2;
  return Dataset::build(std::move(pts));
}

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  REQUIRE(bool(f));
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

// images file: 4 records of 2x2 pixels, all nonzero so every kept point has
// positive norm; labels pick out digits 0 and 1 plus one ignored 7
std::vector<unsigned char> tiny_images() {
  std::vector<unsigned char> b;
  push_be32(b, 0x00000803);
  push_be32(b, 4);  // records
  push_be32(b, 2);  // rows
  push_be32(b, 2);  // cols
  const unsigned char pix[4][4] = {{10, 20, 30, 40},
                                   {255, 1, 2, 3},
                                   {5, 5, 5, 5},
                                   {9, 8, 7, 6}};
  for (const auto& rec : pix)
    for (unsigned char p : rec) b.push_back(p);
  return b;
}

std::vector<unsigned char> tiny_labels() {
  std::vector<unsigned char> b;
  push_be32(b, 0x00000801);
  push_be32(b, 4);
  b.push_back(0);
  b.push_back(1);
  b.push_back(0);
  b.push_back(7);
  return b;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("build validates points and fills the index sets") {
  Dataset ds = make2(1.0, 0.0, 1, -0.8, 0.6, -1);
  CHECK(ds.n == 2);
  CHECK(ds.D == 2);
  CHECK(ds.n_plus() == 1);
  CHECK(ds.n_minus() == 1);
  CHECK(ds.I_plus[0] == 0);
  CHECK(ds.I_minus[0] == 1);
  CHECK(ds.x_norms[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ds.x_norms[1] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(Dataset::build({}), DegenerateInputError);

  std::vector<LabeledPoint> zero(1);
  zero[0].x = Eigen::Vector2d(0.0, 0.0);
  zero[0].y = 1;
  CHECK_THROWS_AS(Dataset::build(std::move(zero)), DegenerateInputError);

  std::vector<LabeledPoint> badlab(1);
  badlab[0].x = Eigen::Vector2d(1.0, 0.0);
  badlab[0].y = 0;
  CHECK_THROWS_AS(Dataset::build(std::move(badlab)), FormatError);

  std::vector<LabeledPoint> mixed(2);
  mixed[0].x = Eigen::Vector2d(1.0, 0.0);
  mixed[0].y = 1;
  mixed[1].x = Eigen::Vector3d(1.0, 0.0, 0.0);
  mixed[1].y = 1;
  CHECK_THROWS_AS(Dataset::build(std::move(mixed)), FormatError);
}

TEST_CASE("stats: single point has unit self-correlation") {
  std::vector<LabeledPoint> pts(1);
  pts[0].x = Eigen::Vector2d(3.0, 4.0);
  pts[0].y = -1;
  const DataStats st = compute_stats(Dataset::build(std::move(pts)));
  CHECK(st.mu == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.X_max == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(st.X_min == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(st.correlation.rows() == 1);
  CHECK(st.correlation(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  // class sums: the point is negative, so x_plus is the zero vector
  CHECK(st.x_plus.norm() == 0.0);
  CHECK(st.x_minus.isApprox(Eigen::Vector2d(3.0, 4.0)));
}

TEST_CASE("stats: nearly-parallel same-class pair gives mu = sin(0.1)") {
  Dataset ds = make2(1.0, 0.0, 1, std::sin(0.1), std::cos(0.1), 1);
  const DataStats st = compute_stats(ds);
  CHECK(st.mu == doctest::Approx(std::sin(0.1)).epsilon(1e-12));
  CHECK(st.correlation(0, 1) == doctest::Approx(std::sin(0.1)).epsilon(1e-12));
  CHECK(st.correlation(1, 0) == st.correlation(0, 1));
  CHECK(st.correlation(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(st.correlation(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stats: orthogonal pair collapses mu to zero") {
  Dataset ds = make2(1.0, 0.0, 1, 0.0, 1.0, 1);
  const DataStats st = compute_stats(ds);
  CHECK(std::fabs(st.mu) <= 1e-15);
}

TEST_CASE("stats: opposite-label pair uses signed correlation") {
  // y2*x2 = (0.8,-0.6), so the signed cosine with (1,0) is 0.8
  Dataset ds = make2(1.0, 0.0, 1, -0.8, 0.6, -1);
  const DataStats st = compute_stats(ds);
  CHECK(st.mu == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("stats are permutation invariant and scale covariant") {
  Dataset a = make2(1.0, 0.2, 1, -0.7, 0.4, -1);
  Dataset b = make2(-0.7, 0.4, -1, 1.0, 0.2, 1);
  const DataStats sa = compute_stats(a);
  const DataStats sb = compute_stats(b);
  CHECK(sa.mu == doctest::Approx(sb.mu).epsilon(1e-14));
  CHECK(sa.X_max == doctest::Approx(sb.X_max).epsilon(1e-14));
  CHECK(sa.X_min == doctest::Approx(sb.X_min).epsilon(1e-14));

  Dataset scaled = make2(3.0, 0.6, 1, -2.1, 1.2, -1);  // a with x *= 3
  const DataStats ss = compute_stats(scaled);
  CHECK(ss.mu == doctest::Approx(sa.mu).epsilon(1e-12));
  CHECK(ss.X_max == doctest::Approx(3.0 * sa.X_max).epsilon(1e-12));
  CHECK(ss.X_min == doctest::Approx(3.0 * sa.X_min).epsilon(1e-12));
}

TEST_CASE("center subtracts the mean and rejects collapsing points") {
  Dataset ds = make2(1.0, 0.0, 1, 3.0, 0.0, -1);
  Dataset c = center(ds);
  CHECK((c.x(0) - Eigen::Vector2d(-1.0, 0.0)).norm() <= 1e-15);
  CHECK((c.x(1) - Eigen::Vector2d(1.0, 0.0)).norm() <= 1e-15);
  CHECK(c.y(0) == 1);
  CHECK(c.y(1) == -1);

  // already-centered data is a fixed point
  Dataset c2 = center(c);
  CHECK((c2.x(0) - c.x(0)).norm() <= 1e-12);
  CHECK((c2.x(1) - c.x(1)).norm() <= 1e-12);

  std::vector<LabeledPoint> one(1);
  one[0].x = Eigen::Vector2d(2.0, 2.0);
  one[0].y = 1;
  Dataset single = Dataset::build(std::move(one));
  CHECK_THROWS_AS(center(single), DegenerateInputError);
}

TEST_CASE("generate_separable hits the requested correlation floor") {
  Dataset a = generate_separable(2, 1, 1, 0.5, 7);
  CHECK(a.n == 2);
  CHECK(compute_stats(a).mu >= 0.5);

  Dataset lone = generate_separable(2, 1, 0, 0.5, 3);
  CHECK(lone.n == 1);
  CHECK(compute_stats(lone).mu == doctest::Approx(1.0).epsilon(1e-12));

  Dataset big = generate_separable(3, 5, 5, 0.2, 1);
  CHECK(big.n == 10);
  CHECK(big.D == 3);
  CHECK(compute_stats(big).mu >= 0.2);

  // same seed, same bytes
  Dataset again = generate_separable(3, 5, 5, 0.2, 1);
  CHECK(dataset_to_json(big) == dataset_to_json(again));

  CHECK_THROWS_AS(generate_separable(0, 1, 1, 0.5, 1), PreconditionError);
  CHECK_THROWS_AS(generate_separable(2, 0, 0, 0.5, 1), PreconditionError);
}

TEST_CASE("json round trip is byte stable and lossless") {
  Dataset ds = generate_separable(3, 2, 2, 0.3, 11);
  const std::string text = dataset_to_json(ds);
  Dataset back = dataset_from_json(text);
  CHECK(back.n == ds.n);
  CHECK(back.D == ds.D);
  for (int i = 0; i < ds.n; ++i) {
    CHECK(back.y(i) == ds.y(i));
    // %.17g round-trips doubles exactly
    CHECK((back.x(i).array() == ds.x(i).array()).all());
  }
  CHECK(dataset_to_json(back) == text);

  CHECK_THROWS_AS(dataset_from_json("not json"), FormatError);
  CHECK_THROWS_AS(dataset_from_json("{\"points\": 3}"), FormatError);

  const fs::path dir = fresh_dir("coneflow-data-json");
  const std::string path = (dir / "ds.json").string();
  save_dataset(ds, path);
  Dataset loaded = load_dataset(path);
  CHECK(dataset_to_json(loaded) == text);
}

TEST_CASE("idx loader maps digits to labels and scales pixels") {
  const fs::path dir = fresh_dir("coneflow-data-idx");
  const fs::path img = dir / "imgs";
  const fs::path lab = dir / "labs";
  write_bytes(img, tiny_images());
  write_bytes(lab, tiny_labels());

  Dataset ds = load_idx(img.string(), lab.string(), 0, 1, 100);
  CHECK(ds.n == 3);  // two zeros, one one; the 7 is skipped
  CHECK(ds.D == 4);
  CHECK(ds.n_plus() == 2);
  CHECK(ds.n_minus() == 1);
  CHECK(ds.x(0)[0] == doctest::Approx(10.0 / 255.0).epsilon(1e-15));
  CHECK(ds.x(1)[0] == doctest::Approx(1.0).epsilon(1e-15));  // 255/255
  CHECK(ds.y(0) == 1);
  CHECK(ds.y(1) == -1);

  // per-class cap applies in file order
  Dataset capped = load_idx(img.string(), lab.string(), 0, 1, 1);
  CHECK(capped.n == 2);

  // cap of zero leaves nothing -> empty-dataset error
  CHECK_THROWS_AS(load_idx(img.string(), lab.string(), 0, 1, 0),
                  DegenerateInputError);
  // swapped files have the wrong magic
  CHECK_THROWS_AS(load_idx(lab.string(), img.string(), 0, 1, 100), FormatError);
  CHECK_THROWS_AS(load_idx(img.string(), lab.string(), 0, 0, 100),
                  PreconditionError);

  // truncated pixel payload
  std::vector<unsigned char> cut = tiny_images();
  cut.resize(cut.size() - 3);
  const fs::path img_cut = dir / "imgs-cut";
  write_bytes(img_cut, cut);
  CHECK_THROWS_AS(load_idx(img_cut.string(), lab.string(), 0, 1, 100),
                  FormatError);

  // record-count mismatch between the two files
  std::vector<unsigned char> lab5 = tiny_labels();
  lab5[7] = 5;  // count field low byte
  lab5.push_back(0);
  const fs::path lab_5 = dir / "labs-5";
  write_bytes(lab_5, lab5);
  CHECK_THROWS_AS(load_idx(img.string(), lab_5.string(), 0, 1, 100),
                  FormatError);

  // a digit that never occurs is reported
  CHECK_THROWS_AS(load_idx(img.string(), lab.string(), 0, 9, 100), FormatError);

  CHECK_THROWS_AS(load_idx((dir / "missing").string(), lab.string(), 0, 1, 100),
                  UsageError);
}

}  // TEST_SUITE
