#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "coneflow/common.hpp"

namespace coneflow {

struct LabeledPoint {
  Eigen::VectorXd x;
  int y = 1;  // +1 or -1
};

// Binary-labeled point set. build() enforces: at least one point, consistent
// dimension, labels in {-1,+1}, every point with strictly positive norm.
struct Dataset {
  std::vector<LabeledPoint> points;
  int n = 0;
  int D = 0;
  std::vector<double> x_norms;
  std::vector<int> I_plus;
  std::vector<int> I_minus;

  static Dataset build(std::vector<LabeledPoint> pts);
  int n_plus() const { return static_cast<int>(I_plus.size()); }
  int n_minus() const { return static_cast<int>(I_minus.size()); }
  const Eigen::VectorXd& x(int i) const { return points[i].x; }
  int y(int i) const { return points[i].y; }
};

struct DataStats {
  double mu = 0.0;    // min over ordered pairs (incl. i=j) of signed cosines
  double X_max = 0.0;
  double X_min = 0.0;
  Eigen::VectorXd x_plus;   // sum over the positive class (zero vector if empty)
  Eigen::VectorXd x_minus;  // sum over the negative class
  Eigen::MatrixXd correlation;  // n x n, <y_i x_i, y_j x_j>/(|x_i||x_j|)
};

DataStats compute_stats(const Dataset& ds);

// Antipodal-anchor generator: positive points in a spherical cap of half-angle
// arccos(sqrt(target_mu)) around a random unit anchor, negatives around its
// antipode; verified with compute_stats and redrawn up to 100 times.
Dataset generate_separable(int D, int n_plus, int n_minus, double target_mu,
                           uint64_t seed);

// subtract the mean; throws DegenerateInputError naming the first point that
// becomes exactly zero
Dataset center(const Dataset& ds);

// IDX image/label pair -> dataset with pixels scaled into [0,1] by /255.
// digit_pos maps to y=+1, digit_neg to y=-1; records are taken in file order,
// at most max_per_class of each.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int digit_pos, int digit_neg, int max_per_class);

std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace coneflow
