#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace eventfeat {

// One-vs-rest linear L2-SVM over standardized features.
struct LinearSvmModel {
  Eigen::MatrixXd weights;  // classes x D
  Eigen::VectorXd bias;
  std::vector<int> classes;  // ascending
  double reg_c = 1.0;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;

  Eigen::Index dim() const { return weights.cols(); }
};

struct SvmOptions {
  double gradient_tolerance = 1e-5;
  int max_iterations = 10000;
};

// 1/2 |w|^2 + c * sum_i max(0, 1 - y_i (w^T x_i + b))^2, rows of x are examples.
double squared_hinge_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y, double c);

struct BinarySvm {
  Eigen::VectorXd w;
  double b = 0.0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

// Deterministic full-batch minimizer; y in {-1, +1}.
BinarySvm train_binary_svm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double c,
                           const SvmOptions& options = {});

// Rows of `features` are examples. `seed` is accepted for interface
// symmetry; training itself is deterministic.
LinearSvmModel train_svm(const Eigen::MatrixXd& features, std::span<const int> labels,
                         double reg_c, std::uint64_t seed, const SvmOptions& options = {});

Eigen::VectorXd class_scores(const LinearSvmModel& model, const Eigen::VectorXd& feature);
int predict(const LinearSvmModel& model, const Eigen::VectorXd& feature);
std::vector<int> predict_all(const LinearSvmModel& model, const Eigen::MatrixXd& features);

struct CrossValidation {
  double best_c = 1.0;
  std::vector<double> candidates;      // ascending
  std::vector<double> mean_accuracy;   // per candidate
};

// Stratified k-fold; fold of the i-th shuffled example of a class is i mod k.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

CrossValidation cross_validate(const Eigen::MatrixXd& features, std::span<const int> labels,
                               std::span<const double> grid, int folds, std::uint64_t seed,
                               const SvmOptions& options = {});

double accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace eventfeat
