#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "eventfeat/inverse_learn.hpp"

namespace eventfeat {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// K x d sparsifying transform; row k is a_k^T.
struct Transform {
  RowMatrix rows;

  Eigen::Index dim() const { return rows.cols(); }
  Eigen::Index size() const { return rows.rows(); }
};

struct DirectHyperparams {
  int num_basis = 1700;
  double lambda0 = 0.1;
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double lambda3 = 0.0;
  double lambda4 = 0.5;
  int num_iterations = 10;
  // Multiply the Frobenius and log-det weights by the number of training
  // columns so their balance against the data term is sample-size free.
  bool scale_by_samples = true;
  double coherence_limit = 0.99;
};

void validate(const DirectHyperparams& h);

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

// l_k = soft(a_k^T v, lambda0); each element is independent of the others.
double threshold_code_element(const Transform& transform, const Eigen::VectorXd& v,
                              Eigen::Index k, double lambda0);
Eigen::VectorXd threshold_code(const Transform& transform, const Eigen::VectorXd& v,
                               double lambda0);
// Columns of `volumes` coded through one matrix product.
SparseCodes threshold_code_all(const Transform& transform, const Eigen::MatrixXd& volumes,
                               double lambda0);

// Effective weights of the transform subproblem for `num_samples` columns.
struct TransformWeights {
  double frobenius = 0.0;  // lambda1 * lambda2 (* N)
  double coherence = 0.0;  // lambda1 * lambda3 (* N)
  double log_det = 0.0;    // lambda1 * lambda4 (* N)
};
TransformWeights effective_weights(const DirectHyperparams& h, Eigen::Index num_samples);

// Row blocks of at most d rows; the transform update solves each exactly.
std::vector<std::pair<Eigen::Index, Eigen::Index>> row_blocks(Eigen::Index num_rows,
                                                              Eigen::Index dim);

// Closed-form minimizer, per row block, of
//   1/2 |A_b V - L_b|_F^2 + w2 |A_b|_F^2 - w4 log det(A_b M A_b^T) ,
// M = V V^T + 2 w2 I. For a square block the log-det differs from
// log det(A_b A_b^T) by the constant log det M, so the update is exact.
Transform update_transform(const Eigen::MatrixXd& volumes, const SparseCodes& codes,
                           const DirectHyperparams& h);

// Subproblem value minimized by update_transform (square blocks report the
// true log det(A_b A_b^T) value).
double transform_update_objective(const Transform& transform, const Eigen::MatrixXd& volumes,
                                  const SparseCodes& codes, const DirectHyperparams& h);

// lambda2 |A|^2 - lambda3 |A A^T - I|^2 - lambda4 sum_b log|det A_b A_b^T|
// with the row blocks of row_blocks(); one block when K <= d.
double omega_transform(const Transform& transform, const DirectHyperparams& h);

double coding_fidelity(const Transform& transform, const Eigen::MatrixXd& volumes,
                       const SparseCodes& codes);

double condition_number(const Transform& transform);

struct DirectResult {
  Transform transform;
  SparseCodes codes;
  std::vector<TraceEntry> trace;
};

DirectResult train_direct(const Eigen::MatrixXd& volumes, const DirectHyperparams& h,
                          std::uint64_t seed);

// Max |lasso_code(D, v) - threshold_code(D^T, v)| over the columns of
// `inputs`, for a square D with orthonormal columns.
double code_consistency_check(const Dictionary& orthonormal, double lambda0,
                              const Eigen::MatrixXd& inputs);

}  // namespace eventfeat
