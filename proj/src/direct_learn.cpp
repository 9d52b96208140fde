#include "eventfeat/direct_learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "eventfeat/error.hpp"

namespace eventfeat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log det of a symmetric positive definite matrix; -inf when not PD.
double spd_log_det(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return -kInf;
  const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
  if (diag.minCoeff() <= 0.0) return -kInf;
  return 2.0 * diag.array().log().sum();
}

double weighted_omega(const Transform& a, double w2, double w3, double w4) {
  const RowMatrix& A = a.rows;
  double value = 0.0;
  if (w2 != 0.0) value += w2 * A.squaredNorm();
  if (w3 != 0.0) {
    const Eigen::MatrixXd gram = A * A.transpose();
    value -= w3 * (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).squaredNorm();
  }
  if (w4 != 0.0) {
    for (const auto& [start, count] : row_blocks(a.size(), a.dim())) {
      const auto block = A.middleRows(start, count);
      const double ld = spd_log_det(block * block.transpose());
      if (!std::isfinite(ld)) return kInf;
      value -= w4 * ld;
    }
  }
  return value;
}

Eigen::MatrixXd metric(const Eigen::MatrixXd& volumes, double w2) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(volumes.rows(), volumes.rows());
  m.selfadjointView<Eigen::Lower>().rankUpdate(volumes);
  m = m.selfadjointView<Eigen::Lower>();
  m.diagonal().array() += 2.0 * w2;
  return m;
}

TraceEntry make_entry(int iteration, TrainStep step, const Transform& a,
                      const Eigen::MatrixXd& volumes, const SparseCodes& codes,
                      const DirectHyperparams& h) {
  const TransformWeights w = effective_weights(h, volumes.cols());
  TraceEntry e;
  e.iteration = iteration;
  e.step = step;
  e.fidelity = coding_fidelity(a, volumes, codes);
  e.sparsity = codes.l1_norm();
  e.omega = weighted_omega(a, w.frobenius, w.coherence, w.log_det);
  e.objective = e.fidelity + h.lambda0 * e.sparsity + e.omega;
  e.condition = condition_number(a);
  return e;
}

// Normalizes rows and reseeds rows nearly parallel to an earlier row with the
// worst-coded data column.
int normalize_and_reseed(Transform& a, const Eigen::MatrixXd& volumes, const SparseCodes& codes,
                         double limit) {
  RowMatrix& A = a.rows;
  for (Eigen::Index k = 0; k < A.rows(); ++k) {
    const double n = A.row(k).norm();
    if (n > 0.0) A.row(k) /= n;
  }
  const Eigen::MatrixXd gram = A * A.transpose();
  Eigen::VectorXd err;
  std::vector<bool> taken(static_cast<std::size_t>(volumes.cols()), false);
  int moved = 0;
  for (Eigen::Index j = 1; j < A.rows(); ++j) {
    bool coherent = false;
    for (Eigen::Index k = 0; k < j && !coherent; ++k) coherent = std::abs(gram(k, j)) > limit;
    if (!coherent) continue;
    if (err.size() == 0) {
      err = (A * volumes - codes.codes).colwise().squaredNorm().transpose();
    }
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
      if (taken[static_cast<std::size_t>(i)] || volumes.col(i).squaredNorm() == 0.0) continue;
      if (best < 0 || err[i] > err[best]) best = i;
    }
    if (best < 0) continue;
    taken[static_cast<std::size_t>(best)] = true;
    A.row(j) = volumes.col(best).normalized().transpose();
    ++moved;
  }
  return moved;
}

}  // namespace

void validate(const DirectHyperparams& h) {
  if (h.num_basis < 1) throw Error(ErrorCode::kInvalidArgument, "num_basis must be >= 1");
  if (!(h.lambda0 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda0 must be positive");
  if (h.lambda1 < 0 || h.lambda2 < 0 || h.lambda3 < 0 || h.lambda4 < 0) {
    throw Error(ErrorCode::kInvalidArgument, "Omega weights must be non-negative");
  }
  if (h.num_iterations < 0) throw Error(ErrorCode::kInvalidArgument, "num_iterations < 0");
}

double threshold_code_element(const Transform& transform, const Eigen::VectorXd& v,
                              Eigen::Index k, double lambda0) {
  return soft_threshold(transform.rows.row(k).dot(v.transpose()), lambda0);
}

Eigen::VectorXd threshold_code(const Transform& transform, const Eigen::VectorXd& v,
                               double lambda0) {
  if (v.size() != transform.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "input length differs from transform width");
  }
  Eigen::VectorXd l(transform.size());
  for (Eigen::Index k = 0; k < l.size(); ++k) {
    l[k] = threshold_code_element(transform, v, k, lambda0);
  }
  return l;
}

SparseCodes threshold_code_all(const Transform& transform, const Eigen::MatrixXd& volumes,
                               double lambda0) {
  if (volumes.rows() != transform.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "volume length differs from transform width");
  }
  SparseCodes out;
  out.codes.noalias() = transform.rows * volumes;
  out.codes = out.codes.unaryExpr([lambda0](double z) { return soft_threshold(z, lambda0); });
  return out;
}

TransformWeights effective_weights(const DirectHyperparams& h, Eigen::Index num_samples) {
  const double scale = h.scale_by_samples ? static_cast<double>(num_samples) : 1.0;
  return TransformWeights{h.lambda1 * h.lambda2 * scale, h.lambda1 * h.lambda3 * scale,
                          h.lambda1 * h.lambda4 * scale};
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> row_blocks(Eigen::Index num_rows,
                                                              Eigen::Index dim) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  for (Eigen::Index start = 0; start < num_rows; start += dim) {
    blocks.emplace_back(start, std::min(dim, num_rows - start));
  }
  return blocks;
}

Transform update_transform(const Eigen::MatrixXd& volumes, const SparseCodes& codes,
                           const DirectHyperparams& h) {
  validate(h);
  const Eigen::Index d = volumes.rows();
  const Eigen::Index K = codes.codes.rows();
  if (codes.codes.cols() != volumes.cols() || d == 0 || K == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "codes and volumes disagree in shape");
  }
  const TransformWeights w = effective_weights(h, volumes.cols());

  Eigen::LLT<Eigen::MatrixXd> factor(metric(volumes, w.frobenius));
  if (factor.info() != Eigen::Success || factor.matrixLLT().diagonal().minCoeff() <= 0.0) {
    throw Error(ErrorCode::kSingularFactor, "V V^T + 2 w I is not positive definite");
  }
  // Column k of `cross` is U^{-T} V l_k^T, with M = U^T U and U^T = L (lower).
  const Eigen::MatrixXd cross = factor.matrixL().solve(volumes * codes.codes.transpose());

  Transform out;
  out.rows.resize(K, d);
  for (const auto& [start, count] : row_blocks(K, d)) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(cross.middleCols(start, count),
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::ArrayXd sigma = svd.singularValues().array();
    const Eigen::VectorXd gamma =
        (0.5 * (sigma + (sigma.square() + 8.0 * w.log_det).sqrt())).matrix();
    // B = R diag(gamma) Q^T and A_b = B U^{-T}, i.e. A_b^T solves U X = B^T.
    const Eigen::MatrixXd bt = svd.matrixU() * gamma.asDiagonal() * svd.matrixV().transpose();
    out.rows.middleRows(start, count) = factor.matrixU().solve(bt).transpose();
  }
  return out;
}

double transform_update_objective(const Transform& transform, const Eigen::MatrixXd& volumes,
                                  const SparseCodes& codes, const DirectHyperparams& h) {
  const TransformWeights w = effective_weights(h, volumes.cols());
  double value = coding_fidelity(transform, volumes, codes);
  if (w.frobenius != 0.0) value += w.frobenius * transform.rows.squaredNorm();
  if (w.log_det == 0.0) return value;
  const Eigen::Index d = transform.dim();
  Eigen::MatrixXd m;
  double log_det_m = 0.0;
  for (const auto& [start, count] : row_blocks(transform.size(), d)) {
    const auto block = transform.rows.middleRows(start, count);
    double ld = 0.0;
    if (count == d) {
      ld = spd_log_det(block * block.transpose());
    } else {
      if (m.size() == 0) {
        m = metric(volumes, w.frobenius);
        log_det_m = spd_log_det(m);
      }
      ld = spd_log_det(block * m * block.transpose()) -
           static_cast<double>(count) / static_cast<double>(d) * log_det_m;
    }
    if (!std::isfinite(ld)) return kInf;
    value -= w.log_det * ld;
  }
  return value;
}

double omega_transform(const Transform& transform, const DirectHyperparams& h) {
  return weighted_omega(transform, h.lambda2, h.lambda3, h.lambda4);
}

double coding_fidelity(const Transform& transform, const Eigen::MatrixXd& volumes,
                       const SparseCodes& codes) {
  return 0.5 * (transform.rows * volumes - codes.codes).squaredNorm();
}

double condition_number(const Transform& transform) {
  if (transform.rows.size() == 0) return kInf;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(transform.rows);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smallest = s[s.size() - 1];
  return smallest > 0.0 ? s[0] / smallest : kInf;
}

DirectResult train_direct(const Eigen::MatrixXd& volumes, const DirectHyperparams& h,
                          std::uint64_t seed) {
  validate(h);
  const Eigen::Index d = volumes.rows();
  if (d == 0 || volumes.cols() == 0) {
    throw Error(ErrorCode::kInsufficientData, "no training volumes");
  }

  DirectResult result;
  Transform& A = result.transform;
  SparseCodes& L = result.codes;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  A.rows.resize(h.num_basis, d);
  for (Eigen::Index k = 0; k < A.rows.rows(); ++k) {
    for (Eigen::Index j = 0; j < d; ++j) A.rows(k, j) = gauss(rng);
    A.rows.row(k).normalize();
  }

  L = threshold_code_all(A, volumes, h.lambda0);
  {
    TraceEntry e = make_entry(0, TrainStep::kCoding, A, volumes, L, h);
    e.monitored_before = 0.5 * (A.rows * volumes).squaredNorm();
    e.monitored_after = e.fidelity + h.lambda0 * e.sparsity;
    result.trace.push_back(e);
  }

  for (int it = 1; it <= h.num_iterations; ++it) {
    const double update_before = transform_update_objective(A, volumes, L, h);
    A = update_transform(volumes, L, h);
    TraceEntry update = make_entry(it, TrainStep::kBasisUpdate, A, volumes, L, h);
    update.monitored_before = update_before;
    update.monitored_after = transform_update_objective(A, volumes, L, h);
    result.trace.push_back(update);

    if (h.lambda3 > 0.0) {
      const int moved = normalize_and_reseed(A, volumes, L, h.coherence_limit);
      TraceEntry reseed = make_entry(it, TrainStep::kReseed, A, volumes, L, h);
      reseed.monitored_before = update.monitored_after;
      reseed.monitored_after = transform_update_objective(A, volumes, L, h);
      reseed.reseeded = moved;
      result.trace.push_back(reseed);
    }

    const double coding_before = coding_fidelity(A, volumes, L) + h.lambda0 * L.l1_norm();
    L = threshold_code_all(A, volumes, h.lambda0);
    TraceEntry coding = make_entry(it, TrainStep::kCoding, A, volumes, L, h);
    coding.monitored_before = coding_before;
    coding.monitored_after = coding.fidelity + h.lambda0 * coding.sparsity;
    result.trace.push_back(coding);
  }
  return result;
}

double code_consistency_check(const Dictionary& orthonormal, double lambda0,
                              const Eigen::MatrixXd& inputs) {
  const Eigen::MatrixXd& D = orthonormal.atoms;
  if (D.rows() != D.cols() ||
      (D.transpose() * D - Eigen::MatrixXd::Identity(D.cols(), D.cols())).cwiseAbs().maxCoeff() >
          1e-8) {
    throw Error(ErrorCode::kInvalidArgument, "basis must be square with orthonormal columns");
  }
  if (inputs.rows() != D.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "input length differs from basis size");
  }
  InverseHyperparams h;
  h.num_basis = static_cast<int>(D.cols());
  h.lambda0 = lambda0;
  h.lasso_tolerance = 1e-12;
  Transform transform{D.transpose()};
  double worst = 0.0;
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const Eigen::VectorXd v = inputs.col(j);
    const Eigen::VectorXd inverse = lasso_code(orthonormal, v, h);
    const Eigen::VectorXd direct = threshold_code(transform, v, lambda0);
    worst = std::max(worst, (inverse - direct).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace eventfeat
