#include "eventfeat/whitening.hpp"

#include <Eigen/Eigenvalues>

#include "eventfeat/error.hpp"

namespace eventfeat {

WhiteningModel fit_whitening(const Eigen::MatrixXd& samples, double epsilon) {
  if (samples.cols() == 0 || samples.rows() == 0) {
    throw Error(ErrorCode::kEmptyInput, "cannot fit whitening on zero volumes");
  }
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be >= 0");

  WhiteningModel model;
  model.epsilon = epsilon;
  const double m = static_cast<double>(samples.cols());
  model.mean = samples.rowwise().sum() / m;
  const Eigen::MatrixXd centered = samples.colwise() - model.mean;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(samples.rows(), samples.rows());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= m;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularFactor, "covariance eigendecomposition failed");
  }
  Eigen::VectorXd scale = eig.eigenvalues().cwiseMax(0.0);
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    const double denom = scale[i] + epsilon;
    scale[i] = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;
  }
  const Eigen::MatrixXd& basis = eig.eigenvectors();
  model.transform = basis * scale.asDiagonal() * basis.transpose();
  // Symmetrize away rounding so transform == transform^T exactly.
  model.transform = 0.5 * (model.transform + model.transform.transpose()).eval();
  return model;
}

WhiteningModel fit_whitening(std::span<const LocalVolume> volumes, double epsilon) {
  if (volumes.empty()) throw Error(ErrorCode::kEmptyInput, "cannot fit whitening on zero volumes");
  return fit_whitening(stack_volumes(volumes), epsilon);
}

LocalVolume apply_whitening(const WhiteningModel& model, const LocalVolume& v) {
  if (v.data.size() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "volume length differs from whitening dimension");
  }
  LocalVolume out;
  out.origin = v.origin;
  out.data = model.transform * (v.data - model.mean);
  return out;
}

void apply_whitening_in_place(const WhiteningModel& model, Eigen::MatrixXd& samples) {
  if (samples.rows() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "sample length differs from whitening dimension");
  }
  samples.colwise() -= model.mean;
  samples = model.transform * samples;
}

}  // namespace eventfeat
