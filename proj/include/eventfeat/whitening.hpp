#pragma once

#include <span>

#include <Eigen/Core>

#include "eventfeat/volumes.hpp"

namespace eventfeat {

inline constexpr double kDefaultWhiteningEpsilon = 0.1;

// ZCA whitening: x -> transform * (x - mean), with a symmetric transform.
struct WhiteningModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd transform;
  double epsilon = kDefaultWhiteningEpsilon;

  Eigen::Index dim() const { return mean.size(); }
};

// Columns of `samples` are observations. Covariance uses 1/M normalization;
// eigenvalues are clamped at zero before the inverse square root.
WhiteningModel fit_whitening(const Eigen::MatrixXd& samples, double epsilon);
WhiteningModel fit_whitening(std::span<const LocalVolume> volumes, double epsilon);

LocalVolume apply_whitening(const WhiteningModel& model, const LocalVolume& v);

// Whitens every column of `samples` in place.
void apply_whitening_in_place(const WhiteningModel& model, Eigen::MatrixXd& samples);

}  // namespace eventfeat
