#include "eventfeat/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "eventfeat/error.hpp"

namespace eventfeat {

namespace {

RowMatrix normalized_rows(RowMatrix m) {
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    const double n = m.row(k).norm();
    if (n > 0.0) m.row(k) /= n;
  }
  return m;
}

Eigen::VectorXd tree_sum(const Eigen::MatrixXd& codes, std::span<const Eigen::Index> columns) {
  if (columns.empty()) return Eigen::VectorXd::Zero(codes.rows());
  if (columns.size() == 1) return codes.col(columns.front());
  const std::size_t half = columns.size() / 2;
  return tree_sum(codes, columns.first(half)) + tree_sum(codes, columns.subspan(half));
}

}  // namespace

BasisView make_basis_view(const Dictionary& dictionary) {
  return BasisView{normalized_rows(dictionary.atoms.transpose()), Formulation::kInverse};
}

BasisView make_basis_view(const Transform& transform) {
  return BasisView{normalized_rows(transform.rows), Formulation::kDirect};
}

Eigen::VectorXd triangle_encode(const BasisView& basis, const Eigen::VectorXd& v) {
  if (v.size() != basis.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "volume length differs from basis width");
  }
  Eigen::VectorXd z(basis.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    z[k] = (basis.vectors.row(k).transpose() - v).norm();
  }
  const double mu = z.mean();
  return (mu - z.array()).max(0.0).matrix();
}

Eigen::MatrixXd triangle_encode_all(const BasisView& basis, const Eigen::MatrixXd& volumes) {
  if (volumes.rows() != basis.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "volume length differs from basis width");
  }
  const Eigen::VectorXd basis_sq = basis.vectors.rowwise().squaredNorm();
  const Eigen::RowVectorXd volume_sq = volumes.colwise().squaredNorm();
  Eigen::MatrixXd z = -2.0 * (basis.vectors * volumes);
  z.colwise() += basis_sq;
  z.rowwise() += volume_sq;
  z = z.cwiseMax(0.0).cwiseSqrt();
  const Eigen::RowVectorXd mu = z.colwise().mean();
  Eigen::MatrixXd f = (-z).rowwise() + mu;
  return f.cwiseMax(0.0);
}

Quadrant quadrant_of(const VolumeOrigin& origin, SensorGeometry geometry,
                     const AccumulationConfig& config) {
  const double cx = origin.x + 0.5 * config.block_width;
  const double cy = origin.y + 0.5 * config.block_height;
  const bool left = cx <= static_cast<double>(geometry.n_x / 2);
  const bool top = cy <= static_cast<double>(geometry.n_y / 2);
  if (top) return left ? Quadrant::kTopLeft : Quadrant::kTopRight;
  return left ? Quadrant::kBottomLeft : Quadrant::kBottomRight;
}

Eigen::VectorXd pool_quadrants(const Eigen::MatrixXd& codes, std::span<const VolumeOrigin> origins,
                               SensorGeometry geometry, const AccumulationConfig& config) {
  if (static_cast<std::size_t>(codes.cols()) != origins.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one origin per code column required");
  }
  std::vector<Eigen::Index> order(origins.size());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return origins[static_cast<std::size_t>(a)].block < origins[static_cast<std::size_t>(b)].block;
  });
  std::array<std::vector<Eigen::Index>, 4> members;
  for (Eigen::Index j : order) {
    const auto q = quadrant_of(origins[static_cast<std::size_t>(j)], geometry, config);
    members[static_cast<std::size_t>(q)].push_back(j);
  }
  const Eigen::Index K = codes.rows();
  Eigen::VectorXd pooled(4 * K);
  for (std::size_t q = 0; q < 4; ++q) {
    pooled.segment(static_cast<Eigen::Index>(q) * K, K) = tree_sum(codes, members[q]);
  }
  return pooled;
}

FeatureVector encode_recording(const BasisView& basis, const WhiteningModel& whitening,
                               const AccumulatedGrid& grid, const AccumulationConfig& config,
                               const EncodingOptions& options) {
  const Eigen::Index d = config.volume_dim();
  if (basis.dim() != d || whitening.dim() != d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model dimension " + std::to_string(basis.dim()) + " vs volume dimension " +
                    std::to_string(d));
  }
  const auto& g = grid.geometry();
  if (config.block_width > g.n_x || config.block_height > g.n_y ||
      config.volume_length > grid.num_intervals()) {
    throw Error(ErrorCode::kEmptyLattice, "no volume fits the recording");
  }
  const std::vector<LocalVolume> volumes = extract_grid_volumes(grid, config);
  if (volumes.empty()) throw Error(ErrorCode::kEmptyLattice, "no volume fits the recording");

  Eigen::MatrixXd data = stack_volumes(volumes);
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    normalize_in_place(data.col(j), options.normalize_epsilon);
  }
  apply_whitening_in_place(whitening, data);

  Eigen::MatrixXd codes;
  if (options.encoder == Encoder::kTriangle) {
    codes = triangle_encode_all(basis, data);
  } else {
    if (options.native == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "native encoder requested without a model");
    }
    const NativeEncoder& native = *options.native;
    if (native.kind == Formulation::kDirect) {
      codes = threshold_code_all(native.transform, data, native.lambda0).codes;
    } else {
      codes = LassoCoder(native.dictionary, native.inverse).code_all(data).codes;
    }
  }

  std::vector<VolumeOrigin> origins;
  origins.reserve(volumes.size());
  for (const auto& v : volumes) origins.push_back(v.origin);
  return FeatureVector{pool_quadrants(codes, origins, g, config), std::nullopt};
}

}  // namespace eventfeat
