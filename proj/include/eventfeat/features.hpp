#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "eventfeat/direct_learn.hpp"
#include "eventfeat/inverse_learn.hpp"
#include "eventfeat/volumes.hpp"
#include "eventfeat/whitening.hpp"

namespace eventfeat {

enum class Formulation { kInverse, kDirect };
enum class Encoder { kTriangle, kNative };

// K x d encoding prototypes with unit-norm rows. For the native encoder the
// learned basis itself is kept as well.
struct BasisView {
  RowMatrix vectors;
  Formulation kind = Formulation::kInverse;

  Eigen::Index size() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

BasisView make_basis_view(const Dictionary& dictionary);
BasisView make_basis_view(const Transform& transform);

struct FeatureVector {
  Eigen::VectorXd data;  // 4K: top-left, top-right, bottom-left, bottom-right
  std::optional<int> label;
};

// f_k = max(0, mean(z) - z_k) with z_k = |v - b_k|.
Eigen::VectorXd triangle_encode(const BasisView& basis, const Eigen::VectorXd& v);
// Column-wise triangle encoding of whitened volumes (K x N out).
Eigen::MatrixXd triangle_encode_all(const BasisView& basis, const Eigen::MatrixXd& volumes);

enum class Quadrant { kTopLeft = 0, kTopRight = 1, kBottomLeft = 2, kBottomRight = 3 };

// Quadrant of a volume by its centre against floor(n/2); ties go left/top.
Quadrant quadrant_of(const VolumeOrigin& origin, SensorGeometry geometry,
                     const AccumulationConfig& config);

// Sums codes per quadrant. The result is independent of the order of
// `origins`: codes are sorted by lattice index and reduced pairwise.
Eigen::VectorXd pool_quadrants(const Eigen::MatrixXd& codes, std::span<const VolumeOrigin> origins,
                               SensorGeometry geometry, const AccumulationConfig& config);

// Native encoding: soft-threshold codes (direct) or LASSO codes (inverse).
struct NativeEncoder {
  Formulation kind = Formulation::kInverse;
  Dictionary dictionary;
  Transform transform;
  InverseHyperparams inverse;
  double lambda0 = 0.1;
};

struct EncodingOptions {
  Encoder encoder = Encoder::kTriangle;
  double normalize_epsilon = kDefaultNormalizeEpsilon;
  const NativeEncoder* native = nullptr;  // required when encoder == kNative
};

FeatureVector encode_recording(const BasisView& basis, const WhiteningModel& whitening,
                               const AccumulatedGrid& grid, const AccumulationConfig& config,
                               const EncodingOptions& options = {});

}  // namespace eventfeat
