#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "eventfeat/event_io.hpp"

namespace eventfeat {

struct AccumulationConfig {
  std::uint64_t delta_t = 1000;  // interval duration, microseconds
  int num_intervals = 7;         // T
  int volume_length = 4;         // T_l
  int block_width = 12;          // B_x
  int block_height = 12;         // B_y
  int stride = 1;                // spatial lattice step
  int temporal_stride = 1;       // interval step when T_l < T

  int volume_dim() const { return block_width * block_height * volume_length; }

  friend bool operator==(const AccumulationConfig&, const AccumulationConfig&) = default;
};

// Throws kInvalidArgument on a config that violates its own invariants.
void validate(const AccumulationConfig& config);

// Signed polarity sums, indexed [interval][row][column].
class AccumulatedGrid {
 public:
  AccumulatedGrid() = default;
  AccumulatedGrid(SensorGeometry geometry, int num_intervals);

  const SensorGeometry& geometry() const { return geometry_; }
  int num_intervals() const { return num_intervals_; }

  double& at(int t, int y, int x) { return values_[index(t, y, x)]; }
  double at(int t, int y, int x) const { return values_[index(t, y, x)]; }

  std::span<const double> values() const { return values_; }

 private:
  std::size_t index(int t, int y, int x) const {
    return (static_cast<std::size_t>(t) * geometry_.n_y + y) * geometry_.n_x + x;
  }

  SensorGeometry geometry_;
  int num_intervals_ = 0;
  std::vector<double> values_;
};

struct AccumulationResult {
  AccumulatedGrid grid;
  std::size_t dropped = 0;  // events at or beyond num_intervals * delta_t
};

struct VolumeOrigin {
  std::size_t block = 0;   // lattice index within its recording
  std::size_t source = 0;  // grid index for sampled volumes
  int interval = 0;
  int x = 0;
  int y = 0;
};

struct LocalVolume {
  // Interval-major, then row-major spatial.
  Eigen::VectorXd data;
  VolumeOrigin origin;
};

AccumulationResult accumulate(const EventStream& stream, const AccumulationConfig& config);

LocalVolume extract_volume(const AccumulatedGrid& grid, const AccumulationConfig& config, int x0,
                           int y0, int l0);

// Stride lattice over space; over time too when T_l < T.
std::vector<LocalVolume> extract_grid_volumes(const AccumulatedGrid& grid,
                                              const AccumulationConfig& config);

std::size_t lattice_size(SensorGeometry geometry, const AccumulationConfig& config);

// Uniform (grid, x0, y0, l0) draws; all-zero volumes are redrawn up to
// `max_attempts_per_volume` times before giving up with kInsufficientData.
std::vector<LocalVolume> sample_random_volumes(std::span<const AccumulatedGrid> grids,
                                               const AccumulationConfig& config, int count,
                                               std::uint64_t seed,
                                               int max_attempts_per_volume = 1000);

inline constexpr double kDefaultNormalizeEpsilon = 1e-8;

LocalVolume normalize_volume(const LocalVolume& v, double epsilon = kDefaultNormalizeEpsilon);
void normalize_in_place(Eigen::Ref<Eigen::VectorXd> v, double epsilon);

// Columns are volume data vectors.
Eigen::MatrixXd stack_volumes(std::span<const LocalVolume> volumes);

}  // namespace eventfeat
