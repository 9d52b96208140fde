#include "eventfeat/volumes.hpp"

#include <cmath>
#include <random>
#include <string>

#include "eventfeat/error.hpp"

namespace eventfeat {

void validate(const AccumulationConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (c.delta_t == 0) fail("delta_t must be positive");
  if (c.num_intervals < 1) fail("num_intervals must be >= 1");
  if (c.volume_length < 1 || c.volume_length > c.num_intervals) {
    fail("volume_length must lie in [1, num_intervals]");
  }
  if (c.block_width < 1 || c.block_height < 1) fail("block size must be >= 1");
  if (c.stride < 1 || c.temporal_stride < 1) fail("strides must be >= 1");
}

AccumulatedGrid::AccumulatedGrid(SensorGeometry geometry, int num_intervals)
    : geometry_(geometry),
      num_intervals_(num_intervals),
      values_(static_cast<std::size_t>(num_intervals) * geometry.n_x * geometry.n_y, 0.0) {}

AccumulationResult accumulate(const EventStream& stream, const AccumulationConfig& config) {
  validate(config);
  AccumulationResult result{AccumulatedGrid(stream.geometry, config.num_intervals), 0};
  const std::uint64_t limit = config.delta_t * static_cast<std::uint64_t>(config.num_intervals);
  for (const Event& e : stream.events) {
    if (e.t >= limit) {
      ++result.dropped;
      continue;
    }
    if (e.x >= stream.geometry.n_x || e.y >= stream.geometry.n_y) {
      throw Error(ErrorCode::kCoordinateOutOfRange, "event outside the sensor geometry");
    }
    const int t = static_cast<int>(e.t / config.delta_t);
    result.grid.at(t, e.y, e.x) += e.polarity;
  }
  return result;
}

LocalVolume extract_volume(const AccumulatedGrid& grid, const AccumulationConfig& config, int x0,
                           int y0, int l0) {
  const auto& g = grid.geometry();
  if (x0 < 0 || y0 < 0 || l0 < 0 || x0 + config.block_width > g.n_x ||
      y0 + config.block_height > g.n_y || l0 + config.volume_length > grid.num_intervals()) {
    throw Error(ErrorCode::kOutOfBounds, "volume at (" + std::to_string(x0) + ", " +
                                             std::to_string(y0) + ", " + std::to_string(l0) +
                                             ") exceeds the grid");
  }
  LocalVolume v;
  v.data.resize(config.volume_dim());
  v.origin = VolumeOrigin{0, 0, l0, x0, y0};
  Eigen::Index k = 0;
  for (int l = 0; l < config.volume_length; ++l) {
    for (int y = 0; y < config.block_height; ++y) {
      for (int x = 0; x < config.block_width; ++x) v.data[k++] = grid.at(l0 + l, y0 + y, x0 + x);
    }
  }
  return v;
}

namespace {

int lattice_count(int extent, int block, int stride) {
  return extent < block ? 0 : (extent - block) / stride + 1;
}

}  // namespace

std::size_t lattice_size(SensorGeometry g, const AccumulationConfig& c) {
  return static_cast<std::size_t>(lattice_count(g.n_x, c.block_width, c.stride)) *
         lattice_count(g.n_y, c.block_height, c.stride) *
         lattice_count(c.num_intervals, c.volume_length, c.temporal_stride);
}

std::vector<LocalVolume> extract_grid_volumes(const AccumulatedGrid& grid,
                                              const AccumulationConfig& config) {
  validate(config);
  const auto& g = grid.geometry();
  if (config.block_width > g.n_x || config.block_height > g.n_y) {
    throw Error(ErrorCode::kOutOfBounds, "block larger than the sensor");
  }
  std::vector<LocalVolume> out;
  out.reserve(lattice_size(g, config));
  for (int l0 = 0; l0 + config.volume_length <= grid.num_intervals(); l0 += config.temporal_stride) {
    for (int y0 = 0; y0 + config.block_height <= g.n_y; y0 += config.stride) {
      for (int x0 = 0; x0 + config.block_width <= g.n_x; x0 += config.stride) {
        LocalVolume v = extract_volume(grid, config, x0, y0, l0);
        v.origin.block = out.size();
        out.push_back(std::move(v));
      }
    }
  }
  return out;
}

std::vector<LocalVolume> sample_random_volumes(std::span<const AccumulatedGrid> grids,
                                               const AccumulationConfig& config, int count,
                                               std::uint64_t seed, int max_attempts_per_volume) {
  validate(config);
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < grids.size(); ++i) {
    const auto& g = grids[i].geometry();
    if (config.block_width <= g.n_x && config.block_height <= g.n_y &&
        config.volume_length <= grids[i].num_intervals()) {
      usable.push_back(i);
    }
  }
  if (usable.empty()) {
    throw Error(ErrorCode::kInsufficientData, "no grid admits a volume of the configured size");
  }

  std::mt19937_64 rng(seed);
  std::vector<LocalVolume> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) {
    bool accepted = false;
    for (int attempt = 0; attempt < max_attempts_per_volume && !accepted; ++attempt) {
      const std::size_t gi = usable[std::uniform_int_distribution<std::size_t>(
          0, usable.size() - 1)(rng)];
      const AccumulatedGrid& grid = grids[gi];
      const auto& g = grid.geometry();
      const int x0 = std::uniform_int_distribution<int>(0, g.n_x - config.block_width)(rng);
      const int y0 = std::uniform_int_distribution<int>(0, g.n_y - config.block_height)(rng);
      const int l0 =
          std::uniform_int_distribution<int>(0, grid.num_intervals() - config.volume_length)(rng);
      LocalVolume v = extract_volume(grid, config, x0, y0, l0);
      if (v.data.isZero(0.0)) continue;
      v.origin.source = gi;
      v.origin.block = static_cast<std::size_t>(n);
      out.push_back(std::move(v));
      accepted = true;
    }
    if (!accepted) {
      throw Error(ErrorCode::kInsufficientData,
                  "only all-zero volumes found after " + std::to_string(max_attempts_per_volume) +
                      " draws");
    }
  }
  return out;
}

void normalize_in_place(Eigen::Ref<Eigen::VectorXd> v, double epsilon) {
  if (v.size() == 0) return;
  const double mean = v.mean();
  v.array() -= mean;
  const double var = v.squaredNorm() / static_cast<double>(v.size());
  const double denom = std::sqrt(var + epsilon);
  if (denom > 0.0) v /= denom;
}

LocalVolume normalize_volume(const LocalVolume& v, double epsilon) {
  LocalVolume out = v;
  normalize_in_place(out.data, epsilon);
  return out;
}

Eigen::MatrixXd stack_volumes(std::span<const LocalVolume> volumes) {
  if (volumes.empty()) return {};
  Eigen::MatrixXd m(volumes.front().data.size(), static_cast<Eigen::Index>(volumes.size()));
  for (std::size_t j = 0; j < volumes.size(); ++j) {
    if (volumes[j].data.size() != m.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "volumes differ in length");
    }
    m.col(static_cast<Eigen::Index>(j)) = volumes[j].data;
  }
  return m;
}

}  // namespace eventfeat
