#include "eventfeat/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "eventfeat/error.hpp"

namespace fs = std::filesystem;

namespace eventfeat {

namespace {

std::vector<std::string> sorted_subdirs(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

EventStream load_stream(const fs::path& path, SensorGeometry geometry) {
  const auto bytes = read_file_bytes(path.string());
  try {
    return parse_event_file(bytes, geometry);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void load_split(const fs::path& dir, const std::vector<std::string>& classes,
                SensorGeometry geometry, LabeledStreams& out) {
  for (std::size_t label = 0; label < classes.size(); ++label) {
    const fs::path class_dir = dir / classes[label];
    if (!fs::is_directory(class_dir)) continue;
    for (const auto& file : sorted_files(class_dir)) {
      out.streams.push_back(load_stream(file, geometry));
      out.labels.push_back(static_cast<int>(label));
    }
  }
}

// SplitMix64 finalizer: independent per-recording seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Fraction of the pixel covered by the shape, 4x4 supersampled. (u, v) is
// the pixel centre relative to the shape centre.
double coverage(SyntheticShape shape, double u, double v) {
  constexpr int kSub = 4;
  int inside = 0;
  for (int i = 0; i < kSub; ++i) {
    for (int j = 0; j < kSub; ++j) {
      const double su = u + (i + 0.5) / kSub - 0.5;
      const double sv = v + (j + 0.5) / kSub - 0.5;
      bool hit = false;
      switch (shape) {
        case SyntheticShape::kBlob:
          hit = su * su + sv * sv <= 4.5 * 4.5;
          break;
        case SyntheticShape::kHorizontalBar:
          hit = std::abs(sv) <= 1.5 && std::abs(su) <= 7.0;
          break;
        case SyntheticShape::kVerticalBar:
          hit = std::abs(su) <= 1.5 && std::abs(sv) <= 7.0;
          break;
        case SyntheticShape::kDiagonalBar: {
          const double across = (su - sv) * std::numbers::sqrt2 / 2.0;
          const double along = (su + sv) * std::numbers::sqrt2 / 2.0;
          hit = std::abs(across) <= 1.5 && std::abs(along) <= 7.0;
          break;
        }
      }
      inside += hit;
    }
  }
  return static_cast<double>(inside) / (kSub * kSub);
}

}  // namespace

Dataset load_dataset(const std::string& dir, SensorGeometry geometry, double test_fraction,
                     std::uint64_t seed) {
  const fs::path root(dir);
  if (dir.empty() || !fs::is_directory(root)) {
    throw Error(ErrorCode::kMissingDataset, "dataset directory '" + dir + "' not found");
  }
  Dataset ds;
  if (fs::is_directory(root / "train") && fs::is_directory(root / "test")) {
    ds.class_names = sorted_subdirs(root / "train");
    for (const auto& name : sorted_subdirs(root / "test")) {
      if (!std::binary_search(ds.class_names.begin(), ds.class_names.end(), name)) {
        throw Error(ErrorCode::kMissingDataset, "test class '" + name + "' absent from train");
      }
    }
    load_split(root / "train", ds.class_names, geometry, ds.train);
    load_split(root / "test", ds.class_names, geometry, ds.test);
  } else {
    ds.class_names = sorted_subdirs(root);
    LabeledStreams all;
    load_split(root, ds.class_names, geometry, all);
    std::mt19937_64 rng(seed);
    for (std::size_t label = 0; label < ds.class_names.size(); ++label) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < all.labels.size(); ++i) {
        if (all.labels[i] == static_cast<int>(label)) members.push_back(i);
      }
      std::shuffle(members.begin(), members.end(), rng);
      const auto n_test = static_cast<std::size_t>(
          std::llround(test_fraction * static_cast<double>(members.size())));
      std::vector<std::size_t> test(members.begin(), members.begin() + static_cast<long>(n_test));
      std::vector<std::size_t> train(members.begin() + static_cast<long>(n_test), members.end());
      std::sort(test.begin(), test.end());
      std::sort(train.begin(), train.end());
      for (auto i : train) {
        ds.train.streams.push_back(all.streams[i]);
        ds.train.labels.push_back(all.labels[i]);
      }
      for (auto i : test) {
        ds.test.streams.push_back(all.streams[i]);
        ds.test.labels.push_back(all.labels[i]);
      }
    }
  }
  if (ds.class_names.empty() || ds.train.streams.empty()) {
    throw Error(ErrorCode::kMissingDataset, "dataset '" + dir + "' has no class directories");
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::string& dir) {
  auto write_split = [&](const LabeledStreams& split, const char* name) {
    std::vector<int> counters(dataset.class_names.size(), 0);
    for (std::size_t i = 0; i < split.streams.size(); ++i) {
      const auto label = static_cast<std::size_t>(split.labels[i]);
      const fs::path class_dir = fs::path(dir) / name / dataset.class_names.at(label);
      fs::create_directories(class_dir);
      char file[32];
      std::snprintf(file, sizeof file, "%04d.bin", counters[label]++);
      write_file_bytes((class_dir / file).string(), write_event_file(split.streams[i]));
    }
  };
  write_split(dataset.train, "train");
  write_split(dataset.test, "test");
}

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names{"blob", "diagonal", "horizontal", "vertical"};
  return names;
}

EventStream synthesize_shape_recording(SyntheticShape shape, std::uint64_t seed,
                                       const SyntheticOptions& o) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = 0.5 * o.size - 4.0;
  const double cx0 = lo + 8.0 * unit(rng);
  const double cy0 = lo + 8.0 * unit(rng);
  const double amplitude = 3.0 + 2.0 * unit(rng);
  // Closed saccade: three legs 120 degrees apart.
  const std::array<std::array<double, 2>, 3> legs{{{0.5, 0.8660254037844386},
                                                    {0.5, -0.8660254037844386},
                                                    {-1.0, 0.0}}};

  auto centre_at = [&](double s) {  // s in [0, 1]
    double x = cx0, y = cy0;
    for (int leg = 0; leg < 3; ++leg) {
      const double part = std::clamp(3.0 * s - leg, 0.0, 1.0);
      x += amplitude * legs[static_cast<std::size_t>(leg)][0] * part;
      y += amplitude * legs[static_cast<std::size_t>(leg)][1] * part;
    }
    return std::array<double, 2>{x, y};
  };

  std::vector<Eigen::MatrixXd> frames;
  std::vector<std::uint64_t> times;
  for (int f = 0; f < o.frames; ++f) {
    const double s = static_cast<double>(f) / (o.frames - 1);
    const auto c = centre_at(s);
    Eigen::MatrixXd frame(o.size, o.size);
    for (int y = 0; y < o.size; ++y) {
      for (int x = 0; x < o.size; ++x) {
        const double cov = coverage(shape, x + 0.5 - c[0], y + 0.5 - c[1]);
        frame(y, x) = std::log1p(cov * (std::exp(o.object_log_contrast) - 1.0));
      }
    }
    frames.push_back(std::move(frame));
    times.push_back(static_cast<std::uint64_t>(
        std::llround(s * static_cast<double>(o.duration_us - 1))));
  }
  CameraModel camera{o.contrast_threshold, frames.front()};
  EventStream stream = synthesize_events(frames, times, camera);

  std::uniform_int_distribution<int> coord(0, o.size - 1);
  std::uniform_int_distribution<std::uint64_t> when(0, o.duration_us - 1);
  for (int i = 0; i < o.noise_events; ++i) {
    Event e;
    e.x = static_cast<std::uint16_t>(coord(rng));
    e.y = static_cast<std::uint16_t>(coord(rng));
    e.t = when(rng);
    e.polarity = unit(rng) < 0.5 ? -1 : 1;
    stream.events.push_back(e);
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

Dataset make_synthetic_dataset(std::uint64_t seed, const SyntheticOptions& o) {
  Dataset ds;
  ds.class_names = synthetic_class_names();
  auto fill = [&](LabeledStreams& split, int per_class, std::uint64_t split_tag) {
    for (int label = 0; label < 4; ++label) {
      for (int i = 0; i < per_class; ++i) {
        const std::uint64_t s =
            mix(mix(mix(seed) ^ split_tag) ^ (static_cast<std::uint64_t>(label) << 32 |
                                               static_cast<std::uint64_t>(i)));
        split.streams.push_back(
            synthesize_shape_recording(static_cast<SyntheticShape>(label), s, o));
        split.labels.push_back(label);
      }
    }
  };
  fill(ds.train, o.train_per_class, 1);
  fill(ds.test, o.test_per_class, 2);
  return ds;
}

void make_synthetic_benchmark(std::uint64_t seed, const std::string& dir,
                              const SyntheticOptions& options) {
  write_dataset(make_synthetic_dataset(seed, options), dir);
}

}  // namespace eventfeat
