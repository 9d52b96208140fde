#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eventfeat/event_io.hpp"

namespace eventfeat {

struct LabeledStreams {
  std::vector<EventStream> streams;
  std::vector<int> labels;
};

struct Dataset {
  std::vector<std::string> class_names;  // label i names class_names[i]
  LabeledStreams train;
  LabeledStreams test;
};

// Either DIR/train/<class>/* and DIR/test/<class>/*, or DIR/<class>/* split
// into train/test by a seeded stratified draw of `test_fraction` per class.
// Classes are sorted by name; files within a class by file name.
Dataset load_dataset(const std::string& dir, SensorGeometry geometry, double test_fraction,
                     std::uint64_t seed);

// Writes DIR/train/<class>/NNNN.bin and DIR/test/<class>/NNNN.bin.
void write_dataset(const Dataset& dataset, const std::string& dir);

struct SyntheticOptions {
  int train_per_class = 200;
  int test_per_class = 100;
  int size = 34;
  std::uint64_t duration_us = 70000;
  int frames = 25;
  double contrast_threshold = 0.25;
  double object_log_contrast = 1.1;
  int noise_events = 30;
};

enum class SyntheticShape { kBlob = 0, kDiagonalBar = 1, kHorizontalBar = 2, kVerticalBar = 3 };

// Class names in label order.
const std::vector<std::string>& synthetic_class_names();

// One recording: the shape, placed at a random position, traces a
// three-segment closed saccade while the brightness model fires events.
// Uniform background noise events are mixed in.
EventStream synthesize_shape_recording(SyntheticShape shape, std::uint64_t seed,
                                       const SyntheticOptions& options = {});

// Four classes, balanced, fully determined by `seed`.
Dataset make_synthetic_dataset(std::uint64_t seed, const SyntheticOptions& options = {});

void make_synthetic_benchmark(std::uint64_t seed, const std::string& dir,
                              const SyntheticOptions& options = {});

}  // namespace eventfeat
