#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "eventfeat/direct_learn.hpp"
#include "eventfeat/event_io.hpp"
#include "eventfeat/features.hpp"
#include "eventfeat/inverse_learn.hpp"
#include "eventfeat/volumes.hpp"

namespace eventfeat {

// Everything a run needs. Defaults are the best settings of the N-Caltech101
// parameter study: K = 1700, 4x12x12 volumes (T_l x B_x x B_y), 7 intervals.
struct PipelineConfig {
  SensorGeometry sensor{34, 34};
  int downsample = 1;
  // When positive, delta_t is derived as ceil(duration_us / num_intervals).
  std::uint64_t duration_us = 0;
  std::uint64_t delta_t_us = 50000;
  int num_intervals = 7;
  int volume_length = 4;  // 0 selects all intervals (T_l = T)
  int block_width = 12;
  int block_height = 12;
  int stride = 1;
  int temporal_stride = 1;

  Formulation formulation = Formulation::kInverse;
  int num_basis = 1700;
  InverseHyperparams inverse;
  DirectHyperparams direct;
  double normalize_epsilon = kDefaultNormalizeEpsilon;
  double whitening_epsilon = kDefaultWhiteningEpsilon;
  Encoder encoder = Encoder::kTriangle;

  std::vector<double> svm_grid{0.01, 0.1, 1.0, 10.0, 100.0};
  int svm_folds = 5;

  std::uint64_t seed = 1;
  int train_samples = 20000;
  std::string dataset;
  double test_fraction = 0.2;
  bool report_timing = true;

  std::string sweep_param;
  std::vector<std::string> sweep_values;
};

// `key = value` lines, `#` comments. Unknown keys and bad values raise
// kConfig naming the line and key.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::string& path);

// Sets one key; the same parser the file reader uses.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);

// Canonical text form; parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const PipelineConfig& config);

// Throws kConfig with the offending field path.
void validate_config(const PipelineConfig& config);

SensorGeometry working_geometry(const PipelineConfig& config);
AccumulationConfig accumulation_config(const PipelineConfig& config);
InverseHyperparams inverse_hyperparams(const PipelineConfig& config);
DirectHyperparams direct_hyperparams(const PipelineConfig& config);

std::string_view to_string(Formulation f);
std::string_view to_string(Encoder e);

}  // namespace eventfeat
