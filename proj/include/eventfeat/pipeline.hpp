#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eventfeat/classifier.hpp"
#include "eventfeat/config.hpp"
#include "eventfeat/container.hpp"
#include "eventfeat/dataset.hpp"
#include "eventfeat/volumes.hpp"

namespace eventfeat {

// Downsamples (when configured) and accumulates one recording.
AccumulatedGrid recording_grid(const EventStream& stream, const PipelineConfig& config);
std::vector<AccumulatedGrid> recording_grids(const LabeledStreams& split,
                                             const PipelineConfig& config);

struct LearnOutcome {
  ModelContainer model;
  std::vector<TraceEntry> trace;
};

// Samples random volumes, normalizes and whitens them, and learns the basis
// of the configured formulation.
LearnOutcome learn_basis(const PipelineConfig& config, std::span<const AccumulatedGrid> grids);

// One row of 4K pooled features per grid.
Eigen::MatrixXd encode_grids(const ModelContainer& model, std::span<const AccumulatedGrid> grids);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> per_class;  // NaN for classes absent from the truth
  Eigen::MatrixXi confusion;      // rows: true class, cols: predicted
};

Evaluation evaluate_predictions(std::span<const int> predicted, std::span<const int> truth,
                                int num_classes);

// Cross-validates reg_c over the config grid and trains on all rows.
CrossValidation train_classifier(ModelContainer& model, const Eigen::MatrixXd& features,
                                 std::span<const int> labels);

struct PipelineRun {
  Evaluation evaluation;
  CrossValidation cv;
  double seconds = 0.0;
};

PipelineRun run_pipeline(const PipelineConfig& config, const Dataset& dataset);

// Nearest class mean over flattened raw accumulated grids.
double nearest_centroid_accuracy(const PipelineConfig& config, const Dataset& dataset);

struct MetricsRow {
  std::string setting;
  Formulation formulation = Formulation::kInverse;
  int num_basis = 0;
  int block_width = 0;
  int block_height = 0;
  int volume_length = 0;
  int num_intervals = 0;
  double accuracy = 0.0;
  double seconds = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "setting,formulation,K,Bx,By,Tl,intervals,accuracy,seconds";

MetricsRow make_metrics_row(const std::string& setting, const PipelineConfig& config,
                            double accuracy, double seconds);
std::string format_metrics_row(const MetricsRow& row);
std::string metrics_csv(std::span<const MetricsRow> rows);

// One full pipeline run per value of `param` (any config key, or `volume`).
std::vector<MetricsRow> run_sweep(const PipelineConfig& config, const Dataset& dataset,
                                  const std::string& param,
                                  std::span<const std::string> values);

void write_features_csv(const std::string& path, const Eigen::MatrixXd& features,
                        std::span<const int> labels);
void read_features_csv(const std::string& path, Eigen::MatrixXd& features,
                       std::vector<int>& labels);

std::string per_class_csv(const Evaluation& evaluation,
                          std::span<const std::string> class_names);
std::string confusion_csv(const Evaluation& evaluation,
                          std::span<const std::string> class_names);

// Binary PGM per atom: the T_l interval slices side by side, min-max scaled.
int dump_basis(const ModelContainer& model, const std::string& dir, int max_atoms);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace eventfeat
