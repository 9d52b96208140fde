#include "eventfeat/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "eventfeat/error.hpp"

namespace eventfeat {

namespace {

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

AccumulatedGrid recording_grid(const EventStream& stream, const PipelineConfig& config) {
  const AccumulationConfig acc = accumulation_config(config);
  if (config.downsample > 1) return accumulate(downsample(stream, config.downsample), acc).grid;
  return accumulate(stream, acc).grid;
}

std::vector<AccumulatedGrid> recording_grids(const LabeledStreams& split,
                                             const PipelineConfig& config) {
  std::vector<AccumulatedGrid> grids;
  grids.reserve(split.streams.size());
  for (const auto& s : split.streams) grids.push_back(recording_grid(s, config));
  return grids;
}

LearnOutcome learn_basis(const PipelineConfig& config, std::span<const AccumulatedGrid> grids) {
  validate_config(config);
  const AccumulationConfig acc = accumulation_config(config);
  const auto volumes = sample_random_volumes(grids, acc, config.train_samples, config.seed);
  Eigen::MatrixXd data = stack_volumes(volumes);
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    normalize_in_place(data.col(j), config.normalize_epsilon);
  }

  LearnOutcome out;
  out.model.config = config;
  out.model.kind = config.formulation;
  out.model.whitening = fit_whitening(data, config.whitening_epsilon);
  apply_whitening_in_place(out.model.whitening, data);

  if (config.formulation == Formulation::kInverse) {
    InverseResult r = train_inverse(data, inverse_hyperparams(config), config.seed + 1);
    out.model.dictionary = std::move(r.dictionary);
    out.trace = std::move(r.trace);
  } else {
    DirectResult r = train_direct(data, direct_hyperparams(config), config.seed + 1);
    out.model.transform = std::move(r.transform);
    out.trace = std::move(r.trace);
  }
  return out;
}

Eigen::MatrixXd encode_grids(const ModelContainer& model, std::span<const AccumulatedGrid> grids) {
  const AccumulationConfig acc = accumulation_config(model.config);
  const BasisView basis = model.basis_view();
  const NativeEncoder native = model.native_encoder();
  EncodingOptions options;
  options.encoder = model.config.encoder;
  options.normalize_epsilon = model.config.normalize_epsilon;
  options.native = &native;

  Eigen::MatrixXd features(static_cast<Eigen::Index>(grids.size()), 4 * basis.size());
  for (std::size_t i = 0; i < grids.size(); ++i) {
    features.row(static_cast<Eigen::Index>(i)) =
        encode_recording(basis, model.whitening, grids[i], acc, options).data.transpose();
  }
  return features;
}

Evaluation evaluate_predictions(std::span<const int> predicted, std::span<const int> truth,
                                int num_classes) {
  Evaluation e;
  e.accuracy = accuracy(predicted, truth);
  e.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 ||
        predicted[i] >= num_classes) {
      throw Error(ErrorCode::kInvalidArgument, "label outside [0, num_classes)");
    }
    ++e.confusion(truth[i], predicted[i]);
  }
  for (int c = 0; c < num_classes; ++c) {
    const int total = e.confusion.row(c).sum();
    e.per_class.push_back(total == 0 ? std::numeric_limits<double>::quiet_NaN()
                                     : static_cast<double>(e.confusion(c, c)) / total);
  }
  return e;
}

CrossValidation train_classifier(ModelContainer& model, const Eigen::MatrixXd& features,
                                 std::span<const int> labels) {
  const auto& c = model.config;
  CrossValidation cv = cross_validate(features, labels, c.svm_grid, c.svm_folds, c.seed + 2);
  model.svm = train_svm(features, labels, cv.best_c, c.seed + 2);
  return cv;
}

PipelineRun run_pipeline(const PipelineConfig& config, const Dataset& dataset) {
  const auto start = std::chrono::steady_clock::now();
  const auto train_grids = recording_grids(dataset.train, config);
  const auto test_grids = recording_grids(dataset.test, config);

  LearnOutcome learned = learn_basis(config, train_grids);
  const Eigen::MatrixXd train_features = encode_grids(learned.model, train_grids);
  const Eigen::MatrixXd test_features = encode_grids(learned.model, test_grids);

  PipelineRun run;
  run.cv = train_classifier(learned.model, train_features, dataset.train.labels);
  const auto predicted = predict_all(*learned.model.svm, test_features);
  run.evaluation = evaluate_predictions(predicted, dataset.test.labels,
                                        static_cast<int>(dataset.class_names.size()));
  if (config.report_timing) {
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return run;
}

double nearest_centroid_accuracy(const PipelineConfig& config, const Dataset& dataset) {
  auto flatten = [&](const LabeledStreams& split) {
    const auto grids = recording_grids(split, config);
    const auto n = static_cast<Eigen::Index>(grids.front().values().size());
    Eigen::MatrixXd m(n, static_cast<Eigen::Index>(grids.size()));
    for (std::size_t i = 0; i < grids.size(); ++i) {
      m.col(static_cast<Eigen::Index>(i)) =
          Eigen::Map<const Eigen::VectorXd>(grids[i].values().data(), n);
    }
    return m;
  };
  const Eigen::MatrixXd train = flatten(dataset.train);
  const Eigen::MatrixXd test = flatten(dataset.test);
  const auto classes = static_cast<Eigen::Index>(dataset.class_names.size());
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(train.rows(), classes);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(classes);
  for (Eigen::Index i = 0; i < train.cols(); ++i) {
    const int label = dataset.train.labels[static_cast<std::size_t>(i)];
    centroids.col(label) += train.col(i);
    counts[label] += 1.0;
  }
  for (Eigen::Index c = 0; c < classes; ++c) {
    if (counts[c] > 0) centroids.col(c) /= counts[c];
  }
  std::vector<int> predicted;
  for (Eigen::Index i = 0; i < test.cols(); ++i) {
    Eigen::Index best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < classes; ++c) {
      if (counts[c] == 0) continue;
      const double dist = (test.col(i) - centroids.col(c)).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    predicted.push_back(static_cast<int>(best));
  }
  return accuracy(predicted, dataset.test.labels);
}

MetricsRow make_metrics_row(const std::string& setting, const PipelineConfig& config,
                            double accuracy, double seconds) {
  const AccumulationConfig acc = accumulation_config(config);
  return MetricsRow{setting,          config.formulation, config.num_basis,
                    acc.block_width,  acc.block_height,   acc.volume_length,
                    acc.num_intervals, accuracy,          seconds};
}

std::string format_metrics_row(const MetricsRow& r) {
  char seconds[32];
  std::snprintf(seconds, sizeof seconds, "%.3f", r.seconds);
  std::ostringstream out;
  out << r.setting << ',' << to_string(r.formulation) << ',' << r.num_basis << ','
      << r.block_width << ',' << r.block_height << ',' << r.volume_length << ','
      << r.num_intervals << ',' << shortest(r.accuracy) << ',' << seconds;
  return out.str();
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) out += format_metrics_row(r) + "\n";
  return out;
}

std::vector<MetricsRow> run_sweep(const PipelineConfig& config, const Dataset& dataset,
                                  const std::string& param,
                                  std::span<const std::string> values) {
  if (param.empty() || values.empty()) {
    throw Error(ErrorCode::kConfig, "sweep.param and sweep.values must be set");
  }
  std::vector<MetricsRow> rows;
  for (const auto& value : values) {
    PipelineConfig c = config;
    set_config_value(c, param, value);
    validate_config(c);
    const PipelineRun run = run_pipeline(c, dataset);
    rows.push_back(make_metrics_row(param + "=" + value, c, run.evaluation.accuracy, run.seconds));
  }
  return rows;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "short write to " + path);
}

void write_features_csv(const std::string& path, const Eigen::MatrixXd& features,
                        std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "one label per feature row required");
  }
  std::string out = "label";
  for (Eigen::Index j = 0; j < features.cols(); ++j) out += ",f" + std::to_string(j);
  out += '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out += std::to_string(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      out += ',';
      out += shortest(features(i, j));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void read_features_csv(const std::string& path, Eigen::MatrixXd& features,
                       std::vector<int>& labels) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingDataset, "cannot read features file " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kFormat, path + ": empty");
  const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  std::vector<double> values;
  labels.clear();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    int label = 0;
    auto res = std::from_chars(p, end, label);
    if (res.ec != std::errc()) throw Error(ErrorCode::kFormat, path + ": bad label");
    labels.push_back(label);
    p = res.ptr;
    for (Eigen::Index j = 0; j < columns; ++j) {
      if (p == end || *p != ',') {
        throw Error(ErrorCode::kFormat, path + ": line " + std::to_string(line_no) + " is short");
      }
      double v = 0.0;
      res = std::from_chars(p + 1, end, v);
      if (res.ec != std::errc()) throw Error(ErrorCode::kFormat, path + ": bad number");
      values.push_back(v);
      p = res.ptr;
    }
    if (p != end) throw Error(ErrorCode::kFormat, path + ": trailing fields");
  }
  features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(labels.size()), columns);
}

std::string per_class_csv(const Evaluation& e, std::span<const std::string> names) {
  std::string out = "class,name,accuracy,count\n";
  for (std::size_t c = 0; c < e.per_class.size(); ++c) {
    out += std::to_string(c) + "," + (c < names.size() ? names[c] : std::string()) + "," +
           shortest(e.per_class[c]) + "," +
           std::to_string(e.confusion.row(static_cast<Eigen::Index>(c)).sum()) + "\n";
  }
  return out;
}

std::string confusion_csv(const Evaluation& e, std::span<const std::string> names) {
  const auto n = static_cast<std::size_t>(e.confusion.rows());
  auto name = [&](std::size_t c) { return c < names.size() ? names[c] : std::to_string(c); };
  std::string out = "true\\predicted";
  for (std::size_t c = 0; c < n; ++c) out += "," + name(c);
  out += '\n';
  for (std::size_t r = 0; r < n; ++r) {
    out += name(r);
    for (std::size_t c = 0; c < n; ++c) {
      out += "," + std::to_string(e.confusion(static_cast<Eigen::Index>(r),
                                              static_cast<Eigen::Index>(c)));
    }
    out += '\n';
  }
  return out;
}

int dump_basis(const ModelContainer& model, const std::string& dir, int max_atoms) {
  const AccumulationConfig acc = accumulation_config(model.config);
  const BasisView basis = model.basis_view();
  std::filesystem::create_directories(dir);
  const int bx = acc.block_width, by = acc.block_height, tl = acc.volume_length;
  const int width = tl * (bx + 1) - 1;
  const auto count = static_cast<int>(std::min<Eigen::Index>(basis.size(), max_atoms));
  for (int k = 0; k < count; ++k) {
    const Eigen::VectorXd atom = basis.vectors.row(k).transpose();
    const double lo = atom.minCoeff(), hi = atom.maxCoeff();
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width * by), 0);
    for (int l = 0; l < tl; ++l) {
      for (int y = 0; y < by; ++y) {
        for (int x = 0; x < bx; ++x) {
          const double v = atom[(l * by + y) * bx + x];
          pixels[static_cast<std::size_t>(y * width + l * (bx + 1) + x)] =
              static_cast<std::uint8_t>(std::lround((v - lo) * scale));
        }
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "atom_%04d.pgm", k);
    std::string data = "P5\n" + std::to_string(width) + " " + std::to_string(by) + "\n255\n";
    data.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    write_text_file((std::filesystem::path(dir) / name).string(), data);
  }
  return count;
}

}  // namespace eventfeat
