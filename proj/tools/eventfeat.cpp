// eventfeat: command-line front end for the event feature-learning pipeline.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "eventfeat/config.hpp"
#include "eventfeat/container.hpp"
#include "eventfeat/dataset.hpp"
#include "eventfeat/error.hpp"
#include "eventfeat/event_io.hpp"
#include "eventfeat/pipeline.hpp"

namespace fs = std::filesystem;
using namespace eventfeat;

namespace {

struct Common {
  std::string config_path;
  std::string out = "out";
  std::string dataset;
  std::string formulation;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_dataset) {
  cmd->add_option("--config", c.config_path, "Config file (key = value)");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--formulation", c.formulation, "inverse | direct");
  cmd->add_option("--set", c.overrides, "Extra key=value config overrides");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_set = true; }, "Base seed");
  if (with_dataset) cmd->add_option("--dataset", c.dataset, "Dataset directory");
}

PipelineConfig resolve_config(const Common& c) {
  PipelineConfig config = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kConfig, "--set expects key=value");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.formulation.empty()) set_config_value(config, "formulation", c.formulation);
  if (c.seed_set) config.seed = c.seed;
  if (!c.dataset.empty()) config.dataset = c.dataset;
  validate_config(config);
  return config;
}

Dataset open_dataset(const PipelineConfig& config) {
  if (config.dataset.empty()) throw Error(ErrorCode::kConfig, "dataset: no dataset directory given");
  return load_dataset(config.dataset, config.sensor, config.test_fraction, config.seed);
}

fs::path model_path(const Common& c) { return fs::path(c.out) / "model.evft"; }

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

// Model config plus command-line overrides that affect encoding only.
ModelContainer load_model(const Common& c) {
  const fs::path path = model_path(c);
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingDataset, path.string() + " not found; run learn-basis first");
  }
  return load_container_file(path.string());
}

int cmd_synth(const Common& c) {
  const std::uint64_t seed = c.seed_set ? c.seed : (c.config_path.empty() ? 1 : resolve_config(c).seed);
  make_synthetic_benchmark(seed, c.out);
  std::cout << "wrote synthetic benchmark (seed " << seed << ") to " << c.out << "\n";
  return 0;
}

int cmd_inspect(const Common& c, const std::vector<std::string>& paths) {
  const PipelineConfig config = resolve_config(c);
  if (paths.empty() && !config.dataset.empty()) {
    const Dataset d = open_dataset(config);
    std::map<int, std::pair<int, int>> counts;
    for (int l : d.train.labels) ++counts[l].first;
    for (int l : d.test.labels) ++counts[l].second;
    std::cout << "class,name,train,test\n";
    for (const auto& [label, n] : counts) {
      std::cout << label << ',' << d.class_names[static_cast<std::size_t>(label)] << ','
                << n.first << ',' << n.second << "\n";
    }
    return 0;
  }
  if (paths.empty()) throw Error(ErrorCode::kConfig, "inspect: give event files or --dataset");
  std::cout << "file,events,positive,negative,t_first,t_last\n";
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw Error(ErrorCode::kMissingDataset, p + " not found");
    const auto bytes = read_file_bytes(p);
    const EventStream s = parse_event_file(bytes, config.sensor);
    std::size_t pos = 0;
    for (const auto& e : s.events) pos += e.polarity > 0;
    const auto& ev = s.events;
    std::cout << p << ',' << ev.size() << ',' << pos << ',' << ev.size() - pos << ','
              << (ev.empty() ? 0 : ev.front().t) << ',' << (ev.empty() ? 0 : ev.back().t) << "\n";
  }
  return 0;
}

int cmd_learn(const Common& c) {
  const PipelineConfig config = resolve_config(c);
  const Dataset d = open_dataset(config);
  const auto grids = recording_grids(d.train, config);
  const LearnOutcome learned = learn_basis(config, grids);
  fs::create_directories(c.out);
  save_container_file(model_path(c).string(), learned.model);

  std::string trace = "iteration,step,fidelity,sparsity,omega,objective,before,after,condition,reseeded\n";
  for (const auto& t : learned.trace) {
    char row[512];
    std::snprintf(row, sizeof row, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  t.iteration, static_cast<int>(t.step), t.fidelity, t.sparsity, t.omega,
                  t.objective, t.monitored_before, t.monitored_after, t.condition, t.reseeded);
    trace += row;
  }
  write_text_file((fs::path(c.out) / "trace.csv").string(), trace);
  write_text_file((fs::path(c.out) / "classes.txt").string(), join_lines(d.class_names));
  std::cout << "learned " << to_string(config.formulation) << " basis: K = "
            << learned.model.num_basis() << ", d = " << learned.model.volume_dim() << "\n";
  return 0;
}

int cmd_encode(const Common& c) {
  ModelContainer model = load_model(c);
  PipelineConfig config = model.config;
  if (!c.dataset.empty()) config.dataset = c.dataset;
  const Dataset d = open_dataset(config);
  for (const auto& [name, split] : {std::pair{"train", &d.train}, std::pair{"test", &d.test}}) {
    const auto grids = recording_grids(*split, model.config);
    const Eigen::MatrixXd features = encode_grids(model, grids);
    write_features_csv((fs::path(c.out) / (std::string("features_") + name + ".csv")).string(),
                       features, split->labels);
    std::cout << name << ": " << features.rows() << " x " << features.cols() << " features\n";
  }
  write_text_file((fs::path(c.out) / "classes.txt").string(), join_lines(d.class_names));
  return 0;
}

int cmd_train(const Common& c) {
  ModelContainer model = load_model(c);
  Eigen::MatrixXd features;
  std::vector<int> labels;
  read_features_csv((fs::path(c.out) / "features_train.csv").string(), features, labels);
  const CrossValidation cv = train_classifier(model, features, labels);
  save_container_file(model_path(c).string(), model);

  std::string csv = "C,mean_accuracy\n";
  for (std::size_t i = 0; i < cv.candidates.size(); ++i) {
    char row[96];
    std::snprintf(row, sizeof row, "%.17g,%.17g\n", cv.candidates[i], cv.mean_accuracy[i]);
    csv += row;
  }
  write_text_file((fs::path(c.out) / "cv.csv").string(), csv);
  std::cout << "selected C = " << cv.best_c << "\n";
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& split) {
  const auto start = std::chrono::steady_clock::now();
  const ModelContainer model = load_model(c);
  if (!model.svm) throw Error(ErrorCode::kInvalidArgument, "model has no classifier; run train-classifier");
  Eigen::MatrixXd features;
  std::vector<int> labels;
  read_features_csv((fs::path(c.out) / ("features_" + split + ".csv")).string(), features, labels);

  std::vector<std::string> names = read_lines(fs::path(c.out) / "classes.txt");
  const auto num_classes = static_cast<int>(model.svm->classes.size());
  while (static_cast<int>(names.size()) < num_classes) names.push_back(std::to_string(names.size()));

  const auto predicted = predict_all(*model.svm, features);
  const Evaluation e = evaluate_predictions(predicted, labels, num_classes);
  const double seconds =
      model.config.report_timing
          ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
          : 0.0;
  const MetricsRow row = make_metrics_row(split, model.config, e.accuracy, seconds);
  write_text_file((fs::path(c.out) / "metrics.csv").string(), metrics_csv({&row, 1}));
  write_text_file((fs::path(c.out) / "per_class.csv").string(), per_class_csv(e, names));
  write_text_file((fs::path(c.out) / "confusion.csv").string(), confusion_csv(e, names));
  std::cout << split << " accuracy " << e.accuracy << "\n";
  return 0;
}

int cmd_sweep(const Common& c, std::string param, std::vector<std::string> values) {
  const PipelineConfig config = resolve_config(c);
  if (param.empty()) param = config.sweep_param;
  if (values.empty()) values = config.sweep_values;
  const Dataset d = open_dataset(config);
  const auto rows = run_sweep(config, d, param, values);
  fs::create_directories(c.out);
  write_text_file((fs::path(c.out) / "sweep.csv").string(), metrics_csv(rows));
  std::cout << metrics_csv(rows);
  return 0;
}

int cmd_dump(const Common& c, int max_atoms, const std::string& dir) {
  const ModelContainer model = load_model(c);
  const std::string target = dir.empty() ? (fs::path(c.out) / "basis").string() : dir;
  const int n = dump_basis(model, target, max_atoms);
  std::cout << "wrote " << n << " atom images to " << target << "\n";
  return 0;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return 2;
    case ErrorCode::kTruncatedRecord:
    case ErrorCode::kCoordinateOutOfRange:
    case ErrorCode::kNonMonotonicTimestamps:
    case ErrorCode::kTimestampOverflow:
    case ErrorCode::kMissingDataset:
    case ErrorCode::kFormat:
    case ErrorCode::kIo:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kInsufficientData:
    case ErrorCode::kEmptyLattice:
    case ErrorCode::kDegenerateLabels:
    case ErrorCode::kTooFewExamples:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised feature learning for event-camera recordings"};
  app.require_subcommand(1);

  Common common;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic 4-class benchmark");
  add_common(synth, common, false);

  std::vector<std::string> inspect_paths;
  auto* inspect = app.add_subcommand("inspect", "Summarize event files or a dataset");
  add_common(inspect, common, true);
  inspect->add_option("files", inspect_paths, "Event files");

  auto* learn = app.add_subcommand("learn-basis", "Learn the whitening and basis");
  add_common(learn, common, true);

  auto* encode = app.add_subcommand("encode", "Encode train and test recordings");
  add_common(encode, common, true);

  auto* train = app.add_subcommand("train-classifier", "Cross-validate and train the SVM");
  add_common(train, common, false);

  std::string split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Score a feature split");
  add_common(evaluate, common, false);
  evaluate->add_option("--split", split, "train | test")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();

  std::string param;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "One full run per parameter value");
  add_common(sweep, common, true);
  sweep->add_option("--param", param, "Config key to vary (or 'volume')");
  sweep->add_option("--values", values, "Values, comma separated")->delimiter(',');

  int max_atoms = 64;
  std::string dump_dir;
  auto* dump = app.add_subcommand("dump-basis", "Write atoms as PGM images");
  add_common(dump, common, false);
  dump->add_option("--max", max_atoms, "Maximum number of atoms")->capture_default_str();
  dump->add_option("--dir", dump_dir, "Image directory (default OUT/basis)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(common);
    if (inspect->parsed()) return cmd_inspect(common, inspect_paths);
    if (learn->parsed()) return cmd_learn(common);
    if (encode->parsed()) return cmd_encode(common);
    if (train->parsed()) return cmd_train(common);
    if (evaluate->parsed()) return cmd_evaluate(common, split);
    if (sweep->parsed()) return cmd_sweep(common, param, values);
    if (dump->parsed()) return cmd_dump(common, max_atoms, dump_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
