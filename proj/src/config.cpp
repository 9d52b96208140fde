#include "eventfeat/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "eventfeat/error.hpp"

namespace eventfeat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
  throw Error(ErrorCode::kConfig, std::string(key) + ": '" + std::string(value) + "' is not " +
                                      std::string(what));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "an integer");
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

template <typename Range, typename Fn>
std::string join(const Range& items, Fn fn) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ",";
    out += fn(item);
  }
  return out;
}

struct Field {
  std::string_view name;
  std::function<void(PipelineConfig&, std::string_view key, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field int_field(std::string_view name, T PipelineConfig::*member) {
  return {name, [member](PipelineConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_integer<T>(k, v);
          },
          [member](const PipelineConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(std::string_view name, std::function<double&(PipelineConfig&)> ref) {
  return {name,
          [ref](PipelineConfig& c, std::string_view k, std::string_view v) {
            ref(c) = parse_double(k, v);
          },
          [ref](const PipelineConfig& c) {
            return format_double(ref(const_cast<PipelineConfig&>(c)));
          }};
}

Field nested_int(std::string_view name, std::function<int&(PipelineConfig&)> ref) {
  return {name,
          [ref](PipelineConfig& c, std::string_view k, std::string_view v) {
            ref(c) = parse_integer<int>(k, v);
          },
          [ref](const PipelineConfig& c) {
            return std::to_string(ref(const_cast<PipelineConfig&>(c)));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(nested_int("sensor_width", [](PipelineConfig& c) -> int& { return c.sensor.n_x; }));
    f.push_back(nested_int("sensor_height", [](PipelineConfig& c) -> int& { return c.sensor.n_y; }));
    f.push_back(int_field("downsample", &PipelineConfig::downsample));
    f.push_back(int_field("duration_us", &PipelineConfig::duration_us));
    f.push_back(int_field("delta_t_us", &PipelineConfig::delta_t_us));
    f.push_back(int_field("num_intervals", &PipelineConfig::num_intervals));
    f.push_back(int_field("volume_length", &PipelineConfig::volume_length));
    f.push_back(int_field("block_width", &PipelineConfig::block_width));
    f.push_back(int_field("block_height", &PipelineConfig::block_height));
    f.push_back(int_field("stride", &PipelineConfig::stride));
    f.push_back(int_field("temporal_stride", &PipelineConfig::temporal_stride));
    f.push_back({"formulation",
                 [](PipelineConfig& c, std::string_view k, std::string_view v) {
                   if (v == "inverse") c.formulation = Formulation::kInverse;
                   else if (v == "direct") c.formulation = Formulation::kDirect;
                   else bad_value(k, v, "inverse|direct");
                 },
                 [](const PipelineConfig& c) { return std::string(to_string(c.formulation)); }});
    f.push_back(int_field("num_basis", &PipelineConfig::num_basis));

    auto inv = [](auto member) {
      return [member](PipelineConfig& c) -> double& { return c.inverse.*member; };
    };
    f.push_back(double_field("inverse.lambda0", inv(&InverseHyperparams::lambda0)));
    f.push_back(double_field("inverse.lambda1", inv(&InverseHyperparams::lambda1)));
    f.push_back(double_field("inverse.lambda2", inv(&InverseHyperparams::lambda2)));
    f.push_back(double_field("inverse.lambda3", inv(&InverseHyperparams::lambda3)));
    f.push_back(double_field("inverse.lambda4", inv(&InverseHyperparams::lambda4)));
    f.push_back(nested_int("inverse.iterations",
                           [](PipelineConfig& c) -> int& { return c.inverse.num_iterations; }));
    f.push_back(double_field("inverse.lasso_tolerance", inv(&InverseHyperparams::lasso_tolerance)));
    f.push_back(nested_int("inverse.lasso_max_sweeps",
                           [](PipelineConfig& c) -> int& { return c.inverse.lasso_max_sweeps; }));
    f.push_back({"inverse.target_sparsity",
                 [](PipelineConfig& c, std::string_view k, std::string_view v) {
                   const int s = parse_integer<int>(k, v);
                   if (s > 0) c.inverse.target_sparsity = s;
                   else c.inverse.target_sparsity.reset();
                 },
                 [](const PipelineConfig& c) {
                   return std::to_string(c.inverse.target_sparsity.value_or(0));
                 }});
    f.push_back(double_field("inverse.coherence_limit", inv(&InverseHyperparams::coherence_limit)));

    auto dir = [](auto member) {
      return [member](PipelineConfig& c) -> double& { return c.direct.*member; };
    };
    f.push_back(double_field("direct.lambda0", dir(&DirectHyperparams::lambda0)));
    f.push_back(double_field("direct.lambda1", dir(&DirectHyperparams::lambda1)));
    f.push_back(double_field("direct.lambda2", dir(&DirectHyperparams::lambda2)));
    f.push_back(double_field("direct.lambda3", dir(&DirectHyperparams::lambda3)));
    f.push_back(double_field("direct.lambda4", dir(&DirectHyperparams::lambda4)));
    f.push_back(nested_int("direct.iterations",
                           [](PipelineConfig& c) -> int& { return c.direct.num_iterations; }));
    f.push_back({"direct.scale_by_samples",
                 [](PipelineConfig& c, std::string_view k, std::string_view v) {
                   c.direct.scale_by_samples = parse_bool(k, v);
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.direct.scale_by_samples ? "true" : "false");
                 }});
    f.push_back(double_field("direct.coherence_limit", dir(&DirectHyperparams::coherence_limit)));

    f.push_back(double_field("normalize_epsilon",
                             [](PipelineConfig& c) -> double& { return c.normalize_epsilon; }));
    f.push_back(double_field("whitening_epsilon",
                             [](PipelineConfig& c) -> double& { return c.whitening_epsilon; }));
    f.push_back({"encoder",
                 [](PipelineConfig& c, std::string_view k, std::string_view v) {
                   if (v == "triangle") c.encoder = Encoder::kTriangle;
                   else if (v == "native") c.encoder = Encoder::kNative;
                   else bad_value(k, v, "triangle|native");
                 },
                 [](const PipelineConfig& c) { return std::string(to_string(c.encoder)); }});
    f.push_back({"svm.grid",
                 [](PipelineConfig& c, std::string_view k, std::string_view v) {
                   c.svm_grid.clear();
                   for (auto item : split_list(v)) c.svm_grid.push_back(parse_double(k, item));
                 },
                 [](const PipelineConfig& c) { return join(c.svm_grid, format_double); }});
    f.push_back(int_field("svm.folds", &PipelineConfig::svm_folds));
    f.push_back(int_field("seed", &PipelineConfig::seed));
    f.push_back(int_field("train_samples", &PipelineConfig::train_samples));
    f.push_back({"dataset",
                 [](PipelineConfig& c, std::string_view, std::string_view v) {
                   c.dataset = std::string(v);
                 },
                 [](const PipelineConfig& c) { return c.dataset; }});
    f.push_back(double_field("test_fraction",
                             [](PipelineConfig& c) -> double& { return c.test_fraction; }));
    f.push_back({"report_timing",
                 [](PipelineConfig& c, std::string_view k, std::string_view v) {
                   c.report_timing = parse_bool(k, v);
                 },
                 [](const PipelineConfig& c) {
                   return std::string(c.report_timing ? "true" : "false");
                 }});
    f.push_back({"sweep.param",
                 [](PipelineConfig& c, std::string_view, std::string_view v) {
                   c.sweep_param = std::string(v);
                 },
                 [](const PipelineConfig& c) { return c.sweep_param; }});
    f.push_back({"sweep.values",
                 [](PipelineConfig& c, std::string_view, std::string_view v) {
                   c.sweep_values.clear();
                   for (auto item : split_list(v)) c.sweep_values.emplace_back(item);
                 },
                 [](const PipelineConfig& c) {
                   return join(c.sweep_values, [](const std::string& s) { return s; });
                 }});
    return f;
  }();
  return table;
}

// "4x12x12" = T_l x B_x x B_y.
void set_volume(PipelineConfig& c, std::string_view key, std::string_view value) {
  std::vector<int> parts;
  std::string_view rest = value;
  while (true) {
    const auto x = rest.find_first_of("xX");
    parts.push_back(parse_integer<int>(key, trim(rest.substr(0, x))));
    if (x == std::string_view::npos) break;
    rest.remove_prefix(x + 1);
  }
  if (parts.size() != 3) bad_value(key, value, "of the form TlxBxxBy");
  c.volume_length = parts[0];
  c.block_width = parts[1];
  c.block_height = parts[2];
}

}  // namespace

std::string_view to_string(Formulation f) {
  return f == Formulation::kInverse ? "inverse" : "direct";
}

std::string_view to_string(Encoder e) { return e == Encoder::kTriangle ? "triangle" : "native"; }

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "volume") {
    set_volume(config, key, value);
    return;
  }
  for (const Field& f : fields()) {
    if (f.name == key) {
      f.set(config, key, value);
      return;
    }
  }
  throw Error(ErrorCode::kConfig, "unknown key '" + std::string(key) + "'");
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find(" #"); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_config_value(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize_config(const PipelineConfig& config) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.name;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

void validate_config(const PipelineConfig& c) {
  auto fail = [](std::string_view field, std::string_view what) {
    throw Error(ErrorCode::kConfig, std::string(field) + ": " + std::string(what));
  };
  if (c.sensor.n_x < 1 || c.sensor.n_x > 256) fail("sensor_width", "must lie in [1, 256]");
  if (c.sensor.n_y < 1 || c.sensor.n_y > 256) fail("sensor_height", "must lie in [1, 256]");
  if (c.downsample < 1) fail("downsample", "must be >= 1");
  if (c.duration_us == 0 && c.delta_t_us == 0) fail("delta_t_us", "must be positive");
  if (c.num_intervals < 1) fail("num_intervals", "must be >= 1");
  if (c.volume_length < 0 || c.volume_length > c.num_intervals) {
    fail("volume_length", "must lie in [0, num_intervals]");
  }
  const SensorGeometry g = working_geometry(c);
  if (c.block_width < 1 || c.block_width > g.n_x) fail("block_width", "must lie in [1, n_x]");
  if (c.block_height < 1 || c.block_height > g.n_y) fail("block_height", "must lie in [1, n_y]");
  if (c.stride < 1) fail("stride", "must be >= 1");
  if (c.temporal_stride < 1) fail("temporal_stride", "must be >= 1");
  if (c.num_basis < 1) fail("num_basis", "must be >= 1");
  if (!(c.inverse.lambda0 > 0)) fail("inverse.lambda0", "must be positive");
  if (!(c.direct.lambda0 > 0)) fail("direct.lambda0", "must be positive");
  for (double v : {c.inverse.lambda1, c.inverse.lambda2, c.inverse.lambda3, c.inverse.lambda4}) {
    if (v < 0) fail("inverse.lambda1..4", "must be non-negative");
  }
  for (double v : {c.direct.lambda1, c.direct.lambda2, c.direct.lambda3, c.direct.lambda4}) {
    if (v < 0) fail("direct.lambda1..4", "must be non-negative");
  }
  if (c.inverse.num_iterations < 0) fail("inverse.iterations", "must be >= 0");
  if (c.direct.num_iterations < 0) fail("direct.iterations", "must be >= 0");
  if (!(c.inverse.lasso_tolerance > 0)) fail("inverse.lasso_tolerance", "must be positive");
  if (c.inverse.lasso_max_sweeps < 1) fail("inverse.lasso_max_sweeps", "must be >= 1");
  if (!(c.normalize_epsilon >= 0)) fail("normalize_epsilon", "must be >= 0");
  if (!(c.whitening_epsilon >= 0)) fail("whitening_epsilon", "must be >= 0");
  if (c.svm_grid.empty()) fail("svm.grid", "must list at least one value");
  for (double v : c.svm_grid) {
    if (!(v > 0)) fail("svm.grid", "values must be positive");
  }
  if (c.svm_folds < 2) fail("svm.folds", "must be >= 2");
  if (c.train_samples < c.num_basis) fail("train_samples", "must be >= num_basis");
  if (!(c.test_fraction > 0 && c.test_fraction < 1)) fail("test_fraction", "must lie in (0, 1)");
}

SensorGeometry working_geometry(const PipelineConfig& c) {
  const int f = std::max(1, c.downsample);
  return SensorGeometry{(c.sensor.n_x + f - 1) / f, (c.sensor.n_y + f - 1) / f};
}

AccumulationConfig accumulation_config(const PipelineConfig& c) {
  AccumulationConfig a;
  a.num_intervals = c.num_intervals;
  a.delta_t = c.duration_us > 0
                  ? (c.duration_us + static_cast<std::uint64_t>(c.num_intervals) - 1) /
                        static_cast<std::uint64_t>(c.num_intervals)
                  : c.delta_t_us;
  a.volume_length = c.volume_length == 0 ? c.num_intervals : c.volume_length;
  a.block_width = c.block_width;
  a.block_height = c.block_height;
  a.stride = c.stride;
  a.temporal_stride = c.temporal_stride;
  return a;
}

InverseHyperparams inverse_hyperparams(const PipelineConfig& c) {
  InverseHyperparams h = c.inverse;
  h.num_basis = c.num_basis;
  return h;
}

DirectHyperparams direct_hyperparams(const PipelineConfig& c) {
  DirectHyperparams h = c.direct;
  h.num_basis = c.num_basis;
  return h;
}

}  // namespace eventfeat
